import numpy as np

from zefchan.code import FeedbackCode, derive_params, sample_code


def scheme(q=2, n=16, rate=1 / 16, block_frac=0.25, list_slack=0.3,
           rate_slack=0.0, fb_alphabet_override=None):
    return derive_params(q=q, n=n, rate=rate, block_frac=block_frac,
                         list_slack=list_slack, rate_slack=rate_slack,
                         fb_alphabet_override=fb_alphabet_override)


def clone_rows_code(params, clones, seed=77):
    """Code where every message in ``clones`` shares message clones[0]'s rows."""
    src = sample_code(params, seed)
    entries = {}
    for k in range(1, params.rounds + 2):
        fbs = [0] if k == 1 else range(params.fb_alphabet_size)
        for fb in fbs:
            blk = src.block(k, fb)
            for m in range(params.num_messages):
                row = blk[clones[0]] if m in clones else blk[m]
                entries[(k, m, fb)] = row.copy()
    return FeedbackCode(params, seed, entries=entries)


def custom_code(params, rows, seed=0):
    """Code built from an explicit {(k, m, fb): sequence} table; any index not
    present falls back to the seeded sample."""
    src = sample_code(params, seed)
    entries = {}
    for k in range(1, params.rounds + 2):
        fbs = [0] if k == 1 else range(params.fb_alphabet_size)
        for fb in fbs:
            blk = src.block(k, fb)
            for m in range(params.num_messages):
                row = rows.get((k, m, fb))
                entries[(k, m, fb)] = (
                    np.asarray(row, dtype=np.uint16) if row is not None else blk[m].copy()
                )
    return FeedbackCode(params, seed, entries=entries)
