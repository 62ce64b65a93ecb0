import json
import math

import numpy as np
import pytest

from zefchan.channel import distance, parse_word, word_to_text
from zefchan.code import (
    ConfigError,
    FeedbackCode,
    derive_params,
    export_code,
    feedback_distance_threshold,
    import_code,
    sample_code,
    verify_list_decodability,
)
from zefchan.qent import entropy


def tiny_params(**kw):
    base = dict(q=2, n=16, rate=2 / 16, block_frac=0.25, list_slack=0.35,
                rate_slack=0.0, fb_alphabet_override=4)
    base.update(kw)
    return derive_params(**base)


class TestDeriveParams:
    def test_feedback_times(self):
        p = tiny_params()
        assert p.rounds == 3
        assert p.feedback_times == (4, 8, 12)
        assert p.block_len == 4

    def test_list_cap_formula(self):
        p = derive_params(q=2, n=16, rate=0.25, block_frac=0.25, list_slack=0.5, rate_slack=0.0)
        assert p.list_cap == 5  # ceil((2 + log_2 2)/0.5 - 1)

    def test_fb_alphabet_from_separation_bound(self):
        # frozen from an independent evaluation of the alphabet-size bound
        # with q=2, rate=0.25, L=5, block_frac=0.25, slack=0.5: bound ~ 438.92
        p = derive_params(q=2, n=16, rate=0.25, block_frac=0.25, list_slack=0.5, rate_slack=0.0)
        assert p.fb_alphabet_size == 439
        sep = (p.q - 1) * (1 - p.list_slack) * (1 + p.list_slack) / p.q
        bound = p.rate * p.list_cap / (p.block_frac**2 * (1 - entropy(p.q, sep)))
        assert p.fb_alphabet_size > bound
        assert p.fb_alphabet_size - 1 <= bound

    def test_fb_bits(self):
        p = derive_params(q=2, n=16, rate=0.25, block_frac=0.25, list_slack=0.5, rate_slack=0.0)
        assert p.fb_bits == p.rounds * math.ceil(math.log2(p.fb_alphabet_size))

    def test_message_count_floor(self):
        assert tiny_params().num_messages == 4

    def test_rejects_nonintegral_blocks(self):
        with pytest.raises(ConfigError):
            derive_params(q=2, n=14, rate=0.2, block_frac=0.25, list_slack=0.5, rate_slack=0.0)

    def test_rejects_block_frac_at_least_slack(self):
        with pytest.raises(ConfigError):
            derive_params(q=2, n=16, rate=0.25, block_frac=0.25, list_slack=0.2, rate_slack=0.0)

    def test_rejects_huge_slack(self):
        with pytest.raises(ConfigError):
            derive_params(q=2, n=16, rate=0.25, block_frac=0.25, list_slack=1.0, rate_slack=0.0)

    def test_rejects_sub_two_messages(self):
        with pytest.raises(ConfigError):
            derive_params(q=2, n=16, rate=0.01, block_frac=0.25, list_slack=0.5, rate_slack=0.0)


class TestSampling:
    def test_same_seed_identical(self):
        p = tiny_params()
        a, b = sample_code(p, 9), sample_code(p, 9)
        for k in range(1, p.rounds + 2):
            for fb in range(p.fb_alphabet_size):
                assert np.array_equal(a.block(k, fb), b.block(k, fb))

    def test_different_seed_differs(self):
        p = tiny_params()
        a, b = sample_code(p, 9), sample_code(p, 10)
        assert any(
            not np.array_equal(a.block(k, 0), b.block(k, 0))
            for k in range(1, p.rounds + 2)
        )

    def test_symbol_histogram_uniform(self):
        # >= 1e5 symbols; each frequency within 5 sigma of 1/q
        p = derive_params(q=4, n=40, rate=0.125, block_frac=0.1, list_slack=0.2,
                          rate_slack=0.0, fb_alphabet_override=64)
        code = sample_code(p, 123)
        symbols = np.concatenate(
            [code.block(k, fb).ravel() for k in range(2, p.rounds + 2) for fb in range(8)]
        )
        total = symbols.size
        assert total >= 100_000
        sigma = math.sqrt(total * 0.25 * 0.75)
        for s in range(4):
            count = int(np.count_nonzero(symbols == s))
            assert abs(count - total / 4) <= 5 * sigma

    def test_table_cardinality(self):
        p = tiny_params()
        code = sample_code(p, 0)
        assert code.table_size() == (p.rounds + 1) * p.num_messages * p.fb_alphabet_size

    def test_block_one_ignores_feedback(self):
        code = sample_code(tiny_params(), 5)
        assert np.array_equal(code.block(1, 0), code.block(1, 3))


class TestCodeword:
    def test_length(self):
        p = tiny_params()
        code = sample_code(p, 7)
        assert len(code.codeword(1, (0, 0, 0))) == p.n

    def test_causality(self):
        # feedback sequences agreeing on the first j symbols share (j+1) blocks
        p = tiny_params()
        code = sample_code(p, 7)
        a = code.codeword(3, (1, 2, 0)).symbols
        b = code.codeword(3, (1, 2, 3)).symbols
        assert np.array_equal(a[: 3 * p.block_len], b[: 3 * p.block_len])
        c = code.codeword(3, (1, 0, 0)).symbols
        assert np.array_equal(a[: 2 * p.block_len], c[: 2 * p.block_len])

    def test_golden_fixture(self):
        code = sample_code(tiny_params(), 42)
        assert word_to_text(code.codeword(2, (1, 0, 3))) == "0,1,0,1,0,0,1,1,0,1,0,0,0,0,0,1"
        assert word_to_text(code.sub_codeword(1, 0, 0)) == "0,1,0,1"
        assert word_to_text(code.sub_codeword(3, 1, 2)) == "0,0,1,1"


def degenerate_code(params, pair=(0, 1)):
    """Code whose ``pair`` of messages share identical rows everywhere."""
    src = sample_code(params, 77)
    entries = {}
    for k in range(1, params.rounds + 2):
        fbs = [0] if k == 1 else range(params.fb_alphabet_size)
        for fb in fbs:
            blk = src.block(k, fb)
            for m in range(params.num_messages):
                row = blk[pair[0]] if m in pair else blk[m]
                entries[(k, m, fb)] = row.copy()
    return FeedbackCode(params, src.seed, entries=entries)


class TestFindFeedbackSymbol:
    def test_singleton_vacuous(self):
        code = sample_code(tiny_params(), 42)
        assert code.find_feedback_symbol(1, (2,)) == 0

    def test_identical_subcodewords_absent(self):
        p = tiny_params()
        code = degenerate_code(p)
        assert code.find_feedback_symbol(1, (0, 1)) is None

    def test_matches_bruteforce_scan(self):
        p = tiny_params()
        code = sample_code(p, 42)
        thr = feedback_distance_threshold(p)
        for k in range(1, p.rounds + 1):
            for pair in ((0, 1), (0, 2), (1, 3)):
                got = code.find_feedback_symbol(k, pair)
                brute = None
                for fb in range(p.fb_alphabet_size):
                    blk = code.block(k + 1, fb)
                    if int(np.count_nonzero(blk[pair[0]] != blk[pair[1]])) > thr:
                        brute = fb
                        break
                assert got == brute

    def test_selection_certifies_all_pairs(self):
        p = tiny_params()
        code = sample_code(p, 42)
        thr = feedback_distance_threshold(p)
        members = (0, 1, 2)
        fb = code.find_feedback_symbol(2, members)
        if fb is not None:
            blk = code.block(3, fb)
            for i in range(3):
                for j in range(i + 1, 3):
                    d = int(np.count_nonzero(blk[members[i]] != blk[members[j]]))
                    assert d > thr


def listcheck_params():
    # message count above the list cap so the check is not vacuous, and a
    # single small cell (t=9, no erasures spare) so exhaustive mode stays cheap
    return derive_params(q=2, n=12, rate=3 / 12, block_frac=0.25, list_slack=0.45,
                         rate_slack=0.0, fb_alphabet_override=8)


class TestListDecodability:
    def test_vacuous_when_messages_fit_cap(self):
        rep = verify_list_decodability(sample_code(tiny_params(), 1), max_erasures=1)
        assert rep.passed and rep.vacuous

    def test_random_code_passes_exhaustive(self):
        p = listcheck_params()
        assert p.num_messages > p.list_cap
        rep = verify_list_decodability(sample_code(p, 3), max_erasures=1)
        assert rep.passed and not rep.vacuous and not rep.sampled_cells
        assert rep.cells_checked > 0

    def test_exhaustive_matches_independent_recount(self):
        from zefchan.protocol import BobDecoder, reference_trajectory

        p = listcheck_params()
        code = sample_code(p, 3)
        rng = np.random.default_rng(0)
        thr = p.prefix_threshold()
        for _ in range(40):
            t = int(rng.choice(p.feedback_times))
            k = t // p.block_len
            lam = int(rng.integers(0, 2))
            if t - lam <= thr:
                continue
            mask = np.zeros(t, bool)
            mask[rng.choice(t, lam, replace=False)] = True
            vals = rng.integers(0, p.q, t, dtype=np.uint16)
            vals[mask] = 0
            bob = BobDecoder(code)
            for j in range(1, k):
                tj = p.feedback_times[j - 1]
                bob.feedback_at(j, vals[:tj], mask[:tj])
            fb = tuple(bob.sent_feedback)
            radius = (t - lam) * reference_trajectory(p, t, lam)
            # second path: per-message python loop over full codeword prefixes
            count = 0
            for m in range(p.num_messages):
                prefix = []
                for j in range(1, k + 1):
                    prefix.extend(code.block(j, 0 if j == 1 else fb[j - 2])[m].tolist())
                d = sum(
                    1
                    for i in range(t)
                    if not mask[i] and prefix[i] != int(vals[i])
                )
                count += d <= radius
            dists = code.prefix_distances(k, fb, vals, mask)
            assert int(np.count_nonzero(dists <= radius)) == count

    def test_duplicated_prefixes_flagged(self):
        p = listcheck_params()
        src = sample_code(p, 5)
        entries = {}
        clones = list(range(p.list_cap + 1))
        for k in range(1, p.rounds + 2):
            fbs = [0] if k == 1 else range(p.fb_alphabet_size)
            for fb in fbs:
                blk = src.block(k, fb)
                for m in range(p.num_messages):
                    row = blk[clones[0]] if m in clones else blk[m]
                    entries[(k, m, fb)] = row.copy()
        rep = verify_list_decodability(FeedbackCode(p, 5, entries=entries), max_erasures=0)
        assert not rep.passed
        assert rep.violations[0]["list_size"] >= p.list_cap + 1

    def test_most_random_codes_pass(self):
        # statistical smoke test, not an asymptotic claim
        p = listcheck_params()
        good = sum(
            verify_list_decodability(sample_code(p, s), max_erasures=0).passed
            for s in range(100)
        )
        assert good >= 90


class TestExportImport:
    def test_roundtrip_behavior(self):
        p = tiny_params()
        code = sample_code(p, 13)
        copy = import_code(export_code(code))
        for k in range(1, p.rounds + 2):
            for fb in range(p.fb_alphabet_size):
                assert np.array_equal(code.block(k, fb), copy.block(k, fb))
        assert copy.codeword(3, (2, 1, 0)) == code.codeword(3, (2, 1, 0))

    def test_schema_fields(self):
        doc = json.loads(export_code(sample_code(tiny_params(), 13)))
        assert {"q", "n", "theta", "z_size", "seed", "entries"} <= set(doc)

    def test_missing_entry_rejected(self):
        doc = json.loads(export_code(sample_code(tiny_params(), 13)))
        doc["entries"] = doc["entries"][:-1]
        with pytest.raises(ConfigError):
            import_code(json.dumps(doc))
