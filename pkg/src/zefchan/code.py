"""Feedback-code construction, storage, and verification.

A feedback code is a table of sub-codewords indexed by (block k, message m,
most recent feedback symbol).  Block 1 ignores the feedback index (there is
no feedback yet); the remaining blocks carry one column per feedback symbol.
Entries are generated lazily and deterministically from a seed, so the full
table exists conceptually even when the feedback alphabet is large, and an
identical seed always reproduces the identical code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .channel import Word
from .qent import entropy, entropy_inverse

__all__ = [
    "ConfigError",
    "SchemeParams",
    "FeedbackCode",
    "derive_params",
    "sample_code",
    "find_feedback_symbol",
    "feedback_distance_threshold",
    "verify_list_decodability",
    "ListDecodabilityReport",
    "export_code",
    "import_code",
]


class ConfigError(ValueError):
    """Scheme parameters violate an admission rule."""


@dataclass(frozen=True)
class SchemeParams:
    """Derived parameters of one coding-scheme instance."""

    q: int
    n: int
    rate: float
    block_frac: float  # fraction of n between feedback opportunities
    list_slack: float  # slack governing the list-size cap
    rate_slack: float  # rate backoff below capacity
    rounds: int  # number of feedback rounds
    block_len: int
    list_cap: int
    fb_alphabet_size: int
    fb_bits: int
    num_messages: int
    feedback_times: tuple[int, ...]

    def prefix_threshold(self) -> float:
        """Unerased-symbol count that a prefix must exceed before the decoder
        engages: n * (rate + list_slack)."""
        return self.n * (self.rate + self.list_slack)


def _near_int(x: float, what: str) -> int:
    r = round(x)
    if abs(x - r) > 1e-6:
        raise ConfigError(f"{what} must be an integer, got {x}")
    return int(r)


def derive_params(
    q: int,
    n: int,
    rate: float,
    block_frac: float,
    list_slack: float,
    rate_slack: float,
    fb_alphabet_override: int | None = None,
) -> SchemeParams:
    """Validate the free parameters and derive everything else.

    The list cap is ceil((2 + log_q 2)/list_slack - 1); the feedback alphabet
    is the smallest integer strictly above
    rate*L / (block_frac^2 * (1 - H_q((q-1)(1-s)(1+s)/q))) with s the list
    slack.  ``fb_alphabet_override`` swaps in an explicit alphabet size (used
    to build deliberately weak codes for converse experiments).
    """
    if int(q) != q or q < 2:
        raise ConfigError(f"q must be an integer >= 2, got {q!r}")
    if n < 1:
        raise ConfigError(f"blocklength must be positive, got {n}")
    if not 0.0 < rate <= 1.0:
        raise ConfigError(f"rate must lie in (0, 1], got {rate}")
    if not 0.0 < list_slack < 1.0:
        raise ConfigError(f"list slack must lie in (0, 1), got {list_slack}")
    if not 0.0 < block_frac < list_slack:
        raise ConfigError(
            f"block fraction must lie in (0, list_slack={list_slack}), got {block_frac}"
        )
    if rate_slack < 0.0:
        raise ConfigError(f"rate slack must be nonnegative, got {rate_slack}")

    block_len = _near_int(block_frac * n, "block_frac * n")
    rounds = _near_int(1.0 / block_frac - 1.0, "1/block_frac - 1")
    num_messages = int(math.floor(float(q) ** (rate * n) + 1e-9))
    if num_messages < 2:
        raise ConfigError(f"rate {rate} yields fewer than 2 messages at n={n}")

    list_cap = math.ceil((2.0 + math.log(2.0, q)) / list_slack - 1.0)
    sep = (q - 1) * (1.0 - list_slack) * (1.0 + list_slack) / q
    bound = rate * list_cap / (block_frac**2 * (1.0 - float(entropy(q, sep))))
    fb_alphabet = int(math.floor(bound)) + 1
    if fb_alphabet_override is not None:
        if fb_alphabet_override < 1:
            raise ConfigError("feedback alphabet override must be >= 1")
        fb_alphabet = int(fb_alphabet_override)
    fb_bits = rounds * math.ceil(math.log2(fb_alphabet)) if fb_alphabet > 1 else 0
    times = tuple(k * block_len for k in range(1, rounds + 1))
    return SchemeParams(
        q=int(q),
        n=int(n),
        rate=float(rate),
        block_frac=float(block_frac),
        list_slack=float(list_slack),
        rate_slack=float(rate_slack),
        rounds=rounds,
        block_len=block_len,
        list_cap=list_cap,
        fb_alphabet_size=fb_alphabet,
        fb_bits=fb_bits,
        num_messages=num_messages,
        feedback_times=times,
    )


def feedback_distance_threshold(params: SchemeParams) -> float:
    """Pairwise sub-codeword separation a feedback symbol must certify:
    block_len * (q-1)(1-s)(1+s)/q."""
    q, s = params.q, params.list_slack
    return params.block_len * (q - 1) * (1.0 - s) * (1.0 + s) / q


class FeedbackCode:
    """Sub-codeword table, generated lazily from a seed or imported verbatim."""

    def __init__(self, params: SchemeParams, seed: int, entries=None):
        self.params = params
        self.seed = int(seed)
        self._entries = entries  # {(k, m, fb): np.ndarray} when imported
        self._blocks: dict[tuple[int, int], np.ndarray] = {}
        self._fb_choice: dict[tuple[int, tuple[int, ...]], int | None] = {}

    # -- indexing ---------------------------------------------------------

    def _canonical_fb(self, k: int, fb: int) -> int:
        if not 1 <= k <= self.params.rounds + 1:
            raise IndexError(f"block index {k} outside [1, {self.params.rounds + 1}]")
        if not 0 <= fb < self.params.fb_alphabet_size:
            raise IndexError(f"feedback symbol {fb} outside alphabet")
        return 0 if k == 1 else int(fb)

    def block(self, k: int, fb: int) -> np.ndarray:
        """All messages' k-th sub-codewords under feedback ``fb``, one row per
        message (num_messages x block_len)."""
        key = (k, self._canonical_fb(k, fb))
        got = self._blocks.get(key)
        if got is not None:
            return got
        p = self.params
        if self._entries is not None:
            rows = [self._entries[(key[0], m, key[1])] for m in range(p.num_messages)]
            arr = np.vstack(rows).astype(np.uint16)
        else:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=key)
            )
            arr = rng.integers(0, p.q, size=(p.num_messages, p.block_len), dtype=np.uint16)
        arr.setflags(write=False)
        self._blocks[key] = arr
        return arr

    def sub_codeword(self, k: int, m: int, fb: int) -> Word:
        p = self.params
        if not 0 <= m < p.num_messages:
            raise IndexError(f"message {m} outside [0, {p.num_messages})")
        return Word(self.block(k, fb)[m], p.q)

    def codeword(self, m: int, fb_seq) -> Word:
        """Concatenation of the T+1 sub-codewords along feedback ``fb_seq``."""
        p = self.params
        fb_seq = tuple(int(z) for z in fb_seq)
        if len(fb_seq) != p.rounds:
            raise IndexError(f"need {p.rounds} feedback symbols, got {len(fb_seq)}")
        parts = [self.block(1, 0)[m]]
        parts += [self.block(k, fb_seq[k - 2])[m] for k in range(2, p.rounds + 2)]
        return Word(np.ascontiguousarray(np.concatenate(parts)), p.q)

    def table_size(self) -> int:
        """Size of the conceptual (block, message, feedback) index grid; the
        block-1 slice shares a single feedback column."""
        p = self.params
        return (p.rounds + 1) * p.num_messages * p.fb_alphabet_size

    # -- prefix distances --------------------------------------------------

    def prefix_distances(self, k: int, fb_seq, y_values, y_erased) -> np.ndarray:
        """Erasure-skipping distance from every message's length-k*block_len
        codeword prefix (along ``fb_seq``) to the received prefix."""
        p = self.params
        bl = p.block_len
        fb_seq = tuple(int(z) for z in fb_seq)
        if len(fb_seq) < k - 1:
            raise IndexError(f"need {k - 1} feedback symbols for a k={k} prefix")
        total = np.zeros(p.num_messages, dtype=np.int64)
        for j in range(1, k + 1):
            blk = self.block(j, 0 if j == 1 else fb_seq[j - 2])
            sl = slice((j - 1) * bl, j * bl)
            live = ~y_erased[sl]
            if live.any():
                total += ((blk != y_values[sl]) & live).sum(axis=1)
        return total

    # -- feedback selection --------------------------------------------------

    def find_feedback_symbol(self, k: int, super_list) -> int | None:
        """Smallest feedback symbol whose block-(k+1) sub-codewords separate
        every pair of the super list beyond the distance threshold; None when
        no symbol qualifies."""
        p = self.params
        if not 1 <= k <= p.rounds:
            raise IndexError(f"feedback round {k} outside [1, {p.rounds}]")
        members = tuple(sorted(int(m) for m in super_list))
        if len(members) <= 1:
            return 0
        key = (k, members)
        if key in self._fb_choice:
            return self._fb_choice[key]
        threshold = feedback_distance_threshold(p)
        choice: int | None = None
        for fb in range(p.fb_alphabet_size):
            blk = self.block(k + 1, fb)
            rows = blk[list(members)]
            ok = True
            for i, j in combinations(range(len(members)), 2):
                if int(np.count_nonzero(rows[i] != rows[j])) <= threshold:
                    ok = False
                    break
            if ok:
                choice = fb
                break
        self._fb_choice[key] = choice
        return choice


def sample_code(params: SchemeParams, seed: int) -> FeedbackCode:
    """Draw the uniform random code determined by ``seed``."""
    return FeedbackCode(params, seed)


def find_feedback_symbol(code: FeedbackCode, k: int, super_list) -> int | None:
    return code.find_feedback_symbol(k, super_list)


# -- list-decodability verification ---------------------------------------


@dataclass
class ListDecodabilityReport:
    passed: bool
    vacuous: bool
    cells_checked: int
    prefixes_checked: int
    sampled_cells: list
    violations: list


def verify_list_decodability(
    code: FeedbackCode,
    max_erasures: int,
    max_check: int = 200_000,
    seed: int = 0,
) -> ListDecodabilityReport:
    """Check that every received prefix list-decodes to at most ``list_cap``
    messages at the reference radius.

    For each feedback time t and erasure count up to ``max_erasures`` with
    enough unerased symbols, enumerates all received prefixes when the count
    fits in ``max_check`` and otherwise samples that many at random (the cell
    is then flagged).  Feedback along each prefix is produced by the real
    feedback machinery.  Vacuously true codes (message count at most the
    list cap) are reported as such without enumeration.
    """
    from .protocol import BobDecoder  # local import: protocol builds on code

    p = code.params
    if p.num_messages <= p.list_cap:
        return ListDecodabilityReport(True, True, 0, 0, [], [])

    rng = np.random.default_rng(seed)
    threshold = p.prefix_threshold()
    violations: list = []
    sampled: list = []
    cells = prefixes = 0
    trace_memo: dict = {}

    def feedback_trace(k_idx, y_vals, y_mask):
        # the feedback sent before checkpoint k_idx is a function of the
        # received prefix up to the previous feedback time
        if k_idx == 1:
            return ()
        t_prev = p.feedback_times[k_idx - 2]
        key = (k_idx, y_vals[:t_prev].tobytes(), y_mask[:t_prev].tobytes())
        got = trace_memo.get(key)
        if got is None:
            bob = BobDecoder(code)
            for j in range(1, k_idx):
                tj = p.feedback_times[j - 1]
                if bob.feedback_at(j, y_vals[:tj], y_mask[:tj]) is None:
                    break  # a real session would halt here; pad with the null symbol
            got = (tuple(bob.sent_feedback) + (0,) * (k_idx - 1))[: k_idx - 1]
            trace_memo[key] = got
        return got

    for k_idx, t in enumerate(p.feedback_times, start=1):
        for lam in range(max_erasures + 1):
            if lam > t or t - lam <= threshold:
                continue
            cells += 1
            total = math.comb(t, lam) * p.q ** (t - lam)
            exhaustive = total <= max_check
            if not exhaustive:
                sampled.append((t, lam))
            radius = (t - lam) * float(
                entropy_inverse(p.q, 1.0 - threshold / (t - lam))
            )
            for y_vals, y_mask in _prefix_stream(
                p.q, t, lam, max_check, exhaustive, rng
            ):
                prefixes += 1
                fb = feedback_trace(k_idx, y_vals, y_mask)
                dists = code.prefix_distances(k_idx, fb, y_vals, y_mask)
                size = int(np.count_nonzero(dists <= radius))
                if size > p.list_cap:
                    violations.append(
                        {
                            "t": t,
                            "erasures": lam,
                            "list_size": size,
                            "prefix_values": y_vals.tolist(),
                            "prefix_erased": y_mask.tolist(),
                        }
                    )
    return ListDecodabilityReport(
        not violations, False, cells, prefixes, sampled, violations
    )


def _prefix_stream(q, t, lam, max_check, exhaustive, rng):
    """Yield (values, erased) received prefixes of length t with lam erasures."""
    if exhaustive:
        for positions in combinations(range(t), lam):
            mask = np.zeros(t, dtype=bool)
            mask[list(positions)] = True
            live = t - lam
            for syms in product(range(q), repeat=live):
                vals = np.zeros(t, dtype=np.uint16)
                vals[~mask] = syms
                yield vals, mask
    else:
        for _ in range(max_check):
            mask = np.zeros(t, dtype=bool)
            mask[rng.choice(t, size=lam, replace=False)] = True
            vals = rng.integers(0, q, size=t, dtype=np.uint16)
            vals[mask] = 0
            yield vals, mask


# -- export / import --------------------------------------------------------


def export_code(code: FeedbackCode) -> str:
    """Serialize the full table as JSON (feasible for small instances only)."""
    p = code.params
    entries = []
    for m in range(p.num_messages):
        entries.append([1, m, 0, ",".join(map(str, code.block(1, 0)[m].tolist()))])
    for k in range(2, p.rounds + 2):
        for fb in range(p.fb_alphabet_size):
            blk = code.block(k, fb)
            for m in range(p.num_messages):
                entries.append([k, m, fb, ",".join(map(str, blk[m].tolist()))])
    doc = {
        "q": p.q,
        "n": p.n,
        "theta": p.block_frac,
        "z_size": p.fb_alphabet_size,
        "seed": code.seed,
        "rate": p.rate,
        "list_slack": p.list_slack,
        "rate_slack": p.rate_slack,
        "entries": entries,
    }
    return json.dumps(doc)


def import_code(text: str) -> FeedbackCode:
    """Rebuild a code from ``export_code`` output; behavior is reproduced from
    the stored entries, not re-sampled."""
    doc = json.loads(text)
    params = derive_params(
        q=doc["q"],
        n=doc["n"],
        rate=doc["rate"],
        block_frac=doc["theta"],
        list_slack=doc["list_slack"],
        rate_slack=doc["rate_slack"],
        fb_alphabet_override=doc["z_size"],
    )
    entries = {}
    for k, m, fb, text_syms in doc["entries"]:
        row = np.array([int(s) for s in text_syms.split(",")], dtype=np.uint16)
        if row.size != params.block_len or (row.size and int(row.max()) >= params.q):
            raise ConfigError(f"malformed entry for block {k}, message {m}")
        entries[(int(k), int(m), int(fb))] = row
    for k in range(1, params.rounds + 2):
        fbs = [0] if k == 1 else range(params.fb_alphabet_size)
        for fb in fbs:
            for m in range(params.num_messages):
                if (k, m, fb) not in entries:
                    raise ConfigError(f"table not total: missing ({k}, {m}, {fb})")
    return FeedbackCode(params, int(doc["seed"]), entries=entries)
