"""The achievability protocol: adaptive encoder, feedback function, and
list-refinement decoder, orchestrated as a single session.

The receiver never sees the adversary's error count.  It instead tracks a
reference error fraction derived from the rate (``reference_trajectory``),
list-decodes prefixes at that radius at every feedback time, and steers the
encoder with feedback symbols that keep the next sub-codewords of every
still-plausible message pair far apart.  After all n symbols arrive it scans
for the first checkpoint where some listed message is close enough to the
received suffix, and decodes if exactly one is.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import (
    Action,
    AdversaryBudget,
    BudgetError,
    KEEP,
    ReceivedWord,
    TrajectoryPoint,
    Word,
    measure_trajectory,
    parse_received,
    parse_word,
    received_to_text,
    word_to_text,
)
from .capacity import ChannelParams
from .code import ConfigError, FeedbackCode, SchemeParams
from .qent import entropy_inverse

__all__ = [
    "ErrorEvent",
    "SessionResult",
    "Adversary",
    "BobDecoder",
    "reference_trajectory",
    "compute_t_min",
    "list_decode_prefix",
    "decoding_threshold",
    "run_session",
    "transcript_to_json",
    "load_transcript",
]


class ErrorEvent(enum.Enum):
    """Declared decoding failures, in protocol order."""

    FEEDBACK_UNAVAILABLE = "feedback_unavailable"  # no separating feedback symbol
    NO_DECODING_POINT = "no_decoding_point"  # suffix never close to any candidate
    AMBIGUOUS_DECODING = "ambiguous_decoding"  # two candidates both qualify


@lru_cache(maxsize=1 << 16)
def reference_trajectory(params: SchemeParams, t: int, erased: int) -> float:
    """Reference error fraction at time ``t`` with ``erased`` erasures so far.

    Zero until the unerased count clears n*(rate + list_slack); afterwards the
    unique x with (t - erased)*(1 - H_q(x)) equal to that threshold.
    """
    threshold = params.prefix_threshold()
    live = t - erased
    if live <= threshold:
        return 0.0
    return float(entropy_inverse(params.q, 1.0 - threshold / live))


def compute_t_min(params: SchemeParams, erasure_counts) -> int | None:
    """First feedback time whose unerased count exceeds the engagement
    threshold; None when none qualifies.  ``erasure_counts`` maps each
    feedback time to the erasures seen by then."""
    threshold = params.prefix_threshold()
    for t in params.feedback_times:
        if t - erasure_counts[t] > threshold:
            return t
    return None


def list_decode_prefix(code: FeedbackCode, y_prefix: ReceivedWord, k: int, fb_so_far):
    """Messages whose length-(k*block_len) codeword prefix along ``fb_so_far``
    lies within the reference radius of the received prefix.

    Returns (members, radius); members is a sorted tuple.  The radius is the
    real number (t - erasures) * reference fraction, compared with <= against
    integer distances.
    """
    p = code.params
    t = k * p.block_len
    if len(y_prefix) != t:
        raise ValueError(f"prefix length {len(y_prefix)} != {t}")
    lam = y_prefix.erasure_count()
    if t - lam <= p.prefix_threshold():
        raise ValueError("list decoding invoked before enough unerased symbols")
    radius = (t - lam) * reference_trajectory(p, t, lam)
    dists = code.prefix_distances(k, tuple(fb_so_far), y_prefix.values, y_prefix.erased)
    members = tuple(int(m) for m in np.nonzero(dists <= radius)[0])
    return members, radius


def decoding_threshold(
    params: SchemeParams, channel: ChannelParams, t_star: int, erased: int
) -> float:
    """Suffix-distance bound a candidate must meet at checkpoint ``t_star``:
    (q-1)(1-s)(1+s)(n-t*)/(2q) - (n*r - erasures)/2."""
    q, s, n = params.q, params.list_slack, params.n
    return (q - 1) * (1.0 - s) * (1.0 + s) * (n - t_star) / (2.0 * q) - (
        n * channel.r - erased
    ) / 2.0


class BobDecoder:
    """Receiver state across one session: erasure counts, per-checkpoint
    lists, the growing super list, and the feedback already sent."""

    def __init__(self, code: FeedbackCode, channel: ChannelParams | None = None):
        self.code = code
        self.channel = channel
        p = code.params
        self.t_min: int | None = None
        self.k_min: int | None = None
        self.erasures_at: dict[int, int] = {}
        self.reference_at: dict[int, float] = {}
        self.lists: dict[int, tuple[int, ...]] = {}
        self.super_list: set[int] = set()
        self.sent_feedback: list[int] = []
        self.error_event: ErrorEvent | None = None
        self.list_violation = False
        self._acc = np.zeros(p.num_messages, dtype=np.int64)

    def feedback_at(self, k: int, y_values, y_erased) -> int | None:
        """Process the k-th checkpoint and return the feedback symbol, or None
        after recording a feedback-unavailable event."""
        p = self.code.params
        t = p.feedback_times[k - 1]
        if len(y_values) != t:
            raise ValueError(f"checkpoint {k} expects a prefix of length {t}")
        lam = int(np.count_nonzero(y_erased))
        self.erasures_at[t] = lam

        # accumulate this block's contribution to every message's prefix distance
        bl = p.block_len
        fb_prev = 0 if k == 1 else self.sent_feedback[k - 2]
        blk = self.code.block(k, fb_prev)
        sl = slice((k - 1) * bl, k * bl)
        live = ~np.asarray(y_erased[sl])
        if live.any():
            self._acc += ((blk != y_values[sl]) & live).sum(axis=1)

        if self.t_min is None and t - lam > p.prefix_threshold():
            self.t_min, self.k_min = t, k
        if self.t_min is None:
            self.reference_at[t] = 0.0
            self.sent_feedback.append(0)
            return 0

        ref = reference_trajectory(p, t, lam)
        self.reference_at[t] = ref
        radius = (t - lam) * ref
        members = tuple(int(m) for m in np.nonzero(self._acc <= radius)[0])
        self.lists[k] = members
        if len(members) > p.list_cap:
            self.list_violation = True
        self.super_list.update(members)

        fb = self.code.find_feedback_symbol(k, self.super_list)
        if fb is None:
            self.error_event = ErrorEvent.FEEDBACK_UNAVAILABLE
            return None
        self.sent_feedback.append(fb)
        return fb

    def _suffix_distances(self, k_star: int, members, y_values, y_erased):
        p = self.code.params
        bl = p.block_len
        rows = list(members)
        total = np.zeros(len(rows), dtype=np.int64)
        for j in range(k_star + 1, p.rounds + 2):
            blk = self.code.block(j, self.sent_feedback[j - 2])[rows]
            sl = slice((j - 1) * bl, j * bl)
            live = ~np.asarray(y_erased[sl])
            if live.any():
                total += ((blk != y_values[sl]) & live).sum(axis=1)
        return total

    def decode(self, y_values, y_erased):
        """Scan checkpoints from the first engaged one; at the first where a
        listed message meets the suffix bound, decode it if it is unique.

        Returns (decoded, error_event, t_star, qualifiers).
        """
        if self.channel is None:
            raise ValueError("decoding requires channel parameters")
        p = self.code.params
        if self.t_min is None or self.k_min is None:
            return None, ErrorEvent.NO_DECODING_POINT, None, ()
        for k_star in range(self.k_min, p.rounds + 1):
            t_star = p.feedback_times[k_star - 1]
            members = self.lists.get(k_star, ())
            if not members:
                continue
            bound = decoding_threshold(p, self.channel, t_star, self.erasures_at[t_star])
            dists = self._suffix_distances(k_star, members, y_values, y_erased)
            quals = tuple(m for m, d in zip(members, dists) if d <= bound)
            if len(quals) == 1:
                return quals[0], None, t_star, quals
            if len(quals) >= 2:
                return None, ErrorEvent.AMBIGUOUS_DECODING, t_star, quals
        return None, ErrorEvent.NO_DECODING_POINT, None, ()


class Adversary:
    """Base strategy: sees everything up front, acts causally per position.

    Budgets are enforced by the session regardless of what a strategy does.
    """

    def begin(self, code, channel, message, budget, seed):
        pass

    def act(self, i, x_i, session) -> Action:
        return KEEP

    def act_block(self, k, lo, hi, x_values, session):
        return [self.act(i, int(x_values[i]), session) for i in range(lo, hi)]


@dataclass
class SessionView:
    """What a causal adversary can see mid-session."""

    y_values: np.ndarray
    y_erased: np.ndarray
    feedback: list
    budget: AdversaryBudget
    upto: int


@dataclass(frozen=True)
class SessionResult:
    """Full record of one protocol session."""

    message: int
    seed: int | None
    decoded: int | None
    error_event: ErrorEvent | None
    list_violation: bool
    t_min: int | None
    t_star: int | None
    t_star_star: int | None
    checkpoints: tuple[TrajectoryPoint, ...]
    lists: dict
    feedback: tuple[int, ...]
    x: Word
    y: ReceivedWord
    actions: tuple[Action, ...]
    halted_at: int | None
    errors_used: int
    erasures_used: int

    @property
    def success(self) -> bool:
        return self.error_event is None and self.decoded == self.message


def run_session(
    code: FeedbackCode,
    channel: ChannelParams,
    message: int,
    adversary: Adversary,
    seed: int | None = None,
) -> SessionResult:
    """Simulate one transmission of ``message`` against ``adversary``.

    Feedback is injected at every feedback time; the adversary acts on each
    position as it is transmitted and is stopped (BudgetError) if it tries to
    exceed its budgets.
    """
    p = code.params
    if channel.q != p.q:
        raise ConfigError(f"channel alphabet {channel.q} != code alphabet {p.q}")
    if not 0 <= message < p.num_messages:
        raise ConfigError(f"message {message} outside [0, {p.num_messages})")
    n, bl = p.n, p.block_len
    budget = AdversaryBudget.from_fractions(n, channel.p, channel.r)
    adversary.begin(code, channel, message, budget, seed)

    x_vals = np.zeros(n, dtype=np.uint16)
    y_vals = np.zeros(n, dtype=np.uint16)
    y_mask = np.zeros(n, dtype=bool)
    actions: list[Action] = []
    bob = BobDecoder(code, channel)
    view = SessionView(y_vals, y_mask, bob.sent_feedback, budget, 0)
    halted_at: int | None = None

    for k in range(1, p.rounds + 2):
        fb_prev = 0 if k == 1 else bob.sent_feedback[k - 2]
        lo, hi = (k - 1) * bl, k * bl
        x_vals[lo:hi] = code.block(k, fb_prev)[message]
        for i, act in zip(range(lo, hi), adversary.act_block(k, lo, hi, x_vals, view)):
            xi = int(x_vals[i])
            if act.kind == "keep":
                y_vals[i] = xi
            elif act.kind == "erase":
                budget.charge_erasure()
                y_mask[i] = True
            elif act.kind == "sub":
                if act.symbol is None or not 0 <= act.symbol < p.q:
                    raise ValueError(f"substitute symbol {act.symbol!r} outside alphabet")
                if act.symbol == xi:
                    raise ValueError(f"substitution at {i} equals the transmitted symbol")
                budget.charge_error()
                y_vals[i] = act.symbol
            else:
                raise ValueError(f"unknown action kind {act.kind!r}")
            actions.append(act)
            view.upto = i + 1
        if k <= p.rounds:
            fb = bob.feedback_at(k, y_vals[:hi], y_mask[:hi])
            if fb is None:
                halted_at = hi
                break

    x = Word(x_vals, p.q)
    y = ReceivedWord.make(y_vals, y_mask, p.q)
    if halted_at is not None:
        decoded, event, t_star = None, bob.error_event, None
    else:
        decoded, event, t_star, _ = bob.decode(y_vals, y_mask)

    checkpoints = []
    sent_upto = halted_at if halted_at is not None else n
    for k, t in enumerate(p.feedback_times, start=1):
        if t > sent_upto:
            break
        tp = measure_trajectory(x, y, t)
        ref = bob.reference_at.get(t, reference_trajectory(p, t, tp.erased))
        size = len(bob.lists[k]) if k in bob.lists else None
        checkpoints.append(
            TrajectoryPoint(t, tp.erased, tp.errors, tp.error_fraction, ref, size)
        )

    t_ss = None
    if halted_at is None and bob.t_min is not None:
        for tp in checkpoints:
            if tp.t >= bob.t_min and tp.error_fraction <= tp.reference:
                t_ss = tp.t
                break

    return SessionResult(
        message=message,
        seed=seed,
        decoded=decoded,
        error_event=event,
        list_violation=bob.list_violation,
        t_min=bob.t_min,
        t_star=t_star,
        t_star_star=t_ss,
        checkpoints=tuple(checkpoints),
        lists=dict(bob.lists),
        feedback=tuple(bob.sent_feedback),
        x=x,
        y=y,
        actions=tuple(actions),
        halted_at=halted_at,
        errors_used=budget.used_errors,
        erasures_used=budget.used_erasures,
    )


def transcript_to_json(result: SessionResult, channel: ChannelParams) -> str:
    doc = {
        "q": channel.q,
        "p": channel.p,
        "r": channel.r,
        "message": result.message,
        "seed": result.seed,
        "decoded": result.decoded,
        "error_event": result.error_event.value if result.error_event else None,
        "list_violation": result.list_violation,
        "t_min": result.t_min,
        "t_star": result.t_star,
        "t_star_star": result.t_star_star,
        "feedback": list(result.feedback),
        "actions": [a.short() for a in result.actions],
        "x": word_to_text(result.x),
        "y": received_to_text(result.y),
        "checkpoints": [
            {
                "t": tp.t,
                "erased": tp.erased,
                "errors": tp.errors,
                "error_fraction": tp.error_fraction,
                "reference": tp.reference,
                "list_size": tp.list_size,
            }
            for tp in result.checkpoints
        ],
        "lists": {str(k): list(v) for k, v in result.lists.items()},
        "halted_at": result.halted_at,
        "errors_used": result.errors_used,
        "erasures_used": result.erasures_used,
    }
    return json.dumps(doc)


def load_transcript(text: str, revalidate: bool = True) -> dict:
    """Parse a session transcript; optionally recount errors and erasures from
    (x, y) and check them against the recorded budgets."""
    doc = json.loads(text)
    if revalidate:
        q, n = doc["q"], len(doc["x"].split(","))
        x = parse_word(doc["x"], q)
        y = parse_received(doc["y"], q)
        upto = doc["halted_at"] if doc["halted_at"] is not None else n
        tp = measure_trajectory(x, y, upto)
        max_err = int(math.floor(doc["p"] * n + 1e-9))
        max_era = int(math.floor(doc["r"] * n + 1e-9))
        if tp.errors > max_err or tp.erased > max_era:
            raise BudgetError(
                f"transcript exceeds budgets: {tp.errors} errors (max {max_err}), "
                f"{tp.erased} erasures (max {max_era})"
            )
        if tp.errors != doc["errors_used"] or tp.erased != doc["erasures_used"]:
            raise ValueError("recorded budget use disagrees with recount from (x, y)")
    return doc
