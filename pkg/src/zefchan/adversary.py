"""Adversary strategies: parametric trajectory shapes, exhaustive worst-case
search over action plans, and the two-phase babble-and-push attack that
manufactures confusable message pairs above capacity.

The attack, in outline: commit a fraction of the error budget to random
substitutions over an initial window (babble), collect every message whose
codeword prefix sits at exactly that distance from the received prefix,
keep only pairs whose remaining sub-codewords stay close under every
feedback continuation, then spend erasures and balanced substitutions to
drive the received suffix equidistant from both codewords (push).  A
successful attack yields one received word consistent with two messages
under one admissible action sequence, which no decoder can resolve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .capacity import ChannelParams, capacity_o1
from .channel import (
    Action,
    ERASE,
    KEEP,
    ReceivedWord,
    Word,
    distance,
    measure_trajectory,
    received_to_text,
    substitute,
    word_to_text,
)
from .code import ConfigError, FeedbackCode, SchemeParams
from .protocol import (
    Adversary,
    BobDecoder,
    ErrorEvent,
    SessionResult,
    run_session,
)

__all__ = [
    "IdentityAdversary",
    "RandomAdversary",
    "LowTypeAdversary",
    "HighTypeAdversary",
    "GreedyPushAdversary",
    "PlannedAdversary",
    "ScriptedAdversary",
    "STRATEGIES",
    "make_strategy",
    "AttackTranscript",
    "babble",
    "build_candidate_set",
    "delta_thresholds",
    "build_scm",
    "push",
    "babble_and_push",
    "attack_transcript_to_json",
    "WorstCaseResult",
    "count_action_plans",
    "exhaustive_worst_case",
]


# -- named strategies --------------------------------------------------------


class IdentityAdversary(Adversary):
    """Touches nothing."""


class PlannedAdversary(Adversary):
    """Executes a fixed plan: {position: action}."""

    def __init__(self, plan: dict[int, Action]):
        self.plan = plan

    def act_block(self, k, lo, hi, x_values, session):
        return [self.plan.get(i, KEEP) for i in range(lo, hi)]


class ScriptedAdversary(Adversary):
    """Forces the received word to equal a fixed target."""

    def __init__(self, target: ReceivedWord):
        self.target = target

    def act(self, i, x_i, session):
        if self.target.erased[i]:
            return ERASE
        ti = int(self.target.values[i])
        return KEEP if ti == x_i else substitute(ti)


class RandomAdversary(Adversary):
    """Spends both budgets at uniformly random positions with uniformly random
    substitute symbols."""

    def begin(self, code, channel, message, budget, seed):
        n, q = code.params.n, code.params.q
        rng = np.random.default_rng(seed)
        picks = rng.choice(n, size=min(n, budget.max_errors + budget.max_erasures), replace=False)
        self.erase_at = set(int(i) for i in picks[: budget.max_erasures])
        self.offset_at = {
            int(i): int(rng.integers(1, q)) for i in picks[budget.max_erasures :]
        }
        self.q = q

    def act(self, i, x_i, session):
        if i in self.erase_at:
            return ERASE
        if i in self.offset_at:
            return substitute((x_i + self.offset_at[i]) % self.q)
        return KEEP


class LowTypeAdversary(Adversary):
    """Stays under the reference trajectory: erasures up front, all symbol
    errors packed into the final block."""

    def begin(self, code, channel, message, budget, seed):
        p = code.params
        rng = np.random.default_rng(seed)
        self.erase_at = set(range(budget.max_erasures))
        tail = range(p.n - p.block_len, p.n)
        picks = rng.choice(list(tail), size=min(budget.max_errors, p.block_len), replace=False)
        self.offset_at = {int(i): int(rng.integers(1, p.q)) for i in picks}
        self.q = p.q

    def act(self, i, x_i, session):
        if i in self.erase_at:
            return ERASE
        if i in self.offset_at:
            return substitute((x_i + self.offset_at[i]) % self.q)
        return KEEP


class HighTypeAdversary(Adversary):
    """Starts above the reference trajectory: the whole error budget lands in
    the first block, erasures at the end."""

    def begin(self, code, channel, message, budget, seed):
        p = code.params
        rng = np.random.default_rng(seed)
        picks = rng.choice(p.block_len, size=min(budget.max_errors, p.block_len), replace=False)
        self.offset_at = {int(i): int(rng.integers(1, p.q)) for i in picks}
        self.erase_at = set(range(p.n - budget.max_erasures, p.n))
        self.q = p.q

    def act(self, i, x_i, session):
        if i in self.offset_at:
            return substitute((x_i + self.offset_at[i]) % self.q)
        if i in self.erase_at:
            return ERASE
        return KEEP


class GreedyPushAdversary(Adversary):
    """Heuristic confusion attempt: picks the message whose all-zero-feedback
    codeword is nearest the true one, then causally pushes the received word
    toward it (substitutions first, then erasures on leftover disagreements)."""

    def begin(self, code, channel, message, budget, seed):
        p = code.params
        zeros = (0,) * p.rounds
        own = code.codeword(message, zeros).symbols
        best, best_d = None, None
        for m in range(p.num_messages):
            if m == message:
                continue
            d = int(np.count_nonzero(code.codeword(m, zeros).symbols != own))
            if best_d is None or d < best_d:
                best, best_d = m, d
        self.code = code
        self.target_message = best
        self.errors_left = budget.max_errors
        self.erasures_left = budget.max_erasures

    def act(self, i, x_i, session):
        p = self.code.params
        k = i // p.block_len + 1
        fb_prev = 0 if k == 1 else session.feedback[k - 2]
        ti = int(self.code.block(k, fb_prev)[self.target_message][i % p.block_len])
        if ti == x_i:
            return KEEP
        if self.errors_left > 0:
            self.errors_left -= 1
            return substitute(ti)
        if self.erasures_left > 0:
            self.erasures_left -= 1
            return ERASE
        return KEEP


STRATEGIES = {
    "identity": IdentityAdversary,
    "random": RandomAdversary,
    "low_type": LowTypeAdversary,
    "high_type": HighTypeAdversary,
    "greedy_push": GreedyPushAdversary,
}


def make_strategy(name: str) -> Adversary:
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}")
    return STRATEGIES[name]()


# -- babble-and-push ---------------------------------------------------------


@dataclass
class AttackTranscript:
    """Everything the attack computed, successful or not."""

    message: int
    seed: int
    babble_fraction: float
    babble_len_raw: float
    babble_len: int
    babble_rounds: int
    babble_positions: tuple[int, ...]
    babble_received: ReceivedWord
    babble_feedback: tuple[int, ...]
    candidates: tuple[int, ...]
    block_thresholds: dict
    aggregate_threshold: float
    confusable_pairs: tuple
    chosen_pair: tuple | None
    pair_contains_message: bool
    forged_output: ReceivedWord | None
    push_failure: str | None
    replay_outputs: tuple | None
    replay_identical: bool
    budgets_ok: bool
    success: bool


def _snap_babble_len(params: SchemeParams, raw: float) -> tuple[int, int]:
    """Snap the babble window down to a feedback time so the push starts on a
    block boundary; returns (length, feedback rounds inside it)."""
    if raw >= params.n:
        raise ConfigError(f"babble window {raw:.3f} exceeds blocklength {params.n}")
    times = [t for t in params.feedback_times if t <= raw]
    if not times:
        raise ConfigError(
            f"babble window {raw:.3f} shorter than the first feedback block"
        )
    b = times[-1]
    return b, b // params.block_len


def babble(
    code: FeedbackCode,
    channel: ChannelParams,
    message: int,
    seed: int,
    babble_fraction: float | None = None,
    babble_len: int | None = None,
):
    """Run the babble phase: random substitutions at floor(fraction*n) indices
    inside the babble window, faithful feedback in between.

    Returns (received prefix, dict fragment).  The fraction defaults to the
    capacity minimizer and the window to (effective_fraction + rate_slack/2)*n
    snapped down to a feedback time.
    """
    p = code.params
    rng = np.random.default_rng(seed)
    cap = capacity_o1(channel)
    rate_gap = p.rate - cap.value
    if babble_fraction is None:
        if cap.argmin is None:
            raise ConfigError("attack needs positive capacity to pick its fraction")
        babble_fraction = cap.argmin
    if babble_len is None:
        from .capacity import effective_fraction

        raw = (effective_fraction(channel, babble_fraction) + rate_gap / 2.0) * p.n
    else:
        raw = float(babble_len)
    b, rounds_b = _snap_babble_len(p, raw)

    n_err = int(math.floor(babble_fraction * p.n + 1e-9))
    positions = tuple(sorted(int(i) for i in rng.choice(b, size=n_err, replace=False)))
    bl = p.block_len
    y_vals = np.zeros(b, dtype=np.uint16)
    y_mask = np.zeros(b, dtype=bool)
    bob = BobDecoder(code, channel)
    for k in range(1, rounds_b + 1):
        fb_prev = 0 if k == 1 else bob.sent_feedback[k - 2]
        lo, hi = (k - 1) * bl, k * bl
        block = code.block(k, fb_prev)[message]
        y_vals[lo:hi] = block
        for i in positions:
            if lo <= i < hi:
                # uniform over the q-1 symbols other than the transmitted one
                y_vals[i] = (int(block[i - lo]) + int(rng.integers(1, p.q))) % p.q
        if bob.feedback_at(k, y_vals[:hi], y_mask[:hi]) is None:
            break
    y_b = ReceivedWord.make(y_vals, y_mask, p.q)
    fragment = {
        "babble_fraction": float(babble_fraction),
        "babble_len_raw": float(raw),
        "babble_len": b,
        "babble_rounds": rounds_b,
        "babble_positions": positions,
        "babble_feedback": tuple(bob.sent_feedback),
        "rate_gap": rate_gap,
    }
    return y_b, fragment


def build_candidate_set(
    code: FeedbackCode, y_b: ReceivedWord, fb_so_far, babble_fraction: float
):
    """Messages whose babble-window prefix sits at exactly floor(fraction*n)
    distance from the received prefix (distance equality, not <=)."""
    p = code.params
    k_b = len(y_b) // p.block_len
    target = int(math.floor(babble_fraction * p.n + 1e-9))
    dists = code.prefix_distances(k_b, tuple(fb_so_far), y_b.values, y_b.erased)
    return tuple(int(m) for m in np.nonzero(dists == target)[0])


def delta_thresholds(
    params: SchemeParams,
    channel: ChannelParams,
    babble_fraction: float,
    babble_len: int,
    rate_gap: float,
):
    """Per-block closeness thresholds for the strongly-confusable pair search,
    plus the aggregate bound their sum stays under.

    A block of share beta of the push window gets
    2(p - fraction)*beta*n + r*beta*n - gap*beta*n/8, unless its share is
    below gap/(16T), in which case the constraint is vacuous (the block
    length itself).
    """
    n, bigT = params.n, params.rounds
    rest = n - babble_len
    k_first = babble_len // params.block_len + 1
    out = {}
    for k in range(k_first, bigT + 2):
        beta = params.block_len / rest
        if beta >= rate_gap / (16.0 * bigT):
            out[k] = (
                2.0 * (channel.p - babble_fraction) * beta * n
                + channel.r * beta * n
                - rate_gap * beta * n / 8.0
            )
        else:
            out[k] = rest * beta
    aggregate = 2.0 * (channel.p - babble_fraction) * n + channel.r * n - n * rate_gap / 16.0
    return out, aggregate


def build_scm(code: FeedbackCode, candidates, fb_so_far, thresholds: dict):
    """All unordered candidate pairs whose remaining sub-codewords stay within
    the per-block thresholds for every feedback continuation.

    The first unsent block is pinned to the feedback symbol already sent; all
    later blocks must qualify under every symbol of the feedback alphabet.
    """
    p = code.params
    k_first = min(thresholds) if thresholds else p.rounds + 2
    alive = set(combinations(sorted(int(m) for m in candidates), 2))
    for k in range(k_first, p.rounds + 2):
        if not alive:
            break
        if k == k_first:
            fbs = [fb_so_far[k - 2]] if k >= 2 else [0]
        else:
            fbs = range(p.fb_alphabet_size)
        for fb in fbs:
            blk = code.block(k, fb)
            dead = [
                pair
                for pair in alive
                if int(np.count_nonzero(blk[pair[0]] != blk[pair[1]])) > thresholds[k]
            ]
            alive.difference_update(dead)
            if not alive:
                break
    return tuple(sorted(alive))


def push(
    code: FeedbackCode,
    channel: ChannelParams,
    pair,
    y_b: ReceivedWord,
    fb_so_far,
    babble_fraction: float,
    rate_gap: float,
):
    """Forge the push-window suffix: copy agreements of the pair's codewords,
    erase disagreements while the erasure budget lasts, then alternate
    substitutions to balance the two distances.  Feedback between blocks is
    produced by the real feedback machinery (both messages see the same
    received word, hence the same feedback).

    Returns (forged ReceivedWord, None) on success or (None, reason).
    """
    p = code.params
    n, bl = p.n, p.block_len
    m1, m2 = pair
    b = len(y_b)
    k_first = b // bl + 1

    y_vals = np.zeros(n, dtype=np.uint16)
    y_mask = np.zeros(n, dtype=bool)
    y_vals[:b] = y_b.values
    y_mask[:b] = y_b.erased

    bob = BobDecoder(code, channel)
    for k in range(1, k_first):
        bob.feedback_at(k, y_vals[: k * bl], y_mask[: k * bl])
    if list(bob.sent_feedback) != list(fb_so_far):
        raise ValueError("feedback replay diverged from the babble phase")

    erasures_left = int(math.floor(channel.r * n + 1e-9))
    d1 = d2 = 0
    for k in range(k_first, p.rounds + 2):
        fb_prev = bob.sent_feedback[k - 2] if k >= 2 else 0
        c1 = code.block(k, fb_prev)[m1]
        c2 = code.block(k, fb_prev)[m2]
        lo = (k - 1) * bl
        for j in range(bl):
            if c1[j] == c2[j]:
                y_vals[lo + j] = c1[j]
            elif erasures_left > 0:
                y_mask[lo + j] = True
                erasures_left -= 1
            elif d1 <= d2:
                # match m2's symbol, charging a disagreement against m1
                y_vals[lo + j] = c2[j]
                d1 += 1
            else:
                y_vals[lo + j] = c1[j]
                d2 += 1
        if k <= p.rounds:
            if bob.feedback_at(k, y_vals[: k * bl], y_mask[: k * bl]) is None:
                return None, "feedback unavailable while forging the suffix"

    bound = (channel.p - babble_fraction) * n - n * rate_gap / 16.0
    if max(d1, d2) > bound:
        return None, f"push distance {max(d1, d2)} exceeds bound {bound:.4f}"
    forged = ReceivedWord.make(y_vals, y_mask, p.q)
    max_err = int(math.floor(channel.p * n + 1e-9))
    max_era = int(math.floor(channel.r * n + 1e-9))
    for m in pair:
        x = code.codeword(m, tuple(bob.sent_feedback))
        tp = measure_trajectory(x, forged, n)
        if tp.errors > max_err:
            return None, f"message {m} needs {tp.errors} errors (budget {max_err})"
        if tp.erased > max_era:
            return None, f"{tp.erased} erasures exceed budget {max_era}"
    return forged, None


def babble_and_push(
    code: FeedbackCode, channel: ChannelParams, message: int, seed: int
) -> AttackTranscript:
    """Run the whole attack and certify the outcome end to end.

    On a forged output, both pair messages are replayed through the real
    session machinery; success requires byte-identical received words,
    budget recounts inside limits, and the decoder reaching the same verdict
    for both (so at least one message is decoded incorrectly).
    """
    y_b, frag = babble(code, channel, message, seed)
    candidates = build_candidate_set(
        code, y_b, frag["babble_feedback"], frag["babble_fraction"]
    )
    thresholds, aggregate = delta_thresholds(
        code.params, channel, frag["babble_fraction"], frag["babble_len"], frag["rate_gap"]
    )
    pairs = build_scm(code, candidates, frag["babble_feedback"], thresholds)

    chosen = None
    contains = False
    for pair in pairs:
        if message in pair:
            chosen, contains = pair, True
            break
    if chosen is None and pairs:
        chosen = pairs[0]

    forged = None
    fail = None if chosen else "no strongly confusable pair"
    replays = None
    identical = False
    budgets_ok = False
    if chosen is not None:
        forged, fail = push(
            code, channel, chosen, y_b, frag["babble_feedback"],
            frag["babble_fraction"], frag["rate_gap"],
        )
    if forged is not None:
        outs = []
        ys = []
        for m in chosen:
            res = run_session(code, channel, m, ScriptedAdversary(forged), seed=seed)
            outs.append((res.decoded, res.error_event.value if res.error_event else None))
            ys.append(res.y)
        replays = tuple(outs)
        identical = ys[0] == ys[1] and ys[0] == forged
        budgets_ok = True  # push() recounted both messages against the budgets

    success = (
        forged is not None
        and identical
        and replays is not None
        and replays[0] == replays[1]
    )
    return AttackTranscript(
        message=message,
        seed=seed,
        babble_fraction=frag["babble_fraction"],
        babble_len_raw=frag["babble_len_raw"],
        babble_len=frag["babble_len"],
        babble_rounds=frag["babble_rounds"],
        babble_positions=frag["babble_positions"],
        babble_received=y_b,
        babble_feedback=frag["babble_feedback"],
        candidates=candidates,
        block_thresholds=thresholds,
        aggregate_threshold=aggregate,
        confusable_pairs=pairs,
        chosen_pair=chosen,
        pair_contains_message=contains,
        forged_output=forged,
        push_failure=fail,
        replay_outputs=replays,
        replay_identical=identical,
        budgets_ok=budgets_ok,
        success=success,
    )


def attack_transcript_to_json(tr: AttackTranscript) -> str:
    doc = {
        "message": tr.message,
        "seed": tr.seed,
        "babble_fraction": tr.babble_fraction,
        "babble_len_raw": tr.babble_len_raw,
        "babble_len": tr.babble_len,
        "babble_rounds": tr.babble_rounds,
        "babble_positions": list(tr.babble_positions),
        "babble_received": received_to_text(tr.babble_received),
        "babble_feedback": list(tr.babble_feedback),
        "candidates": list(tr.candidates),
        "block_thresholds": {str(k): v for k, v in tr.block_thresholds.items()},
        "aggregate_threshold": tr.aggregate_threshold,
        "confusable_pairs": [list(p) for p in tr.confusable_pairs],
        "chosen_pair": list(tr.chosen_pair) if tr.chosen_pair else None,
        "pair_contains_message": tr.pair_contains_message,
        "forged_output": received_to_text(tr.forged_output) if tr.forged_output else None,
        "push_failure": tr.push_failure,
        "replay_outputs": [list(o) for o in tr.replay_outputs] if tr.replay_outputs else None,
        "replay_identical": tr.replay_identical,
        "budgets_ok": tr.budgets_ok,
        "success": tr.success,
    }
    return json.dumps(doc)


# -- exhaustive worst case ----------------------------------------------------


@dataclass
class WorstCaseResult:
    worst: SessionResult
    exhaustive: bool
    plans_checked: int
    failures: int  # sessions where the decoder did not output the message


def count_action_plans(n: int, q: int, max_errors: int, max_erasures: int) -> int:
    """Number of distinct (error positions+values, erasure positions) plans."""
    total = 0
    for e in range(max_errors + 1):
        for f in range(max_erasures + 1):
            total += math.comb(n, e) * (q - 1) ** e * math.comb(n - e, f)
    return total


def _iter_plans(n: int, q: int, max_errors: int, max_erasures: int):
    """Deterministic enumeration of every admissible action plan.

    Substitutions are parameterized by a nonzero offset from the transmitted
    symbol, so every plan is valid whatever the codeword turns out to be.
    """
    for e in range(max_errors + 1):
        for err_pos in combinations(range(n), e):
            offset_choices = np.ndindex(*([q - 1] * e)) if e else [()]
            for offs in offset_choices:
                err = dict(zip(err_pos, (int(o) + 1 for o in offs)))
                rest = [i for i in range(n) if i not in err]
                for f in range(max_erasures + 1):
                    for era_pos in combinations(rest, f):
                        yield err, era_pos


class _OffsetPlanAdversary(Adversary):
    """Plan expressed as substitution offsets plus erasure positions."""

    def __init__(self, offsets: dict[int, int], erasures, q: int):
        self.offsets = offsets
        self.erase_at = set(erasures)
        self.q = q

    def act_block(self, k, lo, hi, x_values, session):
        acts = []
        for i in range(lo, hi):
            if i in self.offsets:
                acts.append(substitute((int(x_values[i]) + self.offsets[i]) % self.q))
            elif i in self.erase_at:
                acts.append(ERASE)
            else:
                acts.append(KEEP)
        return acts


def exhaustive_worst_case(
    code: FeedbackCode,
    channel: ChannelParams,
    message: int,
    search_budget: int = 2_000_000,
    seed: int = 0,
) -> WorstCaseResult:
    """Try every adversary action plan within budget (or, above the search
    budget, a seeded random sample refined by single-action hill climbing)
    and return the most damaging session.

    Damage order: wrong decode or declared error beats any clean session;
    among clean sessions, the one leaving the decoder the least slack.
    """
    p = code.params
    budget_e = int(math.floor(channel.p * p.n + 1e-9))
    budget_f = int(math.floor(channel.r * p.n + 1e-9))
    total = count_action_plans(p.n, p.q, budget_e, budget_f)
    exhaustive = total <= search_budget

    worst = None
    failures = 0
    checked = 0

    def consider(res: SessionResult):
        nonlocal worst, failures
        if not res.success:
            failures += 1
        if worst is None or _damage_key(res, message) > _damage_key(worst, message):
            worst = res

    if exhaustive:
        for err, era in _iter_plans(p.n, p.q, budget_e, budget_f):
            res = run_session(
                code, channel, message, _OffsetPlanAdversary(err, era, p.q)
            )
            checked += 1
            consider(res)
            if not res.success:
                break  # a zero-error violation is already the worst outcome
    else:
        rng = np.random.default_rng(seed)
        sample = max(search_budget // 4, 1)
        best_plans = []
        for _ in range(sample):
            err_pos = rng.choice(p.n, size=budget_e, replace=False) if budget_e else []
            err = {int(i): int(rng.integers(1, p.q)) for i in err_pos}
            rest = [i for i in range(p.n) if i not in err]
            era = tuple(
                int(i)
                for i in (rng.choice(rest, size=min(budget_f, len(rest)), replace=False) if budget_f else [])
            )
            res = run_session(code, channel, message, _OffsetPlanAdversary(err, era, p.q))
            checked += 1
            consider(res)
            if not res.success:
                return WorstCaseResult(worst, False, checked, failures)
            best_plans.append((_damage_key(res, message), err, era))
        # hill-climb the most damaging sampled plans by single-action moves
        best_plans.sort(key=lambda t: t[0], reverse=True)
        for _, err, era in best_plans[:8]:
            err, era = dict(err), tuple(era)
            improving = True
            while improving and checked < search_budget:
                improving = False
                base = _damage_key(
                    run_session(code, channel, message, _OffsetPlanAdversary(err, era, p.q)),
                    message,
                )
                for pos in list(err):
                    for newpos in rng.permutation(p.n)[:8]:
                        newpos = int(newpos)
                        if newpos in err or newpos in era:
                            continue
                        trial = dict(err)
                        off = trial.pop(pos)
                        trial[newpos] = off
                        res = run_session(
                            code, channel, message, _OffsetPlanAdversary(trial, era, p.q)
                        )
                        checked += 1
                        consider(res)
                        if not res.success:
                            return WorstCaseResult(worst, False, checked, failures)
                        if _damage_key(res, message) > base:
                            err, improving = trial, True
                            break
                    if improving:
                        break
    return WorstCaseResult(worst, exhaustive, checked, failures)


def _damage_key(res: SessionResult, message: int):
    wrong = res.decoded != message
    declared = res.error_event is not None
    # later decoding points mean the adversary strung the decoder along longer
    t_star = res.t_star if res.t_star is not None else 10**9
    return (wrong, declared, t_star)
