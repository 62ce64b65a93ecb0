import json
import math

import numpy as np
import pytest

from conftest import clone_rows_code, custom_code, scheme
from zefchan.capacity import ChannelParams, capacity_o1
from zefchan.channel import measure_trajectory, received_to_text
from zefchan.code import sample_code
from zefchan.protocol import run_session
from zefchan.adversary import (
    IdentityAdversary,
    ScriptedAdversary,
    attack_transcript_to_json,
    babble,
    babble_and_push,
    build_candidate_set,
    build_scm,
    count_action_plans,
    delta_thresholds,
    exhaustive_worst_case,
    make_strategy,
    push,
)


def attack_scheme():
    return scheme(n=12, rate=0.4, block_frac=0.25, list_slack=0.26,
                  fb_alphabet_override=2)


ATTACK_CHANNEL = ChannelParams(2, 0.15, 0.1)


class TestTrajectoryStrategies:
    @pytest.mark.parametrize("name,expect_low", [("low_type", True), ("high_type", False)])
    def test_shape_at_engagement(self, name, expect_low):
        p = scheme(n=120, rate=1 / 12, block_frac=0.1, list_slack=0.3)
        code = sample_code(p, 3)
        ch = ChannelParams(2, 0.03, 0.02)
        res = run_session(code, ch, 7, make_strategy(name), seed=1)
        first = next(tp for tp in res.checkpoints if tp.t == res.t_min)
        if expect_low:
            assert first.error_fraction <= first.reference
        else:
            assert first.error_fraction > first.reference

    def test_identity_matches_crossing_time(self):
        p = scheme(n=120, rate=1 / 12, block_frac=0.1, list_slack=0.3)
        code = sample_code(p, 3)
        ch = ChannelParams(2, 0.03, 0.02)
        for name in ("low_type", "high_type"):
            for s in range(10):
                res = run_session(code, ch, s, make_strategy(name), seed=s)
                if res.success:
                    assert res.t_star == res.t_star_star


class TestBabble:
    def test_zero_fraction_is_silent(self):
        code = sample_code(attack_scheme(), 2)
        y, frag = babble(code, ATTACK_CHANNEL, 3, seed=1, babble_fraction=0.0)
        x = code.codeword(3, frag["babble_feedback"] + (0,) * (code.params.rounds - len(frag["babble_feedback"])))
        assert frag["babble_positions"] == ()
        assert np.array_equal(y.values, x.symbols[: len(y)])

    def test_exact_error_count_no_erasures(self):
        code = sample_code(attack_scheme(), 2)
        y, frag = babble(code, ATTACK_CHANNEL, 5, seed=3, babble_fraction=0.2, babble_len=9)
        assert len(frag["babble_positions"]) == math.floor(0.2 * 12)
        assert max(frag["babble_positions"]) < frag["babble_len"]
        assert y.erasure_count() == 0
        x = code.codeword(5, frag["babble_feedback"] + (0,) * (code.params.rounds - len(frag["babble_feedback"])))
        d = int(np.count_nonzero(x.symbols[:9] != y.values[:9]))
        assert d == 2

    def test_golden_fixture(self):
        code = sample_code(attack_scheme(), 2)
        y, frag = babble(code, ATTACK_CHANNEL, 5, seed=3, babble_fraction=0.2, babble_len=9)
        assert received_to_text(y) == "1,0,1,1,0,1,0,1,0"
        assert frag["babble_positions"] == (0, 6)
        assert frag["babble_feedback"] == (0, 0, 0)

    def test_window_snaps_to_feedback_time(self):
        code = sample_code(attack_scheme(), 2)
        y, frag = babble(code, ATTACK_CHANNEL, 0, seed=0)
        assert frag["babble_len"] in code.params.feedback_times
        assert frag["babble_len"] <= frag["babble_len_raw"]


class TestCandidateSet:
    def test_contains_sender(self):
        code = sample_code(attack_scheme(), 2)
        for seed in range(8):
            y, frag = babble(code, ATTACK_CHANNEL, seed % 27, seed=seed)
            cands = build_candidate_set(code, y, frag["babble_feedback"], frag["babble_fraction"])
            assert (seed % 27) in cands

    def test_zero_fraction_distinct_prefixes(self):
        p = scheme(rate=2 / 16)  # distinct random prefixes at length 8
        code = sample_code(p, 7)
        ch = ChannelParams(2, 1 / 16, 0.0)
        y, frag = babble(code, ch, 2, seed=0, babble_fraction=0.0, babble_len=8)
        cands = build_candidate_set(code, y, frag["babble_feedback"], 0.0)
        assert cands == (2,)

    def test_matches_bruteforce_recount(self):
        code = sample_code(attack_scheme(), 2)
        y, frag = babble(code, ATTACK_CHANNEL, 11, seed=4)
        cands = build_candidate_set(code, y, frag["babble_feedback"], frag["babble_fraction"])
        target = math.floor(frag["babble_fraction"] * code.params.n + 1e-9)
        fb = frag["babble_feedback"]
        expected = []
        for m in range(code.params.num_messages):
            prefix = []
            for k in range(1, len(y) // code.params.block_len + 1):
                prefix.extend(code.block(k, 0 if k == 1 else fb[k - 2])[m].tolist())
            d = sum(1 for i in range(len(y)) if prefix[i] != int(y.values[i]))
            if d == target:
                expected.append(m)
        assert list(cands) == expected


class TestDeltaThresholds:
    def test_blockwise_aggregate_dominates(self):
        p = attack_scheme()
        thr, agg = delta_thresholds(p, ATTACK_CHANNEL, 0.0236839839, 3, 0.224)
        assert sum(thr.values()) <= agg + 1e-12

    def test_single_block_arithmetic(self):
        p = attack_scheme()
        thr, _ = delta_thresholds(p, ATTACK_CHANNEL, 0.02, 9, 0.2)
        # one remaining block: share 1 of the 3 leftover symbols
        assert set(thr) == {4}
        n = p.n
        want = 2 * (0.15 - 0.02) * n + 0.1 * n - 0.2 * n / 8.0
        assert thr[4] == pytest.approx(want)

    def test_tiny_share_is_vacuous(self):
        p = attack_scheme()
        # enormous rate gap pushes the share test above beta
        thr, _ = delta_thresholds(p, ATTACK_CHANNEL, 0.02, 3, rate_gap=30.0)
        assert all(v == p.block_len for v in thr.values())


class TestStronglyConfusablePairs:
    def test_single_candidate_empty(self):
        code = sample_code(attack_scheme(), 2)
        thr, _ = delta_thresholds(code.params, ATTACK_CHANNEL, 0.02, 3, 0.2)
        assert build_scm(code, (4,), (0,), thr) == ()

    def test_identical_remaining_tables_pair_included(self):
        p = attack_scheme()
        code = clone_rows_code(p, clones=[0, 1])
        thr, _ = delta_thresholds(p, ATTACK_CHANNEL, 0.0, 3, 0.2)
        pairs = build_scm(code, (0, 1), (0,), thr)
        assert (0, 1) in pairs

    def test_matches_independent_recount(self):
        code = sample_code(attack_scheme(), 2)
        p = code.params
        y, frag = babble(code, ATTACK_CHANNEL, 0, seed=0)
        cands = build_candidate_set(code, y, frag["babble_feedback"], frag["babble_fraction"])
        thr, _ = delta_thresholds(p, ATTACK_CHANNEL, frag["babble_fraction"], frag["babble_len"], frag["rate_gap"])
        pairs = set(build_scm(code, cands, frag["babble_feedback"], thr))
        k_first = min(thr)
        expected = set()
        for i, a in enumerate(sorted(cands)):
            for b in sorted(cands)[i + 1 :]:
                ok = True
                for k in range(k_first, p.rounds + 2):
                    fbs = [frag["babble_feedback"][k - 2]] if k == k_first else range(p.fb_alphabet_size)
                    for fb in fbs:
                        blk = code.block(k, fb)
                        if int(np.count_nonzero(blk[a] != blk[b])) > thr[k]:
                            ok = False
                if ok:
                    expected.add((a, b))
        assert pairs == expected


class TestPush:
    def test_identical_suffixes_copied_verbatim(self):
        p = scheme(rate=2 / 16, fb_alphabet_override=2)
        code = clone_rows_code(p, clones=[0, 1])
        ch = ChannelParams(2, 2 / 16, 0.0)
        y, frag = babble(code, ch, 0, seed=1, babble_fraction=0.0, babble_len=4)
        forged, fail = push(code, ch, (0, 1), y, frag["babble_feedback"], 0.0, 0.0)
        assert fail is None
        x0 = code.codeword(0, (0, 0, 0))
        assert measure_trajectory(x0, forged, p.n).errors == 0
        assert forged.erasure_count() == 0

    def test_balanced_split_with_ample_budgets(self):
        p = scheme(rate=1 / 16, fb_alphabet_override=2)
        rows = {}
        for fb in range(2):
            for k in (2, 3, 4):
                rows[(k, 0, fb)] = [0, 0, 0, 0]
                rows[(k, 1, fb)] = [1, 1, 0, 0] if k < 4 else [0, 0, 0, 0]
        rows[(1, 0, 0)] = [0, 0, 0, 0]
        rows[(1, 1, 0)] = [0, 0, 0, 0]
        code = custom_code(p, rows)
        ch = ChannelParams(2, 4 / 16, 0.0)  # budget 4, pair distance 4
        y, frag = babble(code, ch, 0, seed=1, babble_fraction=0.0, babble_len=4)
        forged, fail = push(code, ch, (0, 1), y, frag["babble_feedback"], 0.0, 0.0)
        assert fail is None
        d0 = measure_trajectory(code.codeword(0, (0, 0, 0)), forged, p.n).errors
        d1 = measure_trajectory(code.codeword(1, (0, 0, 0)), forged, p.n).errors
        assert d0 == d1 == 2  # four disagreements split evenly

    def test_insufficient_budget_fails(self):
        p = scheme(rate=1 / 16, fb_alphabet_override=2)
        rows = {}
        for fb in range(2):
            for k in (2, 3, 4):
                rows[(k, 0, fb)] = [0, 0, 0, 0]
                rows[(k, 1, fb)] = [1, 1, 1, 1]
        code = custom_code(p, rows)
        ch = ChannelParams(2, 1 / 16, 0.0)  # 12 disagreements, budget 1
        y, frag = babble(code, ch, 0, seed=1, babble_fraction=0.0, babble_len=4)
        forged, fail = push(code, ch, (0, 1), y, frag["babble_feedback"], 0.0, 0.0)
        assert forged is None and fail


class TestBabbleAndPush:
    @pytest.fixture(scope="class")
    def attack_runs(self):
        code = sample_code(attack_scheme(), 2)
        runs = []
        for s in range(60):
            runs.append(babble_and_push(code, ATTACK_CHANNEL, s % 27, seed=s))
        return code, runs

    def test_above_capacity_attacks_succeed_sometimes(self, attack_runs):
        _, runs = attack_runs
        assert capacity_o1(ATTACK_CHANNEL).value < attack_scheme().rate
        assert sum(tr.success for tr in runs) > 0

    def test_every_success_is_sound(self, attack_runs):
        code, runs = attack_runs
        p = code.params
        max_err = math.floor(ATTACK_CHANNEL.p * p.n + 1e-9)
        max_era = math.floor(ATTACK_CHANNEL.r * p.n + 1e-9)
        for tr in (t for t in runs if t.success):
            assert tr.replay_identical
            # replay both messages end to end and recount budgets from scratch
            ys = []
            for m in tr.chosen_pair:
                res = run_session(code, ATTACK_CHANNEL, m, ScriptedAdversary(tr.forged_output))
                ys.append(res.y)
                tp = measure_trajectory(res.x, res.y, p.n)
                assert tp.errors <= max_err and tp.erased <= max_era
            assert ys[0] == ys[1] == tr.forged_output
            # identical outputs force at least one wrong verdict
            assert tr.replay_outputs[0] == tr.replay_outputs[1]

    def test_babble_fraction_is_capacity_minimizer(self, attack_runs):
        _, runs = attack_runs
        argmin = capacity_o1(ATTACK_CHANNEL).argmin
        for tr in runs:
            assert tr.babble_fraction == pytest.approx(argmin, abs=1e-12)

    def test_deterministic_under_seed(self, attack_runs):
        code, runs = attack_runs
        again = babble_and_push(code, ATTACK_CHANNEL, 0, seed=0)
        assert attack_transcript_to_json(again) == attack_transcript_to_json(runs[0])

    def test_below_capacity_attacks_never_land(self):
        # on a code verified zero-error by exhaustive search, no forged output
        # can fit the budgets; push must fail every time
        p = scheme(rate=1 / 16)
        code = sample_code(p, 7)
        ch = ChannelParams(2, 1 / 16, 1 / 16)
        for s in range(20):
            tr = babble_and_push(code, ch, s % 2, seed=s)
            assert not tr.success

    def test_transcript_json_schema(self, attack_runs):
        _, runs = attack_runs
        doc = json.loads(attack_transcript_to_json(runs[0]))
        for field in ("babble_fraction", "babble_positions", "candidates",
                      "block_thresholds", "confusable_pairs", "chosen_pair",
                      "forged_output", "success"):
            assert field in doc


class TestExhaustiveWorstCase:
    def test_zero_budgets_clean(self):
        p = scheme(rate=2 / 16)
        code = sample_code(p, 7)
        ch = ChannelParams(2, 0.0, 0.0)
        w = exhaustive_worst_case(code, ch, 1)
        assert w.exhaustive and w.failures == 0 and w.worst.success

    def test_duplicated_codewords_found(self):
        p = scheme(rate=2 / 16, fb_alphabet_override=3)
        code = clone_rows_code(p, clones=[0, 1])
        ch = ChannelParams(2, 1 / 16, 0.0)
        w = exhaustive_worst_case(code, ch, 0)
        assert w.failures > 0
        assert not w.worst.success

    def test_plan_count(self):
        assert count_action_plans(4, 2, 1, 1) == 1 + 4 + 4 + 4 * 3
        assert count_action_plans(3, 3, 1, 0) == 1 + 3 * 2

    def test_tiny_verified_code_has_no_error(self):
        p = scheme(rate=1 / 16)
        code = sample_code(p, 7)
        ch = ChannelParams(2, 1 / 16, 1 / 16)
        for m in range(p.num_messages):
            w = exhaustive_worst_case(code, ch, m)
            assert w.exhaustive and w.failures == 0

    def test_sampled_fallback_flagged(self):
        p = scheme(rate=1 / 16)
        code = sample_code(p, 7)
        ch = ChannelParams(2, 2 / 16, 2 / 16)
        w = exhaustive_worst_case(code, ch, 0, search_budget=40)
        assert not w.exhaustive
        assert w.plans_checked >= 10
