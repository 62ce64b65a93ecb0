"""Command-line front end: capacity reports, curve sweeps to CSV, Monte Carlo
protocol simulation, attack runs, and the self-check battery.

Exit codes are a stable contract: 0 success, 1 verification failure,
2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import adversary as adv
from . import capacity as cap
from . import code as codemod
from . import protocol as proto
from .channel import Word, distance, parse_word
from .code import ConfigError
from .qent import ball_size_bound, ball_size_exact, entropy, entropy_inverse, plotkin_max_codewords

__all__ = ["main"]

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _fmt(x) -> str:
    """9 significant digits, '.' decimal, no locale."""
    if x is None:
        return ""
    return format(float(x), ".9g")


# -- capacity ---------------------------------------------------------------


def cmd_capacity(args) -> int:
    params = cap.ChannelParams(args.q, args.p, args.r)
    res = cap.capacity_o1(params)
    lines = []
    lines.append(f"q={params.q} p={_fmt(params.p)} r={_fmt(params.r)}")
    lines.append(f"capacity_o1 value {_fmt(res.value)}")
    if res.argmin is None:
        lines.append(f"zero branch: 2p+r = {_fmt(2 * params.p + params.r)} >= (q-1)/q")
    else:
        lines.append(f"argmin babble fraction {_fmt(res.argmin)}")
        lines.append(f"effective fraction at argmin {_fmt(res.effective_fraction)}")
    if params.r == 0.0:
        closed = cap.capacity_errors_only(params.q, params.p)
        lines.append(
            f"errors-only closed form {_fmt(closed)} (delta {_fmt(abs(closed - res.value))})"
        )
    if params.p == 0.0:
        closed = cap.capacity_erasures_only(params.q, params.r)
        lines.append(
            f"erasures-only closed form {_fmt(closed)} (delta {_fmt(abs(closed - res.value))})"
        )
    if params.q == 2 and params.r == 0.0:
        lines.append(f"full-feedback binary {_fmt(cap.capacity_full_feedback_binary(params.p))}")
    if params.r == 0.0:
        lines.append(
            f"full-feedback upper bound {_fmt(cap.capacity_full_feedback_upper(params.q, params.p))}"
        )
    print("\n".join(lines))
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

SWEEP_HEADER = (
    "q,p,r,capacity_o1,errors_closed_form,erasures_closed_form,"
    "full_feedback_binary,full_feedback_q_upper,hamming_bound"
)


def sweep_rows(q: int, axis: str, fixed: float, start: float, stop: float, step: float):
    count = int(math.floor((stop - start) / step + 1e-9)) + 1 if step > 0 else 1
    rows = []
    for i in range(count):
        v = start + i * step
        p, r = (v, fixed) if axis == "p" else (fixed, v)
        res = cap.capacity_o1(cap.ChannelParams(q, p, r))
        errors_cf = cap.capacity_errors_only(q, p) if r == 0.0 else None
        erasures_cf = cap.capacity_erasures_only(q, r) if p == 0.0 else None
        ffb = cap.capacity_full_feedback_binary(p) if (q == 2 and r == 0.0) else None
        ffq = cap.capacity_full_feedback_upper(q, p) if r == 0.0 else None
        hamming = 1.0 - float(entropy(q, min(p, 1.0)))
        rows.append((q, p, r, res.value, errors_cf, erasures_cf, ffb, ffq, hamming))
    return rows


def cmd_sweep(args) -> int:
    axis = args.axis
    fix_name, fix_value = args.fix.split("=")
    fix_name = fix_name.strip()
    if axis not in ("p", "r") or fix_name not in ("p", "r") or axis == fix_name:
        raise ConfigError(f"sweep needs --axis and --fix on distinct members of {{p, r}}")
    rows = sweep_rows(args.q, axis, float(fix_value), args.start, args.stop, args.step)
    text = SWEEP_HEADER + "\n" + "\n".join(
        ",".join((str(row[0]),) + tuple(_fmt(v) for v in row[1:])) for row in rows
    ) + "\n"
    with open(args.out, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


# -- config loading -----------------------------------------------------------


def load_scheme_config(path: str, overrides) -> dict:
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    required = ["q", "p", "r", "n", "rate", "block_frac", "list_slack"]
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"config missing fields: {missing}")
    cfg.setdefault("rate_slack", 0.0)
    cfg.setdefault("seed", 0)
    cfg.setdefault("trials", 100)
    cfg.setdefault("strategies", ["identity", "random", "low_type", "high_type"])
    cfg.setdefault("fb_alphabet_override", None)
    cfg.setdefault("code_retries", 50)
    return cfg


def build_scheme(cfg) -> tuple[codemod.SchemeParams, cap.ChannelParams]:
    params = codemod.derive_params(
        q=cfg["q"],
        n=cfg["n"],
        rate=cfg["rate"],
        block_frac=cfg["block_frac"],
        list_slack=cfg["list_slack"],
        rate_slack=cfg["rate_slack"],
        fb_alphabet_override=cfg["fb_alphabet_override"],
    )
    channel = cap.ChannelParams(cfg["q"], cfg["p"], cfg["r"])
    return params, channel


# -- simulate ------------------------------------------------------------------


def run_simulation(cfg) -> dict:
    params, channel = build_scheme(cfg)
    master = np.random.SeedSequence(cfg["seed"])
    strategies = cfg["strategies"]
    if isinstance(strategies, str):
        strategies = [strategies]

    code_attempt = 0
    code = codemod.sample_code(params, _spawn_int(master, ("code", code_attempt)))
    events = {e.value: 0 for e in proto.ErrorEvent}
    summary = {
        "trials": 0,
        "successes": 0,
        "wrong_decodes": 0,
        "error_events": events,
        "code_resamples": 0,
        "invariants": {
            "decoding_point_identity": 0,
            "membership": 0,
            "uniqueness": 0,
            "rate_identity": 0,
            "violations": [],
        },
        "per_strategy": {s: {"trials": 0, "successes": 0} for s in strategies},
    }

    for trial in range(cfg["trials"]):
        rng = np.random.default_rng(_spawn_int(master, ("trial", trial)))
        message = int(rng.integers(0, params.num_messages))
        name = strategies[trial % len(strategies)]
        strat = adv.make_strategy(name)
        for attempt in range(cfg["code_retries"] + 1):
            res = proto.run_session(
                code, channel, message, strat, seed=_spawn_int(master, ("session", trial))
            )
            if not res.list_violation:
                break
            code_attempt += 1
            summary["code_resamples"] += 1
            code = codemod.sample_code(params, _spawn_int(master, ("code", code_attempt)))
        summary["trials"] += 1
        summary["per_strategy"][name]["trials"] += 1
        if res.error_event is not None:
            events[res.error_event.value] += 1
        elif res.decoded == message:
            summary["successes"] += 1
            summary["per_strategy"][name]["successes"] += 1
            _check_invariants(summary["invariants"], res, code, channel, trial)
        else:
            summary["wrong_decodes"] += 1
    return summary


def _check_invariants(inv, res, code, channel, trial) -> None:
    params = code.params
    ok_tss = res.t_star == res.t_star_star
    inv["decoding_point_identity"] += int(ok_tss)
    k_star = res.t_star // params.block_len
    members = res.lists.get(k_star, ())
    ok_member = res.message in members
    inv["membership"] += int(ok_member)

    bob = proto.BobDecoder(code, channel)
    bob.sent_feedback = list(res.feedback)
    lam = next(tp.erased for tp in res.checkpoints if tp.t == res.t_star)
    bound = proto.decoding_threshold(params, channel, res.t_star, lam)
    dists = bob._suffix_distances(k_star, members, res.y.values, res.y.erased)
    quals = [m for m, d in zip(members, dists) if d <= bound]
    ok_unique = quals == [res.message]
    inv["uniqueness"] += int(ok_unique)

    ok_rate = True
    for tp in res.checkpoints:
        if res.t_min is not None and tp.t >= res.t_min:
            live = tp.t - tp.erased
            lhs = live * (1.0 - float(entropy(params.q, tp.reference)))
            if abs(lhs - params.prefix_threshold()) > 1e-9 * max(1.0, params.n):
                ok_rate = False
    inv["rate_identity"] += int(ok_rate)

    if not (ok_tss and ok_member and ok_unique and ok_rate):
        inv["violations"].append(
            {
                "trial": trial,
                "decoding_point_identity": ok_tss,
                "membership": ok_member,
                "uniqueness": ok_unique,
                "rate_identity": ok_rate,
            }
        )


_SPAWN_DOMAINS = {"code": 0, "trial": 1, "session": 2, "attack": 3}


def _spawn_int(master: np.random.SeedSequence, key) -> int:
    """Counter-based derived seed: deterministic under any execution order."""
    domain, index = key
    child = np.random.SeedSequence(
        entropy=master.entropy, spawn_key=(_SPAWN_DOMAINS[domain], int(index))
    )
    return int(child.generate_state(1)[0])


def cmd_simulate(args) -> int:
    cfg = load_scheme_config(
        args.config, {"seed": args.seed, "trials": args.trials, "strategies": args.strategy}
    )
    summary = run_simulation(cfg)
    text = json.dumps(summary, indent=2)
    if args.out:
        with open(args.out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    ok = not summary["invariants"]["violations"]
    return EXIT_OK if ok else EXIT_VERIFY


# -- attack ---------------------------------------------------------------------


def cmd_attack(args) -> int:
    cfg = load_scheme_config(args.config, {"seed": args.seed})
    params, channel = build_scheme(cfg)
    master = np.random.SeedSequence(cfg["seed"])
    code = codemod.sample_code(params, _spawn_int(master, ("code", 0)))
    res = cap.capacity_o1(channel)
    transcripts = []
    successes = 0
    for s in range(args.seeds):
        seed = _spawn_int(master, ("attack", s))
        rng = np.random.default_rng(seed)
        message = int(rng.integers(0, params.num_messages))
        tr = adv.babble_and_push(code, channel, message, seed)
        if tr.success:
            successes += 1
            assert tr.replay_identical and tr.budgets_ok
            assert abs(tr.babble_fraction - res.argmin) < 1e-12
        transcripts.append(json.loads(adv.attack_transcript_to_json(tr)))
    out = {
        "capacity": res.value,
        "rate": params.rate,
        "seeds": args.seeds,
        "successes": successes,
        "success_frequency": successes / args.seeds if args.seeds else 0.0,
        "transcripts": transcripts,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


# -- verify ---------------------------------------------------------------------


def _max_code_size(q: int, n: int, d: int) -> int:
    """Exact maximum code size with minimum distance >= d by clique search.

    Any code can be translated (per-coordinate symbol relabeling preserves
    distances) so that it contains the all-zero word; the rest then has
    weight >= d, so we search for the largest pairwise-far set among those.
    """
    words = [w for w in _all_words(q, n) if sum(1 for s in w if s) >= d]
    far = {
        w: frozenset(
            v for v in words if sum(1 for a, b in zip(w, v) if a != b) >= d
        )
        for w in words
    }
    best = 0

    def extend(chosen: int, candidates: list) -> None:
        nonlocal best
        best = max(best, chosen)
        while candidates:
            if chosen + len(candidates) <= best:
                return
            w = candidates.pop()
            extend(chosen + 1, [v for v in candidates if v in far[w]])

    extend(1, list(words))  # the 1 counts the zero word
    return best


def _all_words(q: int, n: int):
    import itertools

    return [tuple(w) for w in itertools.product(range(q), repeat=n)]


def verify_battery(inject_fault: bool = False, deep: bool = False) -> list[dict]:
    """Every self-check, as (name, passed, detail) records."""
    checks = []

    def add(name, passed, detail=""):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    # inverse entropy round trip
    worst = 0.0
    for q in (2, 3, 4, 8, 16):
        ys = np.linspace(0.0, 1.0, 10_001)
        xs = entropy_inverse(q, ys)
        worst = max(worst, float(np.max(np.abs(np.asarray(entropy(q, xs)) - ys))))
    add("entropy_inverse_roundtrip", worst <= 1e-10, f"max residual {worst:.3e}")

    # entropy monotone on the increasing branch
    mono = True
    for q in (2, 3, 4, 8, 16):
        xs = np.linspace(0.0, (q - 1) / q, 20_001)
        mono &= bool(np.all(np.diff(np.asarray(entropy(q, xs))) > 0))
    add("entropy_monotone", mono)

    # ball bound dominates the exact count
    ok = True
    detail = ""
    for q in (2, 3, 4):
        for n in range(1, 41):
            for pv in np.linspace(0.0, (q - 1) / q, 41):
                exact = ball_size_exact(q, n, int(math.floor(n * pv + 1e-9)))
                if exact > ball_size_bound(q, n, float(pv)):
                    ok = False
                    detail = f"violated at q={q} n={n} p={pv}"
    add("ball_size_bound", ok, detail)

    # Plotkin bound vs exhaustive code search (small battery sizes)
    ok = True
    detail = ""
    for q, n_top in ((2, 6), (3, 4)):
        for n in range(1, n_top + 1):
            for d in range(1, n + 1):
                if d * q <= (q - 1) * n:
                    continue
                limit = plotkin_max_codewords(q, n, d)
                found = _max_code_size(q, n, d)
                if found > limit:
                    ok = False
                    detail = f"q={q} n={n} d={d}: found {found} > bound {limit}"
    add("plotkin_brute_force", ok, detail)

    # convexity / first-order structure of the capacity minimand
    ok = True
    detail = ""
    for q, p, r in ((2, 0.05, 0.0), (2, 0.2, 0.0), (4, 0.3, 0.0), (3, 0.1, 0.1)):
        rep = cap.verify_convexity(cap.ChannelParams(q, p, r))
        if not rep.passed:
            ok = False
            detail = f"(q={q}, p={p}, r={r}): {rep.failures}"
    add("capacity_convexity", ok, detail)

    # tangency point: defining equation and the 1/q dominance
    worst = 0.0
    ok = True
    for q in range(2, 65):
        ps = cap.tangency_point(q)
        resid = abs(ps * (1 - ps) ** ((q + 1) / (q - 1)) - (q - 1) * q ** (-2 * q / (q - 1)))
        if inject_fault:
            resid += 1e-3
        worst = max(worst, resid)
        ok &= resid <= 1e-10 and ps <= 1.0 / q
    add("tangency_point_table", ok, f"max residual {worst:.3e}")

    # large-alphabet gap sequence stays positive, bounded, and flat in ratio
    gaps = [cap.large_alphabet_gap(2**k, 0.1, 0.2) for k in range(2, 13)]
    ratios = [gaps[i + 1] / gaps[i] for i in range(len(gaps) - 1)]
    qs = [2**k for k in range(2, 13)]
    tail = [ra for qv, ra in zip(qs[:-1], ratios) if qv >= 256]
    ok = all(g > 0 for g in gaps) and max(gaps) < 10.0 and all(
        0.5 <= ra <= 2.0 for ra in tail
    )
    add("large_alphabet_gap", ok, f"gaps {gaps[0]:.4f}..{gaps[-1]:.4f}")

    return checks


def cmd_verify(args) -> int:
    checks = verify_battery(inject_fault=args.inject_fault)
    failed = [c for c in checks if not c["passed"]]
    if args.json:
        print(json.dumps({"passed": not failed, "checks": checks}, indent=2))
    else:
        for c in checks:
            status = "PASS" if c["passed"] else "FAIL"
            detail = f"  ({c['detail']})" if c["detail"] else ""
            print(f"{status} {c['name']}{detail}")
    return EXIT_OK if not failed else EXIT_VERIFY


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zefchan",
        description="zero-error capacity lab for adversarial error-erasure channels "
        "with constant-bit feedback",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="capacity value and closed-form cross-checks")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sweep", help="capacity curves to CSV")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--fix", required=True, help="fixed parameter, e.g. r=0")
    p.add_argument("--axis", required=True, choices=["p", "r"])
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo protocol sessions")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--strategy")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", help="babble-and-push attack transcripts")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("verify", help="run the self-check battery")
    p.add_argument("--json", action="store_true")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
