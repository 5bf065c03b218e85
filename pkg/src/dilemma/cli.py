"""Command-line front end: solve, scan, simulate, export.

Subcommands map onto the library modules one to one.  All file outputs
are UTF-8 CSVs with LF line endings, and every run with the same seed
writes byte-identical files.  Opponents are given in their own frame
(WSLS means the other player plays WSLS); the perspective swap into the
learner's frame happens here, so library calls stay explicit about it.

Exit codes: 0 success, 2 invalid arguments or payoff ordering, 3 a
discount on a closed-form region boundary escalated by --strict, 4 a
filesystem failure while writing outputs.
"""

from __future__ import annotations

import argparse
import os
import sys

from .closed_form import (
    BoundaryGamma,
    best_response_region,
    case_region_note,
    solve_all_cases,
)
from .equilibrium import alternating_dynamics, equilibrium_scan
from .game import PDGame, StateProfile
from .qlearning import (
    LearnerConfig,
    alternating_qlearning,
    export_tally,
    export_trace,
    run_learning,
)
from .solver import best_response
from .strategies import (
    NAME_ALIASES,
    apply_noise,
    catalog,
    parse_strategy,
    swap_perspective,
)

Q_COLUMNS = ("qCCC", "qCCD", "qCDC", "qCDD", "qDCC", "qDCD", "qDDC", "qDDD")

_LABELS = {entry.strategy.serialize(): entry.label for entry in catalog()}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _label(strategy) -> str:
    bits = strategy.serialize()
    return _LABELS.get(bits, bits)


def _parse_payoffs(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected R,S,T,P, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"payoffs must be numbers, got {text!r}")


def _parse_grid(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid bounds must be numbers, got {text!r}")
    if step <= 0 or a > b:
        raise argparse.ArgumentTypeError("grid needs a <= b and step > 0")
    if a < 0 or b >= 1:
        raise argparse.ArgumentTypeError("grid must stay inside [0, 1)")
    values = []
    x = a
    while x <= b + step * 1e-9:
        values.append(round(x, 12))
        x += step
    return tuple(values)


def _parse_opponent(text: str):
    try:
        return parse_strategy(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DILEMMA_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(2, f"DILEMMA_SEED must be an integer, got {env!r}")
    return 0


def _game(args, gamma=None) -> PDGame:
    g = args.gamma if gamma is None else gamma
    if g is None:
        raise CliError(2, "--gamma is required here")
    R, S, T, P = args.payoffs
    try:
        return PDGame(R, S, T, P, g)
    except ValueError as exc:
        raise CliError(2, str(exc))


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(4, f"cannot create output directory {path!r}: {exc}")


def _write_csv(path: str, header: str, rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(str(x) for x in row) + "\n")
    except OSError as exc:
        raise CliError(4, f"cannot write {path!r}: {exc}")


def _effective_opponent(args):
    """Own-frame opponent with noise folded in, plus the learner-frame view."""
    own = args.opp
    if args.noise:
        if not 0 <= args.noise <= 1:
            raise CliError(2, f"--noise must be in [0, 1], got {args.noise}")
        own = apply_noise(own, args.noise)
    return own, swap_perspective(own)


# ---------------------------------------------------------------- commands


def cmd_best_response(args) -> int:
    game = _game(args)
    if args.opp is None:
        raise CliError(2, "--opp is required")
    own, learner_frame = _effective_opponent(args)
    result = best_response(game, learner_frame)
    policy = result.policy.strategy

    print(f"opponent: {_label(args.opp)} [{args.opp.serialize()}]"
          + (f" with noise {args.noise}" if args.noise else ""))
    print(f"payoffs R,S,T,P = {args.payoffs}   gamma = {game.gamma}")
    print(f"best response: {_label(policy)} [{policy.serialize()}]")
    for name, value in zip(Q_COLUMNS, result.q_star.qvec):
        print(f"  {name} = {value:.10g}")
    ties = ", ".join(StateProfile(s).name for s in result.tie_states) or "none"
    print(f"tie states: {ties}")

    atlas_names = {"1010": "TFT", "1001": "WSLS", "1000": "GRIM"}
    bits = args.opp.serialize()
    if not args.noise and bits in atlas_names:
        try:
            region = best_response_region(game, atlas_names[bits])
        except BoundaryGamma as exc:
            if args.strict:
                raise CliError(3, str(exc))
            print(f"warning: {exc}", file=sys.stderr)
        else:
            dev = max(
                abs(float(a) - float(b))
                for a, b in zip(result.q_star.qvec, region.q)
            )
            print(
                f"closed-form region: {region.payoff_condition}, gamma in "
                f"({region.lo_desc}, {region.hi_desc}) = "
                f"({region.gamma_lo:.6g}, {region.gamma_hi:.6g}) "
                f"-> {_label(region.response)}"
            )
            print(f"max |solver - closed form| = {dev:.3g}")

    if args.out:
        _ensure_dir(args.out)
        rows = [(name, f"{v:.12g}") for name, v in zip(Q_COLUMNS, result.q_star.qvec)]
        _write_csv(os.path.join(args.out, "best_response.csv"), "entry,value", rows)
        print(f"wrote {os.path.join(args.out, 'best_response.csv')}")
    return 0


def _table1_rows(game: PDGame):
    rows = []
    for sol in solve_all_cases(game):
        rows.append(
            (
                sol.case_id,
                sol.strategy.serialize(),
                sol.name or "",
                "Yes" if sol.consistent else "No",
                case_region_note(sol.case_id),
            )
        )
    return rows


def cmd_equilibrium_scan(args) -> int:
    R, S, T, P = args.payoffs
    try:
        PDGame(R, S, T, P, 0.0)  # payoff ordering check up front
    except ValueError as exc:
        raise CliError(2, str(exc))

    if args.table1:
        game = _game(args)
        rows = _table1_rows(game)
        print(f"payoffs R,S,T,P = {args.payoffs}   gamma = {game.gamma}")
        print(f"{'case':>4}  {'bits':>4}  {'name':<11} {'equilibrium':<11} condition")
        for case_id, bits, name, verdict, note in rows:
            print(f"{case_id:>4}  {bits:>4}  {name:<11} {verdict:<11} {note}")
        if args.out:
            _ensure_dir(args.out)
            path = os.path.join(args.out, "table1.csv")
            _write_csv(path, "case,bits,name,verdict,condition", rows)
            print(f"wrote {path}")
        return 0

    if args.gamma_grid is None:
        raise CliError(2, "need --gamma-grid a:b:step (or --table1 with --gamma)")
    scan = equilibrium_scan(args.payoffs, args.gamma_grid)

    near_any = False
    print(f"payoffs R,S,T,P = {args.payoffs}")
    for g, report in scan.points:
        labels = ", ".join(report.labels()) or "(none)"
        print(f"gamma={g:<6g} equilibria: {labels}")
        for entry in report.near_boundary:
            near_any = True
            print(
                f"  warning: {entry.label} is within {abs(entry.support):.2g} "
                "of its equilibrium boundary",
                file=sys.stderr,
            )
    if scan.onsets:
        print("onset brackets:")
        for label, brackets in sorted(scan.onsets.items()):
            for lo, hi in brackets:
                print(f"  {label}: gamma in ({lo:.8f}, {hi:.8f})")

    if args.out:
        _ensure_dir(args.out)
        labels = [entry.label for entry in catalog()]
        rows = []
        for g, report in scan.points:
            members = set(report.labels())
            rows.append([f"{g:g}"] + ["1" if l in members else "0" for l in labels])
        _write_csv(
            os.path.join(args.out, "scan.csv"),
            "gamma," + ",".join(labels),
            rows,
        )
        onset_rows = [
            (label, f"{lo:.10f}", f"{hi:.10f}")
            for label, brackets in sorted(scan.onsets.items())
            for lo, hi in brackets
        ]
        _write_csv(os.path.join(args.out, "onsets.csv"), "label,lo,hi", onset_rows)
        print(f"wrote {os.path.join(args.out, 'scan.csv')} and onsets.csv")

    if near_any and args.strict:
        raise CliError(3, "equilibria within tolerance of a boundary (--strict)")
    return 0


def _print_qlearn_summary(game, learner_frame_opp, trace) -> None:
    targets = best_response(game, learner_frame_opp).q_star.qvec
    print(f"{'entry':>5}  {'mean q':>12}  {'target':>12}  rel err")
    for name, mean, target in zip(Q_COLUMNS, trace.mean_final_q, targets):
        t = float(target)
        if abs(t) > 1e-9:
            rel = f"{abs(mean - t) / abs(t):.3%}"
        else:
            rel = f"abs {abs(mean - t):.3g}"
        print(f"{name:>5}  {mean:>12.6g}  {t:>12.6g}  {rel}")
    modal = trace.modal_policy()
    share = trace.policy_tally[modal.serialize()] / trace.realizations
    print(f"modal greedy policy: {_label(modal)} [{modal.serialize()}] "
          f"({share:.1%} of {trace.realizations} realizations)")
    others = sorted(trace.policy_tally.items(), key=lambda kv: -kv[1])[:4]
    print("tally: " + ", ".join(f"{bits}:{n}" for bits, n in others))


def cmd_qlearn(args) -> int:
    game = _game(args)
    seed = _resolve_seed(args)
    config = LearnerConfig(
        eta=args.eta,
        epsilon=args.epsilon,
        steps_per_phase=args.steps,
        realizations=args.realizations,
        seed=seed,
    )

    if args.alternating:
        if args.initial_p2 is None:
            raise CliError(2, "--alternating needs --initial-p2")
        summaries = alternating_qlearning(game, args.initial_p2, config, args.phases)
        print(
            f"alternating run: payoffs {args.payoffs}, gamma {game.gamma}, "
            f"{config.realizations} realizations, start {_label(args.initial_p2)}"
        )
        for s in summaries:
            top = sorted(s.policy_tally.items(), key=lambda kv: -kv[1])[:3]
            tally = ", ".join(f"{bits}:{n}" for bits, n in top)
            print(
                f"phase {s.phase} (player {s.learner} learns): modal "
                f"{_label(s.modal)} [{s.modal.serialize()}]  tally {tally}"
            )
        if args.out:
            _ensure_dir(args.out)
            try:
                for s in summaries:
                    export_trace(
                        s.times, s.mean_q,
                        os.path.join(args.out, f"trace_phase{s.phase}.csv"),
                    )
                    export_tally(
                        s.policy_tally,
                        os.path.join(args.out, f"tally_phase{s.phase}.csv"),
                    )
            except OSError as exc:
                raise CliError(4, f"cannot write traces: {exc}")
            print(f"wrote {2 * len(summaries)} files under {args.out}")
        return 0

    if args.opp is None:
        raise CliError(2, "--opp is required (or use --alternating)")
    own, learner_frame = _effective_opponent(args)
    trace = run_learning(game, learner_frame, config)
    print(
        f"opponent {_label(args.opp)} [{args.opp.serialize()}]"
        + (f" with noise {args.noise}" if args.noise else "")
        + f", gamma {game.gamma}, {config.realizations} realizations of "
        f"{config.steps_per_phase} steps, seed {seed}"
    )
    _print_qlearn_summary(game, learner_frame, trace)
    if args.out:
        _ensure_dir(args.out)
        try:
            export_trace(trace.times, trace.mean_q, os.path.join(args.out, "trace.csv"))
            export_tally(trace.policy_tally, os.path.join(args.out, "policy_tally.csv"))
        except OSError as exc:
            raise CliError(4, f"cannot write traces: {exc}")
        print(f"wrote trace.csv and policy_tally.csv under {args.out}")
    return 0


# The reproduction set: four noise-free traces and the two noisy ones.
# Step counts are per run: entries that train only through doubled
# exploration need around 1e6 steps to pick their plateau, the others
# settle well inside 2e5.
_REPRO_RUNS = (
    ("trace_wsls_gamma09.csv", "WSLS", 0.9, 0.0, 1_000_000),
    ("trace_wsls_gamma02.csv", "WSLS", 0.2, 0.0, 200_000),
    ("trace_grim_gamma09.csv", "GRIM", 0.9, 0.0, 200_000),
    ("trace_grim_gamma02.csv", "GRIM", 0.2, 0.0, 200_000),
    ("trace_grim_noisy_gamma09.csv", "GRIM", 0.9, 0.01, 1_000_000),
    ("trace_grim_noisy_gamma02.csv", "GRIM", 0.2, 0.01, 1_000_000),
)


def cmd_reproduce(args) -> int:
    payoffs = (4.0, 0.0, 6.0, 1.0)
    realizations = 100 if args.quick else 1000
    seed = _resolve_seed(args)
    out = args.out or "reproduction"
    _ensure_dir(out)
    written = []

    # Case verdicts at the reference discount, onset brackets from a scan.
    game = PDGame(*payoffs, 0.9)
    scan = equilibrium_scan(payoffs, [round(0.05 * k, 2) for k in range(1, 20)])
    brackets = {}
    for label, pairs in scan.onsets.items():
        brackets[label] = pairs[0]
    rows = []
    for case_id, bits, name, verdict, note in _table1_rows(game):
        label = name or bits
        lo, hi = brackets.get(label, ("", ""))
        lo = f"{lo:.10f}" if lo != "" else ""
        hi = f"{hi:.10f}" if hi != "" else ""
        rows.append((case_id, bits, name, verdict, note, lo, hi))
    path = os.path.join(out, "table1.csv")
    _write_csv(path, "case,bits,name,verdict,condition,onset_lo,onset_hi", rows)
    written.append(
        ("table1.csv", "equilibrium verdicts for payoffs (4 0 6 1) at gamma 0.9 "
         "with bisected onset brackets")
    )

    for fname, opp_name, gamma, noise, steps in _REPRO_RUNS:
        game = PDGame(*payoffs, gamma)
        opp = parse_strategy(opp_name)
        own = apply_noise(opp, noise) if noise else opp
        config = LearnerConfig(seed=seed, realizations=realizations,
                               steps_per_phase=steps)
        trace = run_learning(game, swap_perspective(own), config)
        try:
            export_trace(trace.times, trace.mean_q, os.path.join(out, fname))
        except OSError as exc:
            raise CliError(4, f"cannot write {fname}: {exc}")
        noise_part = f" with action noise {noise}" if noise else ""
        written.append(
            (fname, f"mean learned action values vs {opp_name} at gamma {gamma}"
             f"{noise_part}; {realizations} realizations of {steps} steps; "
             f"seed {seed}")
        )
        modal = trace.modal_policy()
        print(f"{fname}: modal greedy policy {_label(modal)} [{modal.serialize()}]")

    _write_csv(os.path.join(out, "manifest.csv"), "file,description", written)
    print(f"wrote {len(written) + 1} files under {out}")
    return 0


def cmd_dynamics(args) -> int:
    game = _game(args)
    initials = [args.initial_p2] if args.initial_p2 is not None else [
        entry.strategy for entry in catalog()
    ]
    for initial in initials:
        trace = alternating_dynamics(game, initial)
        path = " -> ".join(
            f"p{step.learner}:{_label(step.strategy)}" for step in trace.steps
        )
        if trace.fixed_point is not None:
            s1, s2 = trace.fixed_point
            end = f"fixed point ({_label(s1)}, {_label(s2)})"
        elif trace.cycle is not None:
            start, period = trace.cycle
            end = f"cycle of period {period} from step {start}"
        elif trace.halted_on_tie is not None:
            step, states = trace.halted_on_tie
            names = ",".join(StateProfile(s).name for s in states)
            end = f"halted on tie at step {step} (states {names})"
        else:
            end = "budget exhausted"
        print(f"start p2={_label(initial)}: {path or '(no steps)'} | {end}")
    return 0


# ---------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    names = ", ".join(sorted(NAME_ALIASES))
    parser = argparse.ArgumentParser(
        prog="dilemma",
        description="Exact solving and Q-learning simulation for the "
        "repeated prisoner's dilemma with memory-one strategies.",
        epilog=f"Strategy names: {names}; or any 4-bit string over the "
        "previous joint outcomes (CC,CD,DC,DD), 1 = cooperate. "
        "Seeds fall back to the DILEMMA_SEED environment variable, then 0.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, gamma=True):
        p.add_argument(
            "--payoffs", type=_parse_payoffs, default=(4.0, 0.0, 6.0, 1.0),
            metavar="R,S,T,P", help="payoff quadruple (default 4,0,6,1)",
        )
        if gamma:
            p.add_argument("--gamma", type=float, default=None, help="discount factor")
        p.add_argument("--out", default=None, metavar="DIR", help="output directory")

    p = sub.add_parser("best-response", help="exact best response to a fixed opponent")
    common(p)
    p.add_argument("--opp", type=_parse_opponent, default=None,
                   help=f"opponent: {names}, 4-bit string, or 4 probabilities")
    p.add_argument("--noise", type=float, default=0.0,
                   help="opponent action-flip probability")
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when gamma sits on a closed-form region boundary")
    p.set_defaults(func=cmd_best_response)

    p = sub.add_parser("equilibrium-scan",
                       help="symmetric equilibria along a discount grid")
    common(p)
    p.add_argument("--gamma-grid", type=_parse_grid, default=None, metavar="A:B:STEP",
                   help="discount grid, e.g. 0.1:0.9:0.1")
    p.add_argument("--table1", action="store_true",
                   help="emit the 16-case verdict table at --gamma")
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when any verdict is within tolerance of a boundary")
    p.set_defaults(func=cmd_equilibrium_scan)

    p = sub.add_parser("qlearn", help="run the Q-learning simulator")
    common(p)
    p.add_argument("--opp", type=_parse_opponent, default=None,
                   help=f"frozen opponent: {names}, bits, or probabilities")
    p.add_argument("--noise", type=float, default=0.0,
                   help="opponent action-flip probability")
    p.add_argument("--eta", type=float, default=0.2, help="learning rate")
    p.add_argument("--epsilon", type=float, default=0.01, help="exploration rate")
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--steps", type=int, default=200_000, help="steps per phase")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alternating", action="store_true",
                   help="both players learn in alternation")
    p.add_argument("--phases", type=int, default=4,
                   help="phase count for --alternating")
    p.add_argument("--initial-p2", type=_parse_opponent, default=None,
                   help="player 2's strategy before the first phase")
    p.set_defaults(func=cmd_qlearn)

    p = sub.add_parser("dynamics",
                       help="alternating exact best-response dynamics")
    common(p)
    p.add_argument("--initial-p2", type=_parse_opponent, default=None,
                   help="single starting strategy (default: all 16)")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("reproduce",
                       help="regenerate the verdict table and learning traces")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="output directory (default: reproduction)")
    p.add_argument("--quick", action="store_true",
                   help="100 realizations instead of 1000")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    raise SystemExit(main())
