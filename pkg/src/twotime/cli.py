"""Command-line front end.

Every subcommand takes a scenario from ``--preset three-boxes`` (with
``--epsilon``, ``--cycles``) or ``--scenario FILE.json``, optionally adds
phase-flip events with ``--event solenoid@TIME``, and writes CSV/JSON either
to ``--out`` (atomically) or to stdout.  Times accept schedule names
(``t1``, ``t2``, ``t3``, ``tf``) or numbers.

Exit codes: 0 success, 1 domain error, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field

import numpy as np

from . import mc, pointer, twostate
from .documents import atomic_write, dumps, fmt, parse_scenario, serialize_scenario
from .errors import ParseError, TwoTimeError
from .qcore import identity, make_projector
from .scenario import extended_preset, pauli_embed, solenoid_event

PRESETS = ("three-boxes",)


@dataclass
class CommandResult:
    exit_code: int
    artifacts: list = field(default_factory=list)


class UsageError(Exception):
    pass


def observable(token, dim):
    """``P<k>`` (1-based box), ``SX``/``SY``/``SZ``, ``IP`` (two-box identity) or ``I``."""
    t = token.strip().upper()
    if t.startswith("P") and t[1:].isdigit():
        k = int(t[1:])
        if not 1 <= k <= dim:
            raise UsageError(f"box {k} out of range 1..{dim}")
        return make_projector(dim, k - 1, f"P{k}")
    axes = {"SX": "x", "SY": "y", "SZ": "z", "IP": "identity", "I'": "identity"}
    if t in axes:
        op = pauli_embed(axes[t], dim)
        return type(op)(op.matrix, token.strip())
    if t == "I":
        return identity(dim, "I")
    raise UsageError(f"unknown observable {token!r}")


def observables(spec, dim):
    return [observable(tok, dim) for tok in spec.split(",") if tok.strip()]


def decomposition(spec, dim):
    """``boxes`` for every box, or a comma list of box numbers plus the remainder."""
    if spec.strip().lower() == "boxes":
        return twostate.ProjectiveDecomposition.boxes(dim)
    try:
        boxes = [int(tok.strip().upper().lstrip("P")) for tok in spec.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"bad projector list {spec!r}") from None
    if not boxes or any(not 1 <= b <= dim for b in boxes):
        raise UsageError(f"projector boxes must lie in 1..{dim}")
    return twostate.ProjectiveDecomposition.from_boxes(dim, [b - 1 for b in boxes])


def load_scenario(args):
    if args.scenario:
        try:
            with open(args.scenario) as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {args.scenario}: {exc}") from None
        s = parse_scenario(text)
    else:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}")
        s = extended_preset(args.epsilon, args.cycles)
    for spec in args.event or []:
        kind, _, rest = spec.partition("@")
        if kind != "solenoid" or not rest:
            raise UsageError(f"bad event {spec!r}; expected solenoid@TIME[:BOX]")
        when, _, box = rest.partition(":")
        s = s.with_events(solenoid_event(s.dim, s.time(when), int(box) - 1 if box else 0))
    return s


def emit(text, args, result):
    if args.out:
        result.artifacts.append(atomic_write(args.out, text))
    else:
        sys.stdout.write(text)


def _csv(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def cmd_preset(args, result):
    args.scenario = None
    args.preset = args.name
    emit(dumps(serialize_scenario(load_scenario(args))) + "\n", args, result)


def cmd_weak_sweep(args, result):
    s = load_scenario(args)
    tt = twostate.TwoTimeState(s)
    ops = observables(args.observables, s.dim)
    if args.times:
        times = [s.time(tok) for tok in args.times.split(",")]
    else:
        times = twostate.time_grid(tt, args.steps)
    samples = twostate.weak_value_sweep(tt, ops, times, workers=args.workers)
    emit(twostate.sweep_csv(samples), args, result)


def cmd_abl(args, result):
    s = load_scenario(args)
    tt = twostate.TwoTimeState(s)
    dec = decomposition(args.projectors, s.dim)
    t = s.time(args.time)
    probs = twostate.abl_probabilities(tt, dec, t)
    rows = [["t", "label", "p"]] + [[fmt(t), lab, fmt(p)] for lab, p in zip(dec.labels, probs)]
    emit(_csv(rows), args, result)


def cmd_mc(args, result):
    s = load_scenario(args)
    plan = None
    if args.time is not None:
        plan = mc.MeasurementPlan(
            s.time(args.time), decomposition(args.projectors, s.dim), args.projectors, args.sequential
        )
    cfg = mc.RunConfig(args.trials, args.seed, s, plan)
    stats = mc.run_trials(cfg, workers=args.workers)
    report = None
    if plan is not None:
        abl = twostate.abl_probabilities(twostate.TwoTimeState(s), plan.decomposition, plan.time)
        report = mc.compare_to_abl(stats, abl)
        for note in report.warnings:
            print(note, file=sys.stderr)
    emit(dumps(mc.stats_document(stats, report)) + "\n", args, result)
    if args.csv:
        result.artifacts.append(atomic_write(args.csv, mc.stats_csv(stats)))


def cmd_pointer(args, result):
    s = load_scenario(args)
    A = observable(args.observable, s.dim)
    grid = pointer.PointerGrid(args.points, args.length)
    est = pointer.estimate_weak_value(s, A, s.time(args.time), args.g, grid, args.sigma)
    if not est.weak_regime:
        print(f"warning: |g| * spectral radius exceeds sigma/10 for {A.label}", file=sys.stderr)
    emit(dumps(est.document()) + "\n", args, result)


def _report_doc(label, t, rep):
    return {
        "observable": label,
        "t": t,
        "eigenvalues": list(rep.eigenvalues),
        "abl": list(rep.abl),
        "certain": rep.certain,
        "certain_eigenvalue": rep.certain_eigenvalue,
        "weak_re": rep.weak_value.real,
        "weak_im": rep.weak_value.imag,
        "residual": rep.residual,
        "violation": rep.violation,
    }


def cmd_theorem_check(args, result):
    if args.random:
        rng = np.random.default_rng(args.seed)
        violations = 0
        for _ in range(args.random):
            tt, A, t, _value = twostate.certainty_case(rng)
            violations += twostate.theorem_crosscheck(tt, A, t).violation
        doc = {"cases": args.random, "seed": args.seed, "violations": violations}
    else:
        s = load_scenario(args)
        tt = twostate.TwoTimeState(s)
        t = s.time(args.time)
        doc = [_report_doc(A.label, t, twostate.theorem_crosscheck(tt, A, t)) for A in observables(args.observables, s.dim)]
    emit(dumps(doc) + "\n", args, result)


def cmd_deterministic_set(args, result):
    s = load_scenario(args)
    tt = twostate.TwoTimeState(s)
    t = s.time(args.time)
    rows = [["t", "observable", "kind", "weak_re", "weak_im", "value"]]
    for c in twostate.deterministic_set(tt, observables(args.observables, s.dim), t):
        rows.append([fmt(t), c.label, c.kind, fmt(c.weak_value.real), fmt(c.weak_value.imag), "" if c.value is None else fmt(c.value)])
    emit(_csv(rows), args, result)


def build_parser():
    scen = argparse.ArgumentParser(add_help=False)
    src = scen.add_mutually_exclusive_group()
    src.add_argument("--preset", default="three-boxes", help="built-in scenario (default: three-boxes)")
    src.add_argument("--scenario", help="scenario JSON document")
    scen.add_argument("--epsilon", type=float, default=1.0, help="tunneling rate for presets")
    scen.add_argument("--cycles", type=int, default=0, help="delay post-selection by 2k half-periods")
    scen.add_argument("--event", action="append", metavar="solenoid@TIME[:BOX]", help="insert a phase flip (repeatable)")
    scen.add_argument("--out", help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="twotime", description="Pre- and post-selected quantum dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", parents=[scen], help="write a preset scenario document")
    p.add_argument("name", choices=PRESETS)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("weak-sweep", parents=[scen], help="weak values over a time grid (CSV)")
    p.add_argument("--observables", default="P1,P2,P3")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--times", help="comma-separated times instead of a grid")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_weak_sweep)

    p = sub.add_parser("abl", parents=[scen], help="ABL conditional probabilities (CSV)")
    p.add_argument("--time", required=True)
    p.add_argument("--projectors", default="boxes")
    p.set_defaults(func=cmd_abl)

    p = sub.add_parser("mc", parents=[scen], help="Monte Carlo post-selected statistics (JSON)")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time", help="time of the intermediate measurement (omit for none)")
    p.add_argument("--projectors", default="boxes")
    p.add_argument("--sequential", action="store_true", help="open boxes one at a time")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="also write label,count,p,stderr here")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("pointer", parents=[scen], help="simulated weak measurement (JSON)")
    p.add_argument("--observable", required=True)
    p.add_argument("--time", required=True)
    p.add_argument("--g", type=float, default=pointer.DEFAULT_G)
    p.add_argument("--sigma", type=float, default=pointer.DEFAULT_SIGMA)
    p.add_argument("--points", type=int, default=pointer.DEFAULT_POINTS)
    p.add_argument("--length", type=float, default=pointer.DEFAULT_LENGTH)
    p.set_defaults(func=cmd_pointer)

    p = sub.add_parser("theorem-check", parents=[scen], help="certainty <=> weak value for dichotomic observables")
    p.add_argument("--observables", default="P1")
    p.add_argument("--time", default="t1")
    p.add_argument("--random", type=int, default=0, help="run N constructed random certainty cases instead")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_theorem_check)

    p = sub.add_parser("deterministic-set", parents=[scen], help="classify observables at one time (CSV)")
    p.add_argument("--observables", default="P1,P2,P3,SX,SY,SZ,I")
    p.add_argument("--time", required=True)
    p.set_defaults(func=cmd_deterministic_set)
    return parser


def run_command(argv=None):
    parser = build_parser()
    result = CommandResult(0)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        result.exit_code = 0 if exc.code in (0, None) else 2
        return result
    try:
        args.func(args, result)
    except (UsageError, ParseError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        result.exit_code = 2
    except TwoTimeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        result.exit_code = 1
    except ValueError as exc:
        print(f"ValueError: {exc}", file=sys.stderr)
        result.exit_code = 1
    return result


def main(argv=None):
    sys.exit(run_command(argv).exit_code)


if __name__ == "__main__":
    main()
