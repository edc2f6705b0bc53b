"""Command-line interface.

Commands:
  compile    build a schedule file for a target state, report hardware feasibility
  verify     simulate a schedule and evaluate its entanglement criteria
  memory     sweep the storage experiment over delays
  selfcheck  run the built-in consistency suite

Exit codes: 0 success, 1 usage or parse error, 2 hardware infeasibility
under --strict-hardware, 3 selfcheck failure.  All tabular outputs are CSV
with fixed columns; identical seeds and flags produce byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import verifier
from .compiler import TargetState, compile_target, hardware_check
from .engine import MAX_UNROLLED_BINS, memory_experiment, run_loop_sampled, run_unrolled
from .gaussian import SqueezerSpec
from .schedule import (ControlSchedule, NoiseConfig, ScheduleFormatError,
                       parse_schedule, serialize_schedule)
from .selfcheck import run_selfcheck
from .verifier import (InseparabilitySpec, estimate, nullifiers_for,
                       plan_measurements, stream_nullifier_variances,
                       variance_analytic)

_TARGET_CHOICES = ("epr", "ghz", "star", "cluster1d", "cluster2", "infinite")


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _target_from_name(name: str, n: int) -> TargetState:
    if name == "epr":
        return TargetState.epr()
    if name == "ghz":
        return TargetState.ghz(n)
    if name == "star":
        return TargetState.star_cluster(n)
    if name == "cluster1d":
        return TargetState.linear_cluster(n)
    if name == "cluster2":
        return TargetState.linear_cluster(2)
    if name == "infinite":
        return TargetState.infinite_cluster(n)
    raise ValueError(name)


def _infer_target(schedule: ControlSchedule) -> tuple[str, TargetState]:
    """Match a schedule's (T, theta) pattern against the compiled targets."""
    ts = np.array(schedule.transmissivities())
    thetas = np.array([t % 360.0 for t in schedule.thetas()])

    def matches(candidate: TargetState) -> bool:
        ref = compile_target(candidate)
        if len(ref.bins) != len(schedule.bins):
            return False
        rts = np.array(ref.transmissivities())
        rth = np.array([t % 360.0 for t in ref.thetas()])
        return bool(np.max(np.abs(rts - ts)) < 1e-9
                    and np.max(np.abs((rth - thetas + 180.0) % 360.0 - 180.0)) < 1e-9)

    n = schedule.num_outputs
    candidates = [
        ("epr", TargetState.epr()),
        ("cluster2", TargetState.linear_cluster(2)),
        ("ghz", TargetState.ghz(max(n, 2))),
        ("cluster1d", TargetState.linear_cluster(max(n, 2))),
        ("star", TargetState.star_cluster(max(n, 2))),
        ("infinite", TargetState.infinite_cluster(max(n, 2))),
    ]
    for name, cand in candidates:
        try:
            if matches(cand):
                return name, cand
        except ValueError:
            continue
    raise ValueError(
        "schedule does not match any compiled target pattern; "
        "cannot infer which criteria to evaluate")


def _reproduction_line(argv: list[str]) -> str:
    return "loopsynth " + " ".join(argv)


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text)


# ---------------------------------------------------------------------------
# compile
# ---------------------------------------------------------------------------


def _cmd_compile(args, argv) -> int:
    try:
        target = _target_from_name(args.target, args.n)
        schedule = compile_target(target)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.output or f"{args.target}.json"
    _write_text(out, serialize_schedule(schedule))
    report = hardware_check(schedule)
    print(f"# {_reproduction_line(argv)}")
    print(f"wrote {out}: {len(schedule.bins)} bins for {args.target}(n={target.n})")
    for axis in (report.delta, report.theta):
        req = ", ".join(f"{v:.4f}" for v in axis.required) or "(none)"
        if axis.feasible:
            wit = axis.witness
            levels = "default level only" if wit is None else \
                f"drive levels v1={wit[0]:.4f}, v2={wit[1]:.4f}"
            print(f"{axis.name}: feasible; required {{{req}}} deg; {levels}")
        else:
            print(f"{axis.name}: INFEASIBLE; required nonzero values {{{req}}} deg "
                  "do not fit {0, v1, v2, v1+v2}")
    if not report.feasible and args.strict_hardware:
        return 2
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    label: str
    analytic: float
    sampled: float
    stderr: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.sampled < self.threshold


def _pair_rows(schedule, source, criteria, shots, seed, window) -> list[ReportRow]:
    state = run_unrolled(schedule, source)
    groups = plan_measurements(criteria, schedule.num_outputs, shots)
    seeds = np.random.SeedSequence(seed).spawn(len(groups))
    results = {}
    for (plan, specs), child in zip(groups, seeds):
        samples = run_loop_sampled(schedule, source, plan, seed=child)
        for spec in specs:
            results[spec] = estimate(samples, spec)
    rows = []
    for crit in criteria:
        analytic = variance_analytic(state, crit.first) \
            + variance_analytic(state, crit.second)
        a, b = results[crit.first], results[crit.second]
        rows.append(ReportRow(
            label=crit.label, analytic=analytic, sampled=a.value + b.value,
            stderr=float(np.hypot(a.stderr, b.stderr)),
            threshold=crit.threshold))
    return rows


def _nullifier_rows(schedule, source, specs, shots, seed, window) -> list[ReportRow]:
    analytic = stream_nullifier_variances(schedule, source, specs, window=window)
    groups = plan_measurements(specs, schedule.num_outputs, shots)
    seeds = np.random.SeedSequence(seed).spawn(len(groups))
    results = {}
    for (plan, members), child in zip(groups, seeds):
        samples = run_loop_sampled(schedule, source, plan, seed=child)
        for spec in members:
            results[spec] = estimate(samples, spec)
    return [
        ReportRow(label=spec.label, analytic=ana, sampled=results[spec].value,
                  stderr=results[spec].stderr,
                  threshold=verifier.NULLIFIER_THRESHOLD)
        for spec, ana in zip(specs, analytic)
    ]


def _cmd_verify(args, argv) -> int:
    try:
        text = Path(args.schedule).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        schedule = parse_schedule(text)
    except ScheduleFormatError as exc:
        print(f"error: {args.schedule}: {exc}", file=sys.stderr)
        return 1

    noise = schedule.noise
    if args.ideal:
        noise = NoiseConfig(mode="ideal")
    elif args.realistic:
        noise = NoiseConfig(mode="realistic")
    if args.efficiency is not None:
        noise = NoiseConfig(
            loop_loss_per_trip=noise.loop_loss_per_trip,
            phase_jitter_deg_per_trip=noise.phase_jitter_deg_per_trip,
            detection_efficiency=args.efficiency, mode="realistic")
    schedule = ControlSchedule(bins=schedule.bins, tau_ns=schedule.tau_ns,
                               noise=noise)

    try:
        name, target = _infer_target(schedule)
        source = SqueezerSpec(args.squeeze_db, args.antisqueeze_db)
        criteria = nullifiers_for(target)
        if criteria and isinstance(criteria[0], InseparabilitySpec):
            if len(schedule.bins) > MAX_UNROLLED_BINS:
                print("error: paired criteria need a dense reference run; "
                      f"schedule has {len(schedule.bins)} bins", file=sys.stderr)
                return 1
            rows = _pair_rows(schedule, source, criteria, args.shots,
                              args.seed, args.window)
        else:
            rows = _nullifier_rows(schedule, source, criteria, args.shots,
                                   args.seed, args.window)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    header = [
        f"# {_reproduction_line(argv)}",
        f"target: {name}(n={target.n})",
        f"schedule: {args.schedule} ({len(schedule.bins)} bins, "
        f"tau {schedule.tau_ns} ns)",
        f"noise: {noise.mode} (loss/trip {noise.loop_loss_per_trip}, "
        f"jitter/trip {noise.phase_jitter_deg_per_trip} deg, "
        f"detection efficiency {noise.detection_efficiency})",
        f"source: {args.squeeze_db} dB squeeze / {args.antisqueeze_db} dB antisqueeze",
        f"shots: {args.shots}   seed: {args.seed}   window: {args.window}",
    ]
    print("\n".join(header))
    width = max(len(r.label) for r in rows) + 2
    print(f"{'criterion':<{width}}{'analytic':>10}{'sampled':>10}"
          f"{'stderr':>9}{'threshold':>11}  pass")
    for r in rows:
        print(f"{r.label:<{width}}{r.analytic:>10.4f}{r.sampled:>10.4f}"
              f"{r.stderr:>9.4f}{r.threshold:>11.2f}  {'yes' if r.passed else 'NO'}")

    csv_path = args.csv or (Path(args.schedule).stem + "_report.csv")
    lines = [f"# {_reproduction_line(argv)}", "criterion,analytic,sampled,stderr,pass"]
    lines += [f"{r.label},{r.analytic!r},{r.sampled!r},{r.stderr!r},"
              f"{'true' if r.passed else 'false'}" for r in rows]
    _write_text(csv_path, "\n".join(lines) + "\n")
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# memory
# ---------------------------------------------------------------------------


def _cmd_memory(args, argv) -> int:
    if args.ideal:
        noise = NoiseConfig(mode="ideal")
    else:
        noise = NoiseConfig(mode="realistic", loop_loss_per_trip=args.loss,
                            phase_jitter_deg_per_trip=args.jitter,
                            detection_efficiency=args.efficiency)
    source = SqueezerSpec(args.squeeze_db, args.antisqueeze_db)
    tau = 66.0
    rows = []
    for n in range(1, args.max_n + 1):
        value = memory_experiment(n, source, noise, accumulation=args.accumulation)
        stderr = float(value / np.sqrt(args.shots - 1))  # two equal-variance terms
        rows.append((n, n * tau, value, stderr))
    print(f"# {_reproduction_line(argv)}")
    print(f"{'n':>3}{'delay_ns':>10}{'inseparability':>16}{'stderr':>9}")
    for n, delay, value, stderr in rows:
        print(f"{n:>3}{delay:>10.1f}{value:>16.4f}{stderr:>9.4f}")
    csv_path = args.csv or "memory_sweep.csv"
    lines = [f"# {_reproduction_line(argv)}", "n,delay_ns,inseparability,stderr"]
    lines += [f"{n},{delay!r},{value!r},{stderr!r}" for n, delay, value, stderr in rows]
    _write_text(csv_path, "\n".join(lines) + "\n")
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# selfcheck
# ---------------------------------------------------------------------------


def _cmd_selfcheck(args, argv) -> int:
    results = run_selfcheck(fault=args.inject_fault)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    if failed:
        print(f"selfcheck failed: {failed[0].name}", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="loopsynth",
                     description="Loop-based entanglement synthesizer toolchain")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a target state to a schedule file",
                       parents=[], add_help=True)
    c.add_argument("target", choices=_TARGET_CHOICES)
    c.add_argument("--n", type=int, default=3,
                   help="mode count (cluster length for 'infinite')")
    c.add_argument("-o", "--output", default=None, help="schedule file path")
    c.add_argument("--strict-hardware", action="store_true",
                   help="exit 2 when the schedule is not hardware-realizable")

    v = sub.add_parser("verify", help="simulate a schedule and check its criteria")
    v.add_argument("schedule")
    v.add_argument("--shots", type=int, default=5000)
    v.add_argument("--seed", type=int, default=12345)
    v.add_argument("--window", type=int, default=8)
    group = v.add_mutually_exclusive_group()
    group.add_argument("--ideal", action="store_true",
                       help="force the noise-free model")
    group.add_argument("--realistic", action="store_true",
                       help="force realistic defaults (7%% loss, 7 deg jitter)")
    v.add_argument("--efficiency", type=float, default=None,
                   help="detection efficiency (implies realistic mode)")
    v.add_argument("--squeeze-db", type=float, default=5.0)
    v.add_argument("--antisqueeze-db", type=float, default=8.0)
    v.add_argument("--csv", default=None, help="report CSV path")

    m = sub.add_parser("memory", help="storage-experiment sweep over delays")
    m.add_argument("--max-n", type=int, default=11)
    m.add_argument("--loss", type=float, default=0.07)
    m.add_argument("--jitter", type=float, default=7.0)
    m.add_argument("--efficiency", type=float, default=1.0)
    m.add_argument("--ideal", action="store_true", help="noise-free sweep")
    m.add_argument("--accumulation", choices=("random_walk", "linear"),
                   default="random_walk",
                   help="how per-trip jitter accumulates over the delay")
    m.add_argument("--shots", type=int, default=5000,
                   help="shot count assumed for the stderr column")
    m.add_argument("--squeeze-db", type=float, default=5.0)
    m.add_argument("--antisqueeze-db", type=float, default=8.0)
    m.add_argument("--csv", default=None, help="sweep CSV path")

    s = sub.add_parser("selfcheck", help="run the built-in consistency suite")
    s.add_argument("--inject-fault", choices=("bs-sign",), default=None,
                   help=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "compile": _cmd_compile,
        "verify": _cmd_verify,
        "memory": _cmd_memory,
        "selfcheck": _cmd_selfcheck,
    }
    return handlers[args.command](args, argv)


if __name__ == "__main__":
    sys.exit(main())
