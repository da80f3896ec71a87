"""Command-line front end: ``prioq analyze | simulate | validate``.

Exit codes: 0 success, 1 validation-suite failure, 2 input error,
3 instability.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .checks import run_suite
from .errors import InstabilityError, PrioqError
from .model import SystemSpec, load_system, require_valid
from .priority import system_report
from .sim.runner import SimConfig, estimate_all, run_replications

EXIT_OK, EXIT_SUITE_FAILED, EXIT_INPUT, EXIT_UNSTABLE = 0, 1, 2, 3

CLASS_COLUMNS = ("lam", "rho", "eq_mean_H", "W_pr", "W_np", "D_pr", "U_pr", "U_np")
AGGREGATES = ("rho", "EU", "conservation_rhs", "f1", "f2")


class InputError(Exception):
    """Anything wrong with the model file or the flags; maps to exit code 2."""


@dataclass
class RunManifest:
    model: str
    command: str
    config: dict = field(default_factory=dict)
    version: str = __version__
    seed: int | None = None
    duration_s: float | None = None

    def to_dict(self, timing: bool) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("duration_s")
        return d


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "n/a"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def render_table(headers, rows) -> str:
    cells = [list(map(str, headers))] + [[fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def manifest_lines(manifest: RunManifest) -> str:
    d = manifest.to_dict(timing=True)
    if d["duration_s"] is not None:
        d["duration_s"] = round(d["duration_s"], 3)
    return "\n".join(f"# {k}: {json.dumps(v)}" for k, v in d.items())


def load_model(path: str) -> SystemSpec:
    """Parse and structurally validate a model file; stability is checked by the caller."""
    try:
        system = load_system(path)
    except OSError as exc:
        raise InputError(f"cannot read model file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    report = require_valid(system)
    if report.rho is not None and not report.valid:
        raise InstabilityError(f"model is unstable: rho = {report.rho:.12g} is not below 1", report.rho)
    return system


# ---- subcommands ----------------------------------------------------------


def cmd_analyze(args, manifest: RunManifest):
    report = system_report(load_model(args.model))
    if args.format == "json":
        return report.to_dict()
    rows = [[getattr(c, name) for name in ("k",) + CLASS_COLUMNS] for c in report.classes]
    aggregates = [[name, getattr(report, name)] for name in AGGREGATES]
    return "\n\n".join([render_table(("class",) + CLASS_COLUMNS, rows), render_table(("quantity", "value"), aggregates)])


def cmd_simulate(args, manifest: RunManifest):
    system = load_model(args.model)
    config = SimConfig(args.slots, args.warmup, args.reps, args.seed, args.discipline)
    manifest.config = asdict(config)
    manifest.seed = config.seed
    estimates = estimate_all(system, config, run_replications(system, config))
    if args.format == "json":
        return {name: e.to_dict() for name, e in estimates.items()}
    rows = [[name, e.mean, e.half_width_95, e.replications] for name, e in estimates.items()]
    return render_table(("metric", "mean", "half_width_95", "reps"), rows)


def cmd_validate(args, manifest: RunManifest):
    system = load_model(args.model)
    manifest.config = {"quick": args.quick, "slots": args.slots, "warmup": args.warmup, "reps": args.reps}
    manifest.seed = args.seed
    result = run_suite(system, args.quick, args.slots, args.warmup, args.reps, args.seed)
    if args.format == "json":
        return result.to_dict(), result.passed, result.failures()
    rows = [
        ["PASS" if c.passed else "FAIL", c.kind, c.name, c.value, c.expected, c.gap, c.tolerance]
        for c in result.checks
    ]
    text = render_table(("status", "kind", "check", "value", "expected", "gap", "tolerance"), rows)
    frac = result.simulation_pass_fraction
    summary = f"suite {'PASSED' if result.passed else 'FAILED'}"
    if frac is not None:
        summary += f"; simulation checks passing: {frac:.1%}"
    return text + "\n\n" + summary, result.passed, result.failures()


# ---- argument parsing -----------------------------------------------------


def positive_int(text: str) -> int:
    """Integer flag that also accepts float notation such as ``1e6``."""
    try:
        value = int(text)
    except ValueError:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not value.is_integer():
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        value = int(value)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prioq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"prioq {__version__}")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--model", required=True, metavar="PATH", help="JSON model file")
    shared.add_argument("--format", choices=("table", "json"), default="table")
    shared.add_argument("--out", metavar="PATH", help="write the result here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[shared], help="exact per-class means")

    sim = sub.add_parser("simulate", parents=[shared], help="replicated slot-level simulation")
    sim.add_argument("--discipline", choices=("fcfs", "pr", "np"), default="np")
    sim.add_argument("--slots", type=positive_int, default=1_000_000, help="slots per replication")
    sim.add_argument("--warmup", type=positive_int, default=10_000)
    sim.add_argument("--reps", type=positive_int, default=20)
    sim.add_argument("--seed", type=positive_int, default=0)

    val = sub.add_parser("validate", parents=[shared], help="identity and simulation cross-checks")
    val.add_argument("--quick", action="store_true", help="identity checks only")
    val.add_argument("--slots", type=positive_int, default=1_000_000)
    val.add_argument("--warmup", type=positive_int, default=10_000)
    val.add_argument("--reps", type=positive_int, default=20)
    val.add_argument("--seed", type=positive_int, default=0)
    return parser


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "validate": cmd_validate}


def emit(args, manifest: RunManifest, payload) -> None:
    if args.format == "json":
        # wall-clock time would break byte-identical reruns, so JSON leaves it out
        doc = {"manifest": manifest.to_dict(timing=False), "result": payload}
        text = json.dumps(doc, indent=2, allow_nan=True) + "\n"
    else:
        text = manifest_lines(manifest) + "\n\n" + payload + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    manifest = RunManifest(model=args.model, command=args.command)
    started = time.perf_counter()
    try:
        out = COMMANDS[args.command](args, manifest)
    except InstabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (InputError, PrioqError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    passed = True
    failures = []
    if args.command == "validate":
        out, passed, failures = out
    manifest.duration_s = time.perf_counter() - started
    try:
        emit(args, manifest, out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for c in failures:
        print(f"failed: {c.name} (value {c.value!r}, expected {c.expected!r}, gap {c.gap:.3g})", file=sys.stderr)
    if not passed:
        print("validation suite failed", file=sys.stderr)
        return EXIT_SUITE_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
