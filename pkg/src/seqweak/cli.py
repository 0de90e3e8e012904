"""Command-line front end.

Every command writes a table with the columns
``theta,phi,scheme,label,quantity,value,source`` as CSV or JSON.  Exit status
is 0 on success, 2 for bad arguments and 1 for physics-level failures such as
an orthogonal pre/post pair.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .erasure import PathLabel, Strength, estimate_weak_value, run_protocol, sample_protocol
from .exceptions import SeqweakError
from .scenarios import (
    SWEEP_PARAMETERS,
    SweepSpec,
    resch_steinberg_check,
    run_deterministic_path_experiment,
    sweep,
)
from .table import COLUMNS, ScenarioTable
from .tsvf import (
    SCHEMES,
    SelectionAngles,
    golden_angles,
    named_operator,
    operator_names,
    scenario_probabilities,
    weak_value,
)

OUTPUT_DIR_ENV = "SEQWEAK_OUTPUT_DIR"


def fmt(value: float) -> str:
    """Fixed 10-significant-digit rendering; negative zero prints as 0."""
    if value == 0:
        return "0"
    return f"{value:.10g}"


# --- argument types ---------------------------------------------------------


def angle(text: str) -> float:
    key = text.strip().lower()
    if key in ("golden", "golden+"):
        return golden_angles(+1).theta
    if key == "golden-":
        return golden_angles(-1).theta
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle in radians or golden/golden-: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError("angle must be finite")
    return value


def strength(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"strength must lie in [0, 1], got {text}")
    return value


def coupling(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= math.pi / 2:
        raise argparse.ArgumentTypeError(f"g must lie in (0, pi/2], got {text}")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def path_label(text: str) -> str:
    try:
        return PathLabel.parse(text).name
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def operator(text: str) -> str:
    if text not in operator_names():
        raise argparse.ArgumentTypeError(f"unknown operator {text!r}; choose from {', '.join(operator_names())}")
    return text


# --- commands ---------------------------------------------------------------


def cmd_paradox(args) -> tuple[ScenarioTable, dict]:
    report = run_deterministic_path_experiment(
        +1 if args.root == "+" else -1, args.strength, args.shots, args.seed
    )
    extra = {"checks": [c.as_dict() for c in report.checks], "passed": report.passed}
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise CheckFailure(report.table, extra, f"paradox checks failed: {names}")
    return report.table, extra


def cmd_sweep(args) -> tuple[ScenarioTable, dict]:
    spec = SweepSpec(
        args.param, args.start, args.stop, args.steps, args.theta, args.phi, args.strength, args.shots, args.seed
    )
    return sweep(spec, args.scheme, args.path, args.workers), {}


def cmd_circuit(args) -> tuple[ScenarioTable, dict]:
    angles = SelectionAngles(args.theta, args.phi)
    st = Strength.from_g(args.g) if args.g is not None else Strength(args.strength)
    path = PathLabel.parse(args.path)
    outcome = run_protocol(angles, path, st)
    table = ScenarioTable()
    th, ph = angles.theta, angles.phi
    for br in (outcome.success, outcome.fail):
        table.add(th, ph, "erasure", br.outcome, "probability", br.probability, "circuit")
        table.add(th, ph, "erasure", f"{br.outcome}|phi", "probability", br.postselect_probability, "circuit")
    table.add(th, ph, "distinctPath", path.name, "meterStat", outcome.success.meter_probabilities()[1], "circuit")
    if st.g > 0:
        est = estimate_weak_value(outcome)
        table.add(th, ph, "weakValue", path.name, "weakValueRe", est.real, "circuit")
        table.add(th, ph, "weakValue", path.name, "weakValueIm", est.imag, "circuit")
    if args.shots:
        tally = sample_protocol(angles, path, st, args.shots, args.seed)
        table.add(th, ph, "distinctPath", path.name, "meterStat", tally.meter_one_frequency(), "sampled")
        return table.sorted(), {"tally": tally.as_dict()}
    return table.sorted(), {}


def cmd_abl(args) -> tuple[ScenarioTable, dict]:
    return scenario_probabilities(SelectionAngles(args.theta, args.phi), args.scheme).sorted(), {}


def cmd_weakvalue(args) -> tuple[ScenarioTable, dict]:
    angles = SelectionAngles(args.theta, args.phi)
    tsv = angles.tsv()
    table = ScenarioTable()
    for name in args.op:
        w = weak_value(tsv, named_operator(name))
        table.add(angles.theta, angles.phi, "weakValue", name, "weakValueRe", w.real)
        table.add(angles.theta, angles.phi, "weakValue", name, "weakValueIm", w.imag)
    return table.sorted(), {}


def cmd_resch(args) -> tuple[ScenarioTable, dict]:
    angles = SelectionAngles(args.theta, args.phi)
    rows = resch_steinberg_check(angles, named_operator(args.a1), named_operator(args.a2), args.g)
    table = ScenarioTable()
    for row in rows:
        label = f"{args.a2}.{args.a1}|g={row.g:.10g}"
        table.add(angles.theta, angles.phi, "correlation", label, "meterStat", row.simulated, "circuit")
        table.add(angles.theta, angles.phi, "correlation", label, "meterStat", row.rhs, "closedForm")
    return table.sorted(), {}


class CheckFailure(SeqweakError):
    def __init__(self, table, extra, message):
        super().__init__(message)
        self.table, self.extra = table, extra


# --- output -----------------------------------------------------------------


def render_csv(table: ScenarioTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in table:
        writer.writerow([fmt(r.theta), fmt(r.phi), r.scheme, r.label, r.quantity, fmt(r.value), r.source])
    return buf.getvalue()


def _num(value):
    if isinstance(value, bool) or not isinstance(value, float):
        return value
    return float(fmt(value))


def render_json(table: ScenarioTable, meta: dict, extra: dict) -> str:
    rows = [{k: _num(v) for k, v in r.as_dict().items()} for r in table]
    extra = json.loads(json.dumps(extra, default=float), parse_float=lambda s: _num(float(s)))
    doc = {"metadata": meta, "rows": rows, **extra}
    return json.dumps(doc, indent=2) + "\n"


def _add_common(p: argparse.ArgumentParser, angles: bool = True) -> None:
    if angles:
        p.add_argument("--theta", type=angle, default=0.0, help="pre-selection angle (radians, golden, golden-)")
        p.add_argument("--phi", type=angle, default=0.0, help="post-selection angle (radians, golden, golden-)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", "-o", help=f"output file (relative paths resolve against ${OUTPUT_DIR_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqweak", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("paradox", help="deterministic-path report at a golden root")
    p.add_argument("--root", choices=("+", "-"), default="+")
    p.add_argument("--strength", type=strength, nargs="+", default=[1.0])
    p.add_argument("--shots", type=nonnegative_int, default=100_000)
    p.add_argument("--seed", type=int, default=42)
    _add_common(p, angles=False)
    p.set_defaults(func=cmd_paradox)

    p = sub.add_parser("sweep", help="tabulate a scheme over a parameter grid")
    p.add_argument("--param", choices=SWEEP_PARAMETERS, required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=positive_int, default=41)
    p.add_argument("--scheme", choices=SCHEMES, default="distinctPath")
    p.add_argument("--path", type=path_label)
    p.add_argument("--strength", type=strength, default=1.0)
    p.add_argument("--shots", type=positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=positive_int)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("circuit", help="run the erasure circuit once")
    p.add_argument("--path", type=path_label, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--strength", type=strength, default=1.0)
    group.add_argument("--g", type=coupling, help="raw rotation angle instead of --strength")
    p.add_argument("--shots", type=nonnegative_int, default=0)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("abl", help="closed-form ABL probabilities")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_abl)

    p = sub.add_parser("weakvalue", help="weak values of named operators")
    p.add_argument("--op", type=operator, nargs="+", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_weakvalue)

    p = sub.add_parser("resch", help="two-meter correlation against the weak-value formula")
    p.add_argument("--a1", type=operator, default="P1", help="operator coupled at t1")
    p.add_argument("--a2", type=operator, default="Pplus", help="operator coupled at t2")
    p.add_argument("--g", type=coupling, nargs="+", default=[0.1, 0.05, 0.025])
    _add_common(p)
    p.set_defaults(func=cmd_resch)
    return parser


def _destination(name: str) -> Path:
    path = Path(name)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _emit(text: str, args) -> None:
    if args.output:
        dest = _destination(args.output)
        dest.parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    status = 0
    try:
        table, extra = args.func(args)
    except CheckFailure as exc:
        table, extra = exc.table, exc.extra
        print(f"seqweak: {exc}", file=sys.stderr)
        status = 1
    except SeqweakError as exc:
        print(f"seqweak: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"seqweak: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2

    if args.format == "csv":
        text = render_csv(table)
    else:
        meta = {"version": __version__, "command": args.command, "seed": getattr(args, "seed", None), "argv": argv}
        text = render_json(table, meta, extra)
    _emit(text, args)
    return status


if __name__ == "__main__":
    sys.exit(main())
