"""Command-line entry point: ``popaware {run,sweep,analyze,validate,scenario}``.

Exit codes: 0 ok, 2 usage, 3 parse, 4 validation, 5 runtime. Every failure
prints one line ``error[CODE]: message`` on stderr.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import analysis, report
from .scenario_file import ParseError, ValidationError, dump_scenario, load_scenario
from .scenarios import build_canonical_scenario, build_overload_scenario
from .simulator import Discipline, Knob, ScenarioError, SweepError, run, sweep

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: str, status: int, message: str):
        super().__init__(message)
        self.code, self.status = code, status


def _load(path: str):
    p = Path(path)
    if not p.is_file():
        raise CliError("E_NOFILE", EXIT_PARSE, f"{path}: no such scenario file")
    try:
        return load_scenario(p)
    except ParseError as e:
        raise CliError("E_PARSE", EXIT_PARSE, str(e)) from e
    except ValidationError as e:
        raise CliError("E_VALIDATION", EXIT_VALIDATION, str(e)) from e


def _override(s, args):
    changes = {}
    if getattr(args, "discipline", None):
        changes["discipline"] = Discipline(args.discipline)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "replications", None) is not None:
        changes["replications"] = args.replications
    s = replace(s, **changes)
    try:
        s.validate()
    except ScenarioError as e:
        raise CliError("E_VALIDATION", EXIT_VALIDATION, f"{e.field}: {e}" if e.field else str(e)) from e
    return s


def _emit(text: str, output: Optional[str]) -> None:
    if output and output != "-":
        with open(output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    s = _override(_load(args.scenario), args)
    runs = []
    for r in range(s.replications):
        runs.append(run(replace(s, seed=s.seed + r), record_decisions=bool(args.decision_log)))
    _emit(report.runs_csv(runs), args.output)
    if args.decision_log:
        with open(args.decision_log, "w", newline="") as fh:
            for i, m in enumerate(runs):
                text = report.decisions_csv(m.decisions or [])
                fh.write(text if i == 0 else text.split("\n", 1)[1])
    if args.summary:
        summary = []
        for m in runs:
            agg = m.aggregate()
            summary.append({
                "discipline": m.discipline, "seed": m.seed, "duration": m.duration,
                "flows": len(m.flows), "generated": agg.generated, "delivered": agg.delivered,
                "dropped": agg.dropped_total, "residual": agg.residual,
                "delivery_rate": agg.delivery_rate, "mean_delay_s": agg.mean_delay,
                "conserved": m.conserved(),
            })
        Path(args.summary).write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def _numbers(text: str) -> List[float]:
    """``"1,2,5"`` or ``"start:stop:step"`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _clean(v: float):
    return int(v) if float(v).is_integer() else v


def cmd_sweep(args) -> int:
    s = _override(_load(args.scenario), args)
    values = [_clean(v) for v in args.values]
    try:
        points = sweep(s, Knob(args.knob), values, workers=args.workers)
    except SweepError as e:
        if isinstance(e.__cause__, ScenarioError):
            raise CliError("E_VALIDATION", EXIT_VALIDATION, str(e)) from e
        raise CliError("E_RUNTIME", EXIT_RUNTIME, str(e)) from e
    _emit(report.sweep_csv(args.knob, s.seed, points), args.output)
    return EXIT_OK


ANALYZE_COLUMNS = [
    "m", "load", "kappa_k", "kappa_n", "alpha", "rate",
    "prob_not_transferred", "prob_already_transferred", "packet_transfer_prob",
    "transmission_score", "expected_delay_term", "delay_score",
    "residual_transmission", "residual_delay",
]


def cmd_analyze(args) -> int:
    rows = []
    for m, load, kk, kn, alpha, rate in itertools.product(
        args.m, args.load, args.kappa_k, args.kappa_n, args.alpha, args.rate
    ):
        if m != int(m) or m < 2:
            raise CliError("E_VALIDATION", EXIT_VALIDATION, f"m must be an integer >= 2, got {m}")
        if kn > m - 1:
            raise CliError("E_VALIDATION", EXIT_VALIDATION, f"kappa_n <= m-1 violated: kappa_n={kn}, m={int(m)}")
        if not kk > 0:
            raise CliError("E_VALIDATION", EXIT_VALIDATION, f"kappa_k > 0 violated: kappa_k={kk}")
        try:
            p = analysis.AnalysisParams(m=int(m), load=load, kappa_k=kk, kappa_n=kn, alpha=alpha, rate=rate)
        except analysis.AnalysisError as e:
            raise CliError("E_VALIDATION", EXIT_VALIDATION, str(e)) from e
        r_tr, r_dt = analysis.fd_residuals(p, args.step)
        rows.append([
            int(m), load, kk, kn, alpha, rate,
            analysis.prob_not_transferred(p), analysis.prob_already_transferred(p),
            analysis.packet_transfer_prob(p), analysis.transmission_score(p),
            analysis.expected_delay_term(p), analysis.delay_score(p), r_tr, r_dt,
        ])
    buf = io.StringIO()
    report.write_rows(buf, ANALYZE_COLUMNS, rows)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    s = _load(args.scenario)
    print(f"ok: {len(s.flows)} flows, {len(s.graph.nodes)} nodes, offered load {s.offered_load:.6g}x link")
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.kind == "canonical":
        s = build_canonical_scenario(rate=args.rate or 4.0, duration=args.duration, seed=args.seed)
    else:
        s = build_overload_scenario(n_flows=args.flows, load_factor=args.load_factor,
                                    duration=args.duration, seed=args.seed)
    _emit(dump_scenario(s), args.output)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("E_USAGE", EXIT_USAGE, f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="popaware", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_opts(p):
        p.add_argument("scenario", help="YAML scenario file")
        p.add_argument("--discipline", choices=[d.value for d in Discipline])
        p.add_argument("--seed", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--output", "-o", help="CSV destination (default stdout)")

    p = sub.add_parser("run", help="simulate a scenario and write per-flow CSV")
    scenario_opts(p)
    p.add_argument("--decision-log", help="write enqueue/dequeue/drop decisions as CSV")
    p.add_argument("--summary", help="write a JSON run summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one scenario over a range of one knob")
    scenario_opts(p)
    p.add_argument("--knob", required=True, choices=[k.value for k in Knob])
    p.add_argument("--values", required=True, type=_numbers, help="'10,30,50' or '10:50:10'")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="evaluate the analytic model over a parameter grid")
    p.add_argument("--m", type=_numbers, default=[10.0])
    p.add_argument("--load", type=_numbers, default=[1.0])
    p.add_argument("--kappa-k", type=_numbers, default=[1.0])
    p.add_argument("--kappa-n", type=_numbers, default=[0.0])
    p.add_argument("--alpha", type=_numbers, default=[0.3])
    p.add_argument("--rate", type=_numbers, default=[0.1])
    p.add_argument("--step", type=float, default=1e-5, help="finite-difference step")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="parse and validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenario", help="write a built-in scenario as YAML")
    p.add_argument("kind", choices=["canonical", "overload"])
    p.add_argument("--flows", type=int, default=40)
    p.add_argument("--load-factor", type=float, default=1.5)
    p.add_argument("--rate", type=float)
    p.add_argument("--duration", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as e:
        print(f"error[{e.code}]: {e}", file=sys.stderr)
        return e.status
    except (ValueError, OSError) as e:
        print(f"error[E_RUNTIME]: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
