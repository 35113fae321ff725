"""CSV output for runs, sweeps, analytic grids and decision logs.

Floats are written with 6 significant digits, rows end in ``\\n``.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from typing import Dict, Iterable, List, Sequence

from .scheduler import Decision, DropReason
from .simulator import FlowMetrics, Metrics, SweepPoint

RUN_COLUMNS = [
    "run", "seed", "discipline", "flow", "source", "group", "centrality", "rate_pps",
    "generated", "enqueued", "delivered", "dropped", "tail_drop", "low_centrality",
    "feasibility", "evicted", "residual", "delivery_rate", "loss_rate",
    "throughput_bps", "mean_delay_s",
]

SWEEP_COLUMNS = [
    "knob", "value", "replication", "seed", "discipline", "flows", "generated", "delivered",
    "dropped", "residual", "delivery_rate", "loss_rate", "throughput_bps", "mean_delay_s",
]
SWEEP_STATS = ["generated", "delivered", "dropped", "residual", "delivery_rate", "loss_rate",
               "throughput_bps", "mean_delay_s"]

DECISION_COLUMNS = ["time", "action", "flow", "seqno", "reason", "mode", "occupancy"]


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.6g}"
    return str(v)


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _flow_row(run: int, m: Metrics, f: FlowMetrics, flow_label) -> list:
    return [
        run, m.seed, m.discipline, flow_label, f.source, f.group, f.centrality, f.rate,
        f.generated, f.enqueued, f.delivered, f.dropped_total,
        f.dropped[DropReason.TAIL.value], f.dropped[DropReason.LOW_CENTRALITY.value],
        f.dropped[DropReason.FEASIBILITY.value], f.dropped[DropReason.EVICTED.value],
        f.residual, f.delivery_rate, f.loss_rate, m.throughput_bps(f), f.mean_delay,
    ]


def run_rows(runs: Sequence[Metrics]) -> List[list]:
    rows = []
    for i, m in enumerate(runs):
        for f in m.flows:
            rows.append(_flow_row(i, m, f, f.flow))
        agg = m.aggregate()
        row = _flow_row(i, m, agg, "all")
        row[6] = ""
        rows.append(row)
    return rows


def write_rows(out, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    w = _writer(out)
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def runs_csv(runs: Sequence[Metrics]) -> str:
    buf = io.StringIO()
    write_rows(buf, RUN_COLUMNS, run_rows(runs))
    return buf.getvalue()


def _sweep_values(m: Metrics) -> Dict[str, float]:
    agg = m.aggregate()
    return {
        "generated": agg.generated,
        "delivered": agg.delivered,
        "dropped": agg.dropped_total,
        "residual": agg.residual,
        "delivery_rate": agg.delivery_rate,
        "loss_rate": agg.loss_rate,
        "throughput_bps": m.throughput_bps(agg),
        "mean_delay_s": agg.mean_delay,
    }


def sweep_csv(knob: str, base_seed: int, points: Sequence[SweepPoint]) -> str:
    """Per-replication aggregate rows, then a ``mean`` and a ``stddev`` row per value.

    ``stddev`` is the population standard deviation, so it is 0 for one replication.
    """
    buf = io.StringIO()
    buf.write(f"# seed(point i, replication r) = {base_seed} + 1000*i + r; i indexes sorted values\n")
    rows = []
    by_value: Dict[float, List[Dict[str, float]]] = {}
    for p in points:
        vals = _sweep_values(p.metrics)
        by_value.setdefault(p.value, []).append(vals)
        rows.append([knob, p.value, p.replication, p.seed, p.metrics.discipline, len(p.metrics.flows)]
                    + [vals[c] for c in SWEEP_STATS])
    for value, reps in by_value.items():
        head = [p for p in points if p.value == value][0]
        n_flows, disc = len(head.metrics.flows), head.metrics.discipline
        means = [statistics.fmean(float(r[c]) for r in reps) for c in SWEEP_STATS]
        sds = [statistics.pstdev(float(r[c]) for r in reps) for c in SWEEP_STATS]
        rows.append([knob, value, "mean", "", disc, n_flows] + means)
        rows.append([knob, value, "stddev", "", disc, n_flows] + sds)
    write_rows(buf, SWEEP_COLUMNS, rows)
    return buf.getvalue()


def decisions_csv(decisions: Iterable[Decision]) -> str:
    buf = io.StringIO()
    write_rows(buf, DECISION_COLUMNS, ([d.time, d.action, d.flow, d.seqno, d.reason, d.mode, d.occupancy]
                                       for d in decisions))
    return buf.getvalue()


def read_csv(text: str) -> List[Dict[str, str]]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
