"""Discrete-event model of CBR senders sharing one relay queue.

The relay is a non-preemptive single server; a packet of ``size`` bytes
holds the link for ``size * 8 / link_rate`` seconds. There is no MAC
contention and no propagation delay.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from .flow import Flow
from .scheduler import Decision, DropReason, Enqueued, Packet, PopAwareQueue
from .social_graph import GraphError, SocialGraph, degree_centrality

log = logging.getLogger(__name__)

# event kinds, in dispatch order for equal timestamps
SERVICE_DONE, ARRIVAL, TICK = 0, 1, 2

PHASE_EPSILON = 1e-6


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending setting, e.g. ``flows[3].rate``."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


class Discipline(str, Enum):
    POP_AWARE = "pop-aware"
    FIFO = "fifo"


@dataclass(frozen=True)
class FlowSpec:
    source: str
    rate: float  # packets per second
    size: int = 512  # bytes


@dataclass(frozen=True)
class Scenario:
    graph: SocialGraph
    flows: Tuple[FlowSpec, ...]
    link_rate: float = 2e6
    queue_capacity: int = 64
    duration: float = 200.0
    discipline: Discipline = Discipline.POP_AWARE
    seed: int = 1
    replications: int = 1
    window: float = 1.0
    tick: float = 1.0

    def validate(self) -> None:
        if not self.duration > 0:
            raise ScenarioError(f"duration must be > 0, got {self.duration}", "run.duration")
        if not self.link_rate > 0:
            raise ScenarioError(f"link rate must be > 0, got {self.link_rate}", "link.rate")
        if self.queue_capacity < 1:
            raise ScenarioError(f"queue capacity must be >= 1, got {self.queue_capacity}", "queue.capacity")
        if self.replications < 1:
            raise ScenarioError(f"replications must be >= 1, got {self.replications}", "run.replications")
        if not self.window > 0:
            raise ScenarioError(f"load window must be > 0, got {self.window}", "run.window")
        if not self.flows:
            raise ScenarioError("scenario has no flows", "flows")
        for i, fs in enumerate(self.flows):
            if fs.source not in self.graph.group_of:
                raise ScenarioError(f"source {fs.source!r} is not a graph node", f"flows[{i}].source")
            if not fs.rate > 0:
                raise ScenarioError(f"rate must be > 0, got {fs.rate}", f"flows[{i}].rate")
            if fs.size <= 0:
                raise ScenarioError(f"size must be > 0, got {fs.size}", f"flows[{i}].size")
            try:
                degree_centrality(self.graph, fs.source)
            except GraphError as e:
                raise ScenarioError(str(e), f"flows[{i}].source") from e

    @property
    def capacity_pps(self) -> float:
        """Link capacity in packets/s at the mean packet size."""
        mean_size = sum(f.size for f in self.flows) / len(self.flows)
        return self.link_rate / (mean_size * 8)

    @property
    def offered_load(self) -> float:
        """Offered bits over link bits."""
        return sum(f.rate * f.size * 8 for f in self.flows) / self.link_rate


@dataclass
class FlowMetrics:
    flow: int
    source: str
    group: str
    centrality: float
    rate: float
    generated: int = 0
    enqueued: int = 0
    delivered: int = 0
    dropped: Counter = field(default_factory=Counter)
    residual: int = 0
    bytes_generated: int = 0
    bytes_delivered: int = 0
    delays: List[float] = field(default_factory=list)

    @property
    def dropped_total(self) -> int:
        return sum(self.dropped.values())

    @property
    def delivery_rate(self) -> float:
        return self.delivered / self.generated if self.generated else 0.0

    @property
    def loss_rate(self) -> float:
        return self.dropped_total / self.generated if self.generated else 0.0

    @property
    def mean_delay(self) -> float:
        return math.fsum(self.delays) / len(self.delays) if self.delays else math.nan

    def conserved(self) -> bool:
        return self.generated == self.delivered + self.dropped_total + self.residual


@dataclass(frozen=True)
class TickSample:
    time: float
    queue_length: int
    load: float
    mode: str
    delivered: int
    dropped: int


@dataclass
class Metrics:
    discipline: str
    seed: int
    duration: float
    link_rate: float
    flows: List[FlowMetrics]
    ticks: List[TickSample] = field(default_factory=list)
    decisions: Optional[List[Decision]] = None

    def aggregate(self) -> FlowMetrics:
        agg = FlowMetrics(flow=-1, source="*", group="*", centrality=math.nan,
                          rate=sum(f.rate for f in self.flows))
        for f in self.flows:
            agg.generated += f.generated
            agg.enqueued += f.enqueued
            agg.delivered += f.delivered
            agg.dropped.update(f.dropped)
            agg.residual += f.residual
            agg.bytes_generated += f.bytes_generated
            agg.bytes_delivered += f.bytes_delivered
            agg.delays.extend(f.delays)
        return agg

    def throughput_bps(self, f: FlowMetrics) -> float:
        return f.bytes_delivered * 8 / self.duration

    def conserved(self) -> bool:
        return all(f.conserved() for f in self.flows) and self.aggregate().conserved()


def build_flows(s: Scenario) -> List[Flow]:
    return [
        Flow(
            id=i,
            source=fs.source,
            inter_arrival=1.0 / fs.rate,
            tx_cost=fs.size * 8 / s.link_rate,
            centrality=degree_centrality(s.graph, fs.source),
        )
        for i, fs in enumerate(s.flows)
    ]


def phase_offsets(s: Scenario) -> List[float]:
    """Start time of each flow's first packet: a seeded uniform draw within one
    inter-arrival period plus ``index * PHASE_EPSILON``."""
    rng = random.Random(s.seed)
    return [rng.random() / fs.rate + i * PHASE_EPSILON for i, fs in enumerate(s.flows)]


def run(s: Scenario, record_decisions: bool = False) -> Metrics:
    s.validate()
    flows = build_flows(s)
    decisions: Optional[List[Decision]] = [] if record_decisions else None
    queue = PopAwareQueue(
        s.queue_capacity,
        flows,
        scheduling=s.discipline is Discipline.POP_AWARE,
        window=s.window,
        link_rate=s.link_rate,
        log=decisions.append if decisions is not None else None,
    )
    stats = [
        FlowMetrics(i, fs.source, s.graph.group_of[fs.source], flows[i].centrality, fs.rate)
        for i, fs in enumerate(s.flows)
    ]
    metrics = Metrics(s.discipline.value, s.seed, s.duration, s.link_rate, stats, decisions=decisions)

    seq = [0] * len(flows)
    offsets = phase_offsets(s)
    events: List[Tuple[float, int, int, int]] = []
    for i, t0 in enumerate(offsets):
        if t0 < s.duration:
            events.append((t0, ARRIVAL, i, 0))
    n_ticks = int(math.floor(s.duration / s.tick + 1e-9))
    events.extend((k * s.tick, TICK, -1, k) for k in range(1, n_ticks + 1))
    heapq.heapify(events)

    in_service: Optional[Packet] = None
    delivered_total = dropped_total = 0

    def start_service(now: float) -> None:
        nonlocal in_service
        p = queue.dequeue(now)
        if p is not None:
            in_service = p
            heapq.heappush(events, (now + p.size * 8 / s.link_rate, SERVICE_DONE, p.flow, p.seqno))

    while events:
        now, kind, fid, k = heapq.heappop(events)
        if now > s.duration:
            break
        if kind == ARRIVAL:
            fs, st = s.flows[fid], stats[fid]
            p = Packet(fid, fs.size, now, seq[fid])
            seq[fid] += 1
            st.generated += 1
            st.bytes_generated += fs.size
            result = queue.enqueue(p, now)
            if isinstance(result, Enqueued):
                st.enqueued += 1
                if result.evicted is not None:
                    stats[result.evicted.flow].dropped[DropReason.EVICTED.value] += 1
                    dropped_total += 1
            else:
                st.dropped[result.reason.value] += 1
                dropped_total += 1
            nxt = offsets[fid] + (k + 1) / fs.rate
            if nxt < s.duration:
                heapq.heappush(events, (nxt, ARRIVAL, fid, k + 1))
            if in_service is None:
                start_service(now)
        elif kind == SERVICE_DONE:
            p = in_service
            in_service = None
            st = stats[p.flow]
            st.delivered += 1
            st.bytes_delivered += p.size
            st.delays.append(now - p.created_at)
            delivered_total += 1
            start_service(now)
        else:
            metrics.ticks.append(
                TickSample(now, len(queue), queue.load.measure(now), queue.mode.value,
                           delivered_total, dropped_total)
            )

    for p in queue.packets():
        stats[p.flow].residual += 1
    if in_service is not None:
        stats[in_service.flow].residual += 1
    return metrics


def run_replications(s: Scenario) -> List[Metrics]:
    """``s.replications`` runs with seeds ``s.seed, s.seed + 1, ...``."""
    return [run(replace(s, seed=s.seed + r)) for r in range(s.replications)]


class Knob(str, Enum):
    CONNECTIONS = "connections"
    RATE = "rate"
    DURATION = "duration"


def apply_knob(base: Scenario, knob: Knob, value: float) -> Scenario:
    if knob is Knob.CONNECTIONS:
        n = int(value)
        if n != value or not 1 <= n <= len(base.flows):
            raise ScenarioError(f"connections={value} outside 1..{len(base.flows)}", "connections")
        return replace(base, flows=base.flows[:n])
    if knob is Knob.RATE:
        return replace(base, flows=tuple(replace(f, rate=float(value)) for f in base.flows))
    return replace(base, duration=float(value))


def sweep_seed(base_seed: int, point: int, replication: int) -> int:
    return base_seed + 1000 * point + replication


@dataclass
class SweepPoint:
    value: float
    replication: int
    seed: int
    metrics: Metrics


class SweepError(RuntimeError):
    pass


def _run_point(args):
    scenario, value, rep = args
    try:
        return value, rep, scenario.seed, run(scenario)
    except Exception as e:
        raise SweepError(f"sweep point value={value} replication={rep} seed={scenario.seed}: {e}") from e


def sweep(
    base: Scenario,
    knob: Knob,
    values: Sequence[float],
    replications: Optional[int] = None,
    workers: int = 1,
) -> List[SweepPoint]:
    """One run per (value, replication); results ordered by value then replication."""
    if not values:
        raise ScenarioError("sweep needs at least one value")
    knob = Knob(knob)
    reps = base.replications if replications is None else replications
    jobs = []
    for i, v in enumerate(sorted(values)):
        try:
            point = apply_knob(base, knob, v)
            point.validate()
        except ValueError as e:
            raise SweepError(f"sweep point {knob.value}={v}: {e}") from e
        for r in range(reps):
            jobs.append((replace(point, seed=sweep_seed(base.seed, i, r)), v, r))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_point, jobs))
    else:
        done = [_run_point(j) for j in jobs]
    return [SweepPoint(v, r, seed, m) for v, r, seed, m in done]
