"""Popularity-aware queue discipline for the intermediate node.

Below half occupancy the queue is plain FIFO. Above it, flows are ranked by
social rate (load over sender centrality), a greedy utilisation-feasible
subset of them is served first, and a full queue only lets an arriving
packet in by evicting a packet of the least central queued flow.
"""

from __future__ import annotations

import math
from collections import OrderedDict, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Deque, Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

from .flow import Flow, FlowId, utilization


class SchedulerError(ValueError):
    pass


class Mode(str, Enum):
    FIFO = "fifo"
    PRIORITY = "priority"


class DropReason(str, Enum):
    TAIL = "tail-drop"
    LOW_CENTRALITY = "low-centrality"
    FEASIBILITY = "feasibility"
    EVICTED = "evicted"


@dataclass
class Packet:
    flow: FlowId
    size: int
    created_at: float
    seqno: int

    def __post_init__(self):
        if self.size <= 0:
            raise SchedulerError(f"packet size must be positive, got {self.size}")


@dataclass(frozen=True)
class Enqueued:
    packet: Packet
    evicted: Optional[Packet] = None


@dataclass(frozen=True)
class Dropped:
    packet: Packet
    reason: DropReason


EnqueueResult = Union[Enqueued, Dropped]


@dataclass(frozen=True)
class Decision:
    time: float
    action: str  # enqueue | dequeue | drop
    flow: FlowId
    seqno: int
    reason: str
    mode: str
    occupancy: int


class LoadEstimator:
    """Arrival and departure rates over a sliding window of ``window`` seconds."""

    def __init__(self, window: float = 1.0):
        if window <= 0:
            raise SchedulerError("load window must be positive")
        self.window = window
        self._arrivals: Deque[float] = deque()
        self._departures: Deque[float] = deque()

    def record_arrival(self, now: float) -> None:
        self._arrivals.append(now)

    def record_departure(self, now: float) -> None:
        self._departures.append(now)

    def _trim(self, now: float) -> None:
        edge = now - self.window
        for q in (self._arrivals, self._departures):
            while q and q[0] <= edge:
                q.popleft()

    def arrival_rate(self, now: float) -> float:
        self._trim(now)
        return len(self._arrivals) / self.window

    def output_rate(self, now: float) -> float:
        self._trim(now)
        return len(self._departures) / self.window

    def measure(self, now: float) -> float:
        self._trim(now)
        arrived, departed = len(self._arrivals), len(self._departures)
        if departed == 0:
            return math.inf if arrived else 0.0
        return arrived / departed


def measure_load(est: LoadEstimator, now: float) -> float:
    return est.measure(now)


def social_rate(load: float, c: float) -> float:
    """Load divided by centrality; lower means served earlier. Zero centrality ranks last."""
    if c <= 0:
        return math.inf
    if load == 0:
        return 0.0
    return load / c


class PriorityKey(NamedTuple):
    social_rate: float
    neg_centrality: float
    neg_deficit: float
    arrival: int


def compute_priority(f: Flow, load: float, active: float, served: int = 0, arrival: int = 0) -> PriorityKey:
    """Lexicographic rank key for a flow; smaller keys are served first.

    Ties in social rate fall to higher centrality (only reachable when the
    load is 0 or infinite), then to the larger unmet active-service share,
    then to whichever flow's head packet arrived first.
    """
    return PriorityKey(social_rate(load, f.centrality), -f.centrality, -(active - served), arrival)


def find_lowest_centrality(queued_flows: Sequence[Flow]) -> Tuple[FlowId, float]:
    if not queued_flows:
        raise SchedulerError("no queued flows to search")
    f = min(queued_flows, key=lambda f: (f.centrality, f.id))
    return f.id, f.centrality


def select_schedulable(flows: Iterable[Flow]) -> Set[FlowId]:
    """Admit flows best-priority first while total utilisation stays <= 1.

    A flow that would push the total over 1 is skipped and the scan goes on.
    Flows without a computed priority are ignored.
    """
    ranked = sorted((f for f in flows if f.priority is not None), key=lambda f: (f.priority, f.id))
    return _admit_in_order(ranked)


def _admit_in_order(ranked: Iterable[Flow]) -> Set[FlowId]:
    return _fit(((f.id, utilization(f)) for f in ranked))


def _fit(ranked: Iterable[Tuple[FlowId, float]]) -> Set[FlowId]:
    """Greedy skip-and-continue packing under total utilisation <= 1.

    Near the bound the total is re-summed exactly, so whether a set is
    feasible never depends on the order its utilisations were added in.
    """
    chosen: Set[FlowId] = set()
    parts: List[float] = []
    total = 0.0
    for fid, u in ranked:
        t = total + u
        if t > 1.0 + 1e-9:
            continue
        if t >= 1.0 - 1e-9 and math.fsum(parts + [u]) > 1.0:
            continue
        chosen.add(fid)
        parts.append(u)
        total = t
    return chosen


class PopAwareQueue:
    """Bounded packet queue running the popularity-aware discipline.

    With ``scheduling=False`` the queue never leaves FIFO mode and behaves
    as plain drop-tail, which is the comparison baseline.
    """

    def __init__(
        self,
        capacity: int,
        flows: Iterable[Flow] = (),
        *,
        scheduling: bool = True,
        window: float = 1.0,
        link_rate: Optional[float] = None,
        log: Optional[Callable[[Decision], None]] = None,
    ):
        if capacity < 1:
            raise SchedulerError("queue capacity must be at least 1")
        self.capacity = capacity
        self.scheduling = scheduling
        self.link_rate = link_rate
        self.log = log
        self.flows: Dict[FlowId, Flow] = {}
        self._util: Dict[FlowId, float] = {}
        for f in flows:
            self.add_flow(f)
        self.load = LoadEstimator(window)
        self.mode = Mode.FIFO
        self.schedulable: Set[FlowId] = set()
        self.priorities: Dict[FlowId, PriorityKey] = {}
        self.current_load = 0.0
        self._ranking_load = 0.0
        self._active: Dict[FlowId, float] = {}
        self._order: "OrderedDict[int, Packet]" = OrderedDict()
        self._per_flow: Dict[FlowId, Deque[Tuple[int, Packet]]] = {}
        self._served_at: Dict[FlowId, Deque[float]] = {}
        self._next_idx = 0

    def add_flow(self, f: Flow) -> None:
        if f.id in self.flows:
            raise SchedulerError(f"flow {f.id} already registered")
        self.flows[f.id] = f
        self._util[f.id] = utilization(f)

    def __len__(self) -> int:
        return len(self._order)

    @property
    def full(self) -> bool:
        return len(self._order) >= self.capacity

    def queued_flows(self) -> List[Flow]:
        return [self.flows[fid] for fid, q in self._per_flow.items() if q]

    def packets(self) -> List[Packet]:
        """Queued packets in arrival order."""
        return list(self._order.values())

    def residual_workload(self, fid: FlowId) -> float:
        """Seconds of link time still owed to a flow's queued packets."""
        if not self.link_rate:
            raise SchedulerError("residual workload needs a link rate")
        return self.flows[fid].queued_bytes * 8 / self.link_rate

    def served_recently(self, fid: FlowId, now: float) -> int:
        q = self._served_at.get(fid)
        if not q:
            return 0
        edge = now - self.load.window
        while q and q[0] <= edge:
            q.popleft()
        return len(q)

    # -- ranking -----------------------------------------------------------

    def _rank_table(
        self, counts: Dict[FlowId, int], now: float
    ) -> Tuple[Dict[FlowId, float], Dict[FlowId, PriorityKey]]:
        """Active-service shares and priority keys for flows with the given backlogs."""
        flows, util = self.flows, self._util
        i_max = max(flows[fid].inter_arrival for fid in counts)
        t_max = max(flows[fid].tx_cost for fid in counts)
        denom = sum(c * util[fid] for fid, c in counts.items())
        scale = self.capacity * t_max / i_max / denom
        load = self._ranking_load
        active: Dict[FlowId, float] = {}
        keys: Dict[FlowId, PriorityKey] = {}
        for fid, c in counts.items():
            a = scale * c * util[fid]
            active[fid] = a
            q = self._per_flow.get(fid)
            head = q[0][0] if q else self._next_idx
            keys[fid] = compute_priority(flows[fid], load, a, self.served_recently(fid, now), head)
        return active, keys

    def _greedy(self, keys: Dict[FlowId, PriorityKey]) -> Set[FlowId]:
        util = self._util
        return _fit((fid, util[fid]) for _, fid in sorted((k, fid) for fid, k in keys.items()))

    def recompute(self, now: float) -> None:
        """Refresh social rates, active-service shares and the schedulable set."""
        self._ranking_load = self.load.measure(now)
        for fid in self.priorities:
            self.flows[fid].priority = None
        counts = {fid: len(q) for fid, q in self._per_flow.items() if q}
        if not counts:
            self._active, self.priorities, self.schedulable = {}, {}, set()
            return
        self._active, self.priorities = self._rank_table(counts, now)
        for fid, key in self.priorities.items():
            self.flows[fid].priority = key
        self.schedulable = self._greedy(self.priorities)

    def live_key(self, fid: FlowId, now: float) -> PriorityKey:
        f = self.flows[fid]
        return compute_priority(
            f,
            self._ranking_load,
            self._active.get(fid, 0.0),
            self.served_recently(fid, now),
            self._per_flow[fid][0][0],
        )

    def priority_labels(self) -> Dict[FlowId, str]:
        """'high' for flows ranked in the better half, 'low' otherwise."""
        ranked = sorted(self.priorities, key=lambda fid: (self.priorities[fid], fid))
        half = len(ranked) / 2
        return {fid: ("high" if i < half else "low") for i, fid in enumerate(ranked)}

    # -- queue operations --------------------------------------------------

    def _emit(self, now: float, action: str, p: Packet, reason: str = "") -> None:
        if self.log is not None:
            self.log(Decision(now, action, p.flow, p.seqno, reason, self.mode.value, len(self._order)))

    def _insert(self, p: Packet) -> bool:
        idx = self._next_idx
        self._next_idx += 1
        self._order[idx] = p
        q = self._per_flow.get(p.flow)
        if q is None:
            q = self._per_flow[p.flow] = deque()
        joined = not q
        q.append((idx, p))
        f = self.flows[p.flow]
        f.queued_count += 1
        f.queued_bytes += p.size
        return joined

    def _remove(self, idx: int, p: Packet) -> bool:
        del self._order[idx]
        f = self.flows[p.flow]
        f.queued_count -= 1
        f.queued_bytes -= p.size
        return not self._per_flow[p.flow]

    def enqueue(self, p: Packet, now: float) -> EnqueueResult:
        if p.flow not in self.flows:
            raise SchedulerError(f"packet from unregistered flow {p.flow}")
        self.load.record_arrival(now)
        self.current_load = self.load.measure(now)

        if self.scheduling:
            mode = Mode.PRIORITY if len(self._order) > self.capacity / 2 else Mode.FIFO
            if mode is not self.mode:
                self.mode = mode
                if mode is Mode.PRIORITY:
                    self.recompute(now)

        if not self.full:
            joined = self._insert(p)
            if joined and self.mode is Mode.PRIORITY:
                self.recompute(now)
            self._emit(now, "enqueue", p)
            return Enqueued(p)
        if self.mode is Mode.FIFO:
            self._emit(now, "drop", p, DropReason.TAIL.value)
            return Dropped(p, DropReason.TAIL)
        return self.admit_new_packet(p, now)

    def admit_new_packet(self, p: Packet, now: float) -> EnqueueResult:
        """Full-queue admission: displace the least central flow or drop the arrival."""
        n = self.flows[p.flow]
        lowest_id, c_f = find_lowest_centrality(self.queued_flows())
        victim_flow = self.flows[lowest_id]
        if not n.centrality > c_f:
            self._emit(now, "drop", p, DropReason.LOW_CENTRALITY.value)
            return Dropped(p, DropReason.LOW_CENTRALITY)
        if not utilization(n) <= utilization(victim_flow):
            self._emit(now, "drop", p, DropReason.FEASIBILITY.value)
            return Dropped(p, DropReason.FEASIBILITY)

        counts = {fid: len(q) for fid, q in self._per_flow.items() if q}
        counts[n.id] = counts.get(n.id, 0) + 1
        counts[lowest_id] -= 1
        if counts[lowest_id] == 0:
            del counts[lowest_id]
        _, keys = self._rank_table(counts, now)
        if n.id not in self._greedy(keys):
            self._emit(now, "drop", p, DropReason.FEASIBILITY.value)
            return Dropped(p, DropReason.FEASIBILITY)

        idx, victim = self._per_flow[lowest_id].pop()
        left = self._remove(idx, victim)
        self._emit(now, "drop", victim, DropReason.EVICTED.value)
        joined = self._insert(p)
        if left or joined:
            self.recompute(now)
        self._emit(now, "enqueue", p)
        return Enqueued(p, evicted=victim)

    def dequeue(self, now: float) -> Optional[Packet]:
        if not self._order:
            return None
        if self.mode is Mode.FIFO:
            idx = next(iter(self._order))
            p = self._order[idx]
            self._per_flow[p.flow].popleft()
        else:
            candidates = [fid for fid in self.schedulable if self._per_flow.get(fid)]
            if not candidates:
                candidates = [fid for fid, q in self._per_flow.items() if q]
            best = min(candidates, key=lambda fid: (self.live_key(fid, now), fid))
            idx, p = self._per_flow[best].popleft()
        left = self._remove(idx, p)
        f = self.flows[p.flow]
        f.served_count += 1
        self._served_at.setdefault(p.flow, deque()).append(now)
        self.load.record_departure(now)
        if left and self.mode is Mode.PRIORITY:
            self.recompute(now)
        self._emit(now, "dequeue", p)
        return p
