import itertools
import math
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from popaware.flow import Flow, active_service, utilization
from popaware.scheduler import (
    Dropped,
    DropReason,
    Enqueued,
    LoadEstimator,
    Mode,
    Packet,
    PopAwareQueue,
    SchedulerError,
    compute_priority,
    find_lowest_centrality,
    measure_load,
    select_schedulable,
    social_rate,
)


def mk(fid, c, u=0.1, inter_arrival=1.0):
    return Flow(fid, f"s{fid}", inter_arrival, u * inter_arrival, centrality=c)


class Feeder:
    """Builds packets with per-flow sequence numbers and a monotone clock."""

    def __init__(self, queue):
        self.queue, self.seq, self.now = queue, {}, 0.0

    def push(self, fid, dt=0.01):
        self.now += dt
        s = self.seq.get(fid, 0)
        self.seq[fid] = s + 1
        return self.queue.enqueue(Packet(fid, 512, self.now, s), self.now)

    def pop(self, dt=0.01):
        self.now += dt
        return self.queue.dequeue(self.now)


# -- load --------------------------------------------------------------------


def _replay(arrivals, departures, now, window=1.0):
    est = LoadEstimator(window)
    events = sorted([(t, 0) for t in arrivals] + [(t, 1) for t in departures])
    for t, kind in events:
        (est.record_arrival if kind == 0 else est.record_departure)(t)
    return measure_load(est, now)


@pytest.mark.parametrize(
    "n_in, n_out, expected", [(10, 10, 1.0), (30, 10, 3.0), (7, 4, 1.75)]
)
def test_load_ratio(n_in, n_out, expected):
    arrivals = [0.5 + i / 100 for i in range(n_in)]
    departures = [0.55 + i / 100 for i in range(n_out)]
    assert _replay(arrivals, departures, 1.2) == pytest.approx(expected)


def test_load_edge_cases():
    assert _replay([], [], 5.0) == 0.0
    assert _replay([0.9], [], 1.0) == math.inf


def test_load_window_forgets_old_events():
    # arrivals at 0.1..0.3 fall out of the window by t=1.5; only the later pair counts
    assert _replay([0.1, 0.2, 0.3, 1.2, 1.3], [1.25], 1.5) == 2.0


def test_estimator_rejects_bad_window():
    with pytest.raises(SchedulerError):
        LoadEstimator(0)


# -- ranking -----------------------------------------------------------------


def test_social_rate():
    assert social_rate(2.0, 0.89) == pytest.approx(2.2471910)
    assert social_rate(1.0, 0.0) == math.inf
    assert social_rate(0.0, 0.5) == 0.0


def test_more_central_flow_ranks_first():
    hi, lo = mk(1, 0.8), mk(2, 0.2)
    for load in (0.0, 0.5, 1.0, 3.0, math.inf):
        assert compute_priority(hi, load, 1.0) < compute_priority(lo, load, 1.0)


def test_deficit_breaks_equal_social_rate():
    a, b = mk(1, 0.5), mk(2, 0.5)
    assert compute_priority(a, 1.0, 3.0, served=0) < compute_priority(b, 1.0, 3.0, served=2)


def test_arrival_breaks_remaining_ties():
    a, b = mk(1, 0.5), mk(2, 0.5)
    assert compute_priority(a, 1.0, 1.0, arrival=4) < compute_priority(b, 1.0, 1.0, arrival=9)


def test_find_lowest_centrality():
    fs = [mk(3, 0.4), mk(1, 0.2), mk(2, 0.2), mk(4, 0.9)]
    assert find_lowest_centrality(fs) == (1, 0.2)
    with pytest.raises(SchedulerError):
        find_lowest_centrality([])


def test_select_schedulable_skips_and_continues():
    fs = [mk(1, 0.9, 0.6), mk(2, 0.8, 0.5), mk(3, 0.7, 0.3)]
    for rank, f in enumerate(fs):
        f.priority = (rank,)
    assert select_schedulable(fs) == {1, 3}


def test_feasibility_does_not_depend_on_summation_order():
    # 0.8 + 0.1 + 0.05 + 0.05 is exactly 1 in the reals but not in every float order
    fs = [mk(1, 0.9, 0.8), mk(2, 0.8, 0.1), mk(3, 0.7, 0.05), mk(4, 0.6, 0.05), mk(5, 0.5, 1e-6)]
    for rank, f in enumerate(fs):
        f.priority = (rank,)
    chosen = select_schedulable(fs)
    assert chosen == {1, 2, 3, 4}
    assert math.fsum(utilization(f) for f in fs if f.id in chosen) <= 1.0


def test_select_schedulable_ignores_unranked():
    fs = [mk(1, 0.9, 0.2), mk(2, 0.8, 0.2)]
    fs[0].priority = (0,)
    assert select_schedulable(fs) == {1}


def _lexmax_feasible(ranked):
    """Exhaustive oracle: among all subsets with total utilisation <= 1, the one
    whose membership vector (in rank order) is lexicographically largest."""
    best = None
    for bits in itertools.product((1, 0), repeat=len(ranked)):
        if sum(utilization(f) for f, b in zip(ranked, bits) if b) <= 1.0:
            if best is None or bits > best:
                best = bits
    return {f.id for f, b in zip(ranked, best) if b}


@given(st.lists(st.integers(1, 16), min_size=1, max_size=9), st.randoms(use_true_random=False))
def test_select_schedulable_matches_exhaustive_search(sixteenths, rnd):
    # dyadic utilisations keep every partial sum exact
    fs = [mk(i, 0.5, k / 16) for i, k in enumerate(sixteenths)]
    order = list(range(len(fs)))
    rnd.shuffle(order)
    for rank, i in enumerate(order):
        fs[i].priority = (rank,)
    ranked = [fs[i] for i in order]
    chosen = select_schedulable(fs)
    assert chosen == _lexmax_feasible(ranked)
    assert sum(utilization(fs[i]) for i in chosen) <= 1.0


# -- queue operations --------------------------------------------------------


def test_below_half_is_fifo():
    q = PopAwareQueue(8, [mk(0, 0.1), mk(1, 0.9)])
    feed = Feeder(q)
    for fid in (0, 1, 0, 1, 0):
        feed.push(fid)
    assert q.mode is Mode.FIFO
    assert [feed.pop().flow for _ in range(5)] == [0, 1, 0, 1, 0]


def test_switches_to_priority_above_half():
    q = PopAwareQueue(4, [mk(0, 0.1), mk(1, 0.9)])
    feed = Feeder(q)
    for fid in (0, 0, 0):
        feed.push(fid)
    assert q.mode is Mode.FIFO
    feed.push(1)  # occupancy 3 > 2 before insertion
    assert q.mode is Mode.PRIORITY
    assert q.schedulable == {0, 1}
    assert feed.pop().flow == 1  # more central flow goes first despite arriving last


def test_fifo_discipline_tail_drops():
    q = PopAwareQueue(3, [mk(0, 0.1), mk(1, 0.9)], scheduling=False)
    feed = Feeder(q)
    for _ in range(3):
        assert isinstance(feed.push(0), Enqueued)
    r = feed.push(1)
    assert isinstance(r, Dropped) and r.reason is DropReason.TAIL
    assert q.mode is Mode.FIFO


def _full_queue(flows, fill_flow, capacity=4):
    q = PopAwareQueue(capacity, flows)
    feed = Feeder(q)
    for _ in range(capacity):
        feed.push(fill_flow)
    assert q.full and q.mode is Mode.PRIORITY
    return q, feed


def test_full_queue_rejects_less_central_arrival():
    q, feed = _full_queue([mk(0, 0.5), mk(1, 0.5), mk(2, 0.1)], 0)
    for fid in (1, 2):
        r = feed.push(fid)
        assert isinstance(r, Dropped) and r.reason is DropReason.LOW_CENTRALITY


def test_full_queue_rejects_heavier_arrival():
    q, feed = _full_queue([mk(0, 0.2, u=0.1), mk(1, 0.9, u=0.3)], 0)
    r = feed.push(1)
    assert isinstance(r, Dropped) and r.reason is DropReason.FEASIBILITY
    assert len(q) == 4


def test_full_queue_evicts_newest_packet_of_least_central_flow():
    q, feed = _full_queue([mk(0, 0.2), mk(1, 0.9)], 0)
    r = feed.push(1)
    assert isinstance(r, Enqueued)
    assert r.evicted.flow == 0 and r.evicted.seqno == 3
    assert len(q) == 4
    assert [p.seqno for p in q.packets() if p.flow == 0] == [0, 1, 2]
    assert q.flows[0].queued_count == 3 and q.flows[1].queued_count == 1


def test_full_queue_rejects_arrival_outside_feasible_set():
    # the arrival beats the victim on both conjuncts but a more central flow
    # already takes 0.5 of the link, so 0.5 + 0.6 does not fit
    flows = [mk(0, 0.9, u=0.5), mk(1, 0.1, u=0.7), mk(2, 0.5, u=0.6)]
    q = PopAwareQueue(4, flows)
    feed = Feeder(q)
    for fid in (0, 1, 1, 1):
        feed.push(fid)
    r = feed.push(2)
    assert isinstance(r, Dropped) and r.reason is DropReason.FEASIBILITY


def test_priority_dequeue_falls_back_when_schedulable_flows_drain():
    flows = [mk(0, 0.9, u=0.9), mk(1, 0.5, u=0.9)]
    q = PopAwareQueue(4, flows)
    feed = Feeder(q)
    for fid in (1, 1, 0, 1):
        feed.push(fid)
    assert q.schedulable == {0}
    assert [feed.pop().flow for _ in range(4)] == [0, 1, 1, 1]
    assert feed.pop() is None


def test_rank_table_active_share_matches_flow_formula():
    flows = [mk(0, 0.3, u=0.1, inter_arrival=0.5), mk(1, 0.6, u=0.2, inter_arrival=0.25), mk(2, 0.9, u=0.05)]
    q = PopAwareQueue(6, flows)
    feed = Feeder(q)
    for fid in (0, 1, 1, 2, 2):
        feed.push(fid)
    counts = {0: 1, 1: 2, 2: 2}
    active, _ = q._rank_table(counts, feed.now)
    i_max = max(f.inter_arrival for f in flows)
    t_max = max(f.tx_cost for f in flows)
    for fid in counts:
        assert active[fid] == pytest.approx(active_service(list(q.flows.values()), fid, 6, i_max, t_max))


def test_unregistered_flow():
    q = PopAwareQueue(4, [mk(0, 0.5)])
    with pytest.raises(SchedulerError, match="unregistered"):
        q.enqueue(Packet(7, 512, 0.0, 0), 0.0)


def test_duplicate_flow_registration():
    with pytest.raises(SchedulerError, match="already registered"):
        PopAwareQueue(4, [mk(0, 0.5), mk(0, 0.6)])


def test_packet_size_positive():
    with pytest.raises(SchedulerError):
        Packet(0, 0, 0.0, 0)


def test_priority_labels_split_at_median():
    q, _ = _full_queue([mk(0, 0.2), mk(1, 0.9)], 0)
    q.recompute(1.0)
    assert q.priority_labels() == {0: "high"}


# -- randomized invariants ---------------------------------------------------

ops = st.lists(st.tuples(st.booleans(), st.integers(0, 4)), max_size=120)
flow_params = st.lists(
    st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]), st.sampled_from([0.05, 0.2, 0.4, 0.7])),
    min_size=5, max_size=5,
)


def _drive(params, trace, capacity, log=None):
    flows = [mk(i, c, u) for i, (c, u) in enumerate(params)]
    q = PopAwareQueue(capacity, flows, log=log)
    feed = Feeder(q)
    out = []
    for is_push, fid in trace:
        if is_push:
            victim_before = find_lowest_centrality(q.queued_flows()) if q.full else None
            r = feed.push(fid)
            if isinstance(r, Enqueued) and r.evicted is not None:
                vid, c_f = victim_before
                assert q.flows[fid].centrality > c_f
                assert utilization(q.flows[fid]) <= utilization(q.flows[vid])
                assert r.evicted.flow == vid
            out.append(r)
        else:
            out.append(feed.pop())
        assert len(q) <= capacity
        assert math.fsum(utilization(q.flows[i]) for i in q.schedulable) <= 1.0
        assert sum(f.queued_count for f in q.flows.values()) == len(q)
    return out


@settings(max_examples=200, deadline=None)
@given(flow_params, ops, st.integers(2, 8))
def test_queue_invariants(params, trace, capacity):
    _drive(params, trace, capacity)


@settings(max_examples=50, deadline=None)
@given(flow_params, ops, st.integers(2, 8))
def test_queue_is_deterministic(params, trace, capacity):
    a, b = [], []
    _drive(params, trace, capacity, a.append)
    _drive(params, trace, capacity, b.append)
    assert a == b


@settings(max_examples=100, deadline=None)
@given(ops, st.integers(2, 8))
def test_fifo_discipline_matches_reference(trace, capacity):
    q = PopAwareQueue(capacity, [mk(i, 0.5) for i in range(5)], scheduling=False)
    feed, ref = Feeder(q), deque()
    for is_push, fid in trace:
        if is_push:
            r = feed.push(fid)
            if len(ref) < capacity:
                ref.append(r.packet)
                assert isinstance(r, Enqueued)
            else:
                assert isinstance(r, Dropped)
        else:
            assert feed.pop() == (ref.popleft() if ref else None)
