"""Sender flows and the per-flow service-share arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

FlowId = int


class FlowError(ValueError):
    pass


class EmptyQueueError(FlowError):
    """No packets queued, so a share of the queue is undefined."""


class NoActiveFlowsError(FlowError):
    """Active-service denominator is zero."""


@dataclass
class Flow:
    """A sender's packet stream as seen by the intermediate node.

    ``inter_arrival`` is seconds between packets and ``tx_cost`` is seconds
    of link time one packet needs, so their ratio is the link fraction the
    flow asks for.
    """

    id: FlowId
    source: str
    inter_arrival: float
    tx_cost: float
    centrality: float = 0.0
    priority: Optional[tuple] = None
    served_count: int = 0
    queued_count: int = 0
    queued_bytes: int = 0

    def __post_init__(self):
        if not self.inter_arrival > 0:
            raise FlowError(f"flow {self.id}: inter_arrival must be > 0, got {self.inter_arrival}")
        if not self.tx_cost > 0:
            raise FlowError(f"flow {self.id}: tx_cost must be > 0, got {self.tx_cost}")

    @property
    def fully_served(self) -> bool:
        return self.queued_count == 0

    def service_ratio(self) -> float:
        """Fraction of this flow's packets seen so far that were served (reporting only)."""
        seen = self.served_count + self.queued_count
        return self.served_count / seen if seen else 0.0


@dataclass(frozen=True)
class ServiceShare:
    p_max: int
    p_sum: int
    share: float
    loss_share: float


def utilization(f: Flow) -> float:
    return f.tx_cost / f.inter_arrival


def _find(flows: Sequence[Flow], fid: FlowId) -> Flow:
    for f in flows:
        if f.id == fid:
            return f
    raise FlowError(f"unknown flow id {fid}")


def throughput_share(flows: Sequence[Flow], fid: FlowId, p_max: int) -> ServiceShare:
    """Split a flow's backlog into the part the queue can carry and the part it loses.

    >>> fs = [Flow(1, "a", 1, 1, queued_count=32), Flow(2, "b", 1, 1, queued_count=32),
    ...       Flow(3, "c", 1, 1, queued_count=64)]
    >>> throughput_share(fs, 1, 64)
    ServiceShare(p_max=64, p_sum=128, share=16.0, loss_share=16.0)
    """
    p_sum = sum(f.queued_count for f in flows)
    if p_sum <= 0:
        raise EmptyQueueError("no queued packets; share is undefined")
    p_a = _find(flows, fid).queued_count
    share = p_a * (p_max / p_sum)
    return ServiceShare(p_max, p_sum, share, p_a - share)


def active_service(
    flows: Sequence[Flow], fid: FlowId, p_max: int, i_max: float, t_max: float
) -> float:
    """Backlog-weighted fraction of the link work a flow is entitled to."""
    denom = sum(f.queued_count * utilization(f) for f in flows)
    if denom <= 0:
        raise NoActiveFlowsError("no queued work among the given flows")
    f = _find(flows, fid)
    return (p_max * t_max / i_max) * (f.queued_count * utilization(f) / denom)
