"""Closed-form transmission and delay model for a queued packet.

Every quantity is per packet. ``kappa_k`` is the schedulable mass (packets
of the selected flows, weighted by the flow's rate and centrality),
``kappa_n`` the matching mass of new arrivals, and ``rate`` the standalone
rate-times-centrality term that appears in the conditional delay. ``rate``
and ``kappa_k`` are independent inputs, and derivatives are taken in
``kappa_k`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .flow import utilization


class AnalysisError(ValueError):
    pass


class SingularityError(AnalysisError):
    pass


@dataclass(frozen=True)
class AnalysisParams:
    m: int
    load: float
    kappa_k: float
    kappa_n: float = 0.0
    alpha: float = 0.0
    rate: float = 0.0
    p_sum: Optional[int] = None

    def __post_init__(self):
        if self.m < 2:
            raise AnalysisError(f"m must be >= 2, got {self.m}")
        if not self.load > 0:
            raise AnalysisError(f"load must be > 0, got {self.load}")
        if self.alpha < 0:
            raise AnalysisError(f"alpha must be >= 0, got {self.alpha}")
        if self.kappa_k < 0:
            raise AnalysisError(f"kappa_k must be >= 0, got {self.kappa_k}")
        if self.kappa_n < 0:
            raise AnalysisError(f"kappa_n must be >= 0, got {self.kappa_n}")

    @property
    def q(self) -> float:
        return prob_already_transferred(self)


def prob_not_transferred(p: AnalysisParams) -> float:
    return math.exp(-p.load * p.kappa_k * p.alpha)


def prob_already_transferred(p: AnalysisParams) -> float:
    if p.kappa_n > p.m - 1:
        raise AnalysisError(f"kappa_n={p.kappa_n} exceeds m-1={p.m - 1}")
    return p.kappa_n / (p.m - 1)


def packet_transfer_prob(p: AnalysisParams) -> float:
    q = prob_already_transferred(p)
    return (1 - q) * (1 - prob_not_transferred(p)) + q


def transmission_score(p: AnalysisParams) -> float:
    """Sensitivity of the transfer probability to the schedulable mass."""
    q = prob_already_transferred(p)
    return (1 - q) * p.load * p.alpha * prob_not_transferred(p)


def total_transmission(ps: Iterable[AnalysisParams]) -> float:
    return math.fsum(packet_transfer_prob(p) for p in ps)


def _require_regular(p: AnalysisParams) -> None:
    if p.kappa_k == 0:
        raise SingularityError("kappa_k is zero; delay terms diverge")


def expected_delay_term(p: AnalysisParams) -> float:
    _require_regular(p)
    q = prob_already_transferred(p)
    return (1 - q) * (p.rate + 1 / (p.load * p.kappa_k))


def delay_score(p: AnalysisParams) -> float:
    _require_regular(p)
    q = prob_already_transferred(p)
    return (1 - q) / (p.load * p.kappa_k ** 2)


def total_delay(ps: Iterable[AnalysisParams]) -> float:
    return math.fsum(expected_delay_term(p) for p in ps)


def fd_residuals(p: AnalysisParams, step: float = 1e-5) -> tuple:
    """Relative gaps between each score and a central difference in ``kappa_k``.

    Returns ``(transmission_residual, delay_residual)``. Within ``step`` of
    ``kappa_k = 0`` the transmission check falls back to a forward difference
    and the delay residual is NaN, since the delay term diverges there.
    """
    up = replace(p, kappa_k=p.kappa_k + step)
    if p.kappa_k <= step:
        fd_tr = (packet_transfer_prob(up) - packet_transfer_prob(p)) / step
        return _relative(fd_tr, transmission_score(p)), math.nan
    down = replace(p, kappa_k=p.kappa_k - step)
    fd_tr = (packet_transfer_prob(up) - packet_transfer_prob(down)) / (2 * step)
    fd_dt = -(expected_delay_term(up) - expected_delay_term(down)) / (2 * step)
    return _relative(fd_tr, transmission_score(p)), _relative(fd_dt, delay_score(p))


def _relative(approx: float, exact: float) -> float:
    if exact == 0:
        return abs(approx)
    return abs(approx - exact) / abs(exact)


def params_from_queue(queue, fid, m: int, now: float) -> AnalysisParams:
    """Map a live scheduler state onto the model for one flow's head packet.

    * ``rate``    = flow utilisation x centrality
    * ``kappa_k`` = packets queued by schedulable flows x ``rate``
    * ``kappa_n`` = queued flows outside the schedulable set x ``rate``, capped at m-1
    * ``alpha``   = the flow's residual workload in seconds
    * ``load``    = measured load, floored at 1e-9 and capped at 1e9
    """
    f = queue.flows[fid]
    rate = utilization(f) * f.centrality
    k_packets = sum(queue.flows[s].queued_count for s in queue.schedulable)
    outsiders = sum(1 for g in queue.queued_flows() if g.id not in queue.schedulable)
    load = min(max(queue.load.measure(now), 1e-9), 1e9)
    return AnalysisParams(
        m=m,
        load=load,
        kappa_k=k_packets * rate,
        kappa_n=min(outsiders * rate, m - 1),
        alpha=queue.residual_workload(fid),
        rate=rate,
        p_sum=len(queue),
    )
