"""Popularity-aware packet scheduling at a congested relay, with a simulator and analytic model."""

from .flow import Flow, ServiceShare, active_service, throughput_share, utilization
from .scheduler import (
    DropReason,
    Dropped,
    Enqueued,
    LoadEstimator,
    Mode,
    Packet,
    PopAwareQueue,
    compute_priority,
    find_lowest_centrality,
    measure_load,
    select_schedulable,
    social_rate,
)
from .simulator import Discipline, FlowSpec, Metrics, Scenario, run, sweep
from .social_graph import SocialGraph, degree_centrality, raw_degree

__all__ = [
    "Discipline", "DropReason", "Dropped", "Enqueued", "Flow", "FlowSpec", "LoadEstimator",
    "Metrics", "Mode", "Packet", "PopAwareQueue", "Scenario", "ServiceShare", "SocialGraph",
    "active_service", "compute_priority", "degree_centrality", "find_lowest_centrality",
    "measure_load", "raw_degree", "run", "select_schedulable", "social_rate", "sweep",
    "throughput_share", "utilization",
]
