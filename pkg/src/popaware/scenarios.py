"""Built-in scenarios: the three-community reference graph and its overload extension."""

from __future__ import annotations

import random
from typing import Dict, List, Tuple

from .simulator import Discipline, FlowSpec, Scenario
from .social_graph import SocialGraph

# Published per-node (raw degree, centrality) for the three reference groups.
TABLE2: Dict[str, List[Tuple[int, float]]] = {
    "SA": [(8, 0.89), (2, 0.22), (3, 0.33), (3, 0.33), (3, 0.33),
           (3, 0.33), (4, 0.44), (2, 0.22), (4, 0.44), (2, 0.22)],
    "SB": [(5, 0.83), (2, 0.33), (4, 0.66), (2, 0.33), (4, 0.66), (3, 0.5), (2, 0.33)],
    "SC": [(4, 0.8), (2, 0.4), (3, 0.6), (2, 0.4), (4, 0.8), (1, 0.2)],
}

# Intra-group edges realising exactly the degrees above, each group connected.
_EDGES = {
    "SA": [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9),
           (7, 9), (7, 10), (7, 3), (9, 10), (9, 4), (3, 5), (4, 6), (5, 6), (2, 8)],
    "SB": [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6),
           (3, 5), (3, 7), (3, 6), (5, 7), (5, 6), (2, 4)],
    "SC": [(1, 2), (1, 3), (1, 4), (1, 5), (5, 6), (5, 3), (5, 2), (3, 4)],
}

LINK_RATE = 2e6
QUEUE_CAPACITY = 64
PACKET_SIZE = 512
RELAY = "I"

# extra communities used to reach 30-50 senders; fixed so the graph never depends on the run seed
_EXTRA_SIZES = (8, 9, 7, 10, 6, 8, 9, 7)
_EXTRA_GRAPH_SEED = 20160


def node(group: str, index: int) -> str:
    return f"{group}{index}"


def canonical_groups() -> Tuple[Dict[str, List[str]], List[Tuple[str, str]]]:
    groups = {g: [node(g, i + 1) for i in range(len(rows))] for g, rows in TABLE2.items()}
    edges = [(node(g, a), node(g, b)) for g, pairs in _EDGES.items() for a, b in pairs]
    return groups, edges


def canonical_graph() -> SocialGraph:
    groups, edges = canonical_groups()
    return SocialGraph(groups, edges)


def _extra_group(name: str, size: int, rng: random.Random) -> Tuple[List[str], List[Tuple[str, str]]]:
    members = [node(name, i + 1) for i in range(size)]
    edges = set()
    for i in range(1, size):
        j = rng.randrange(i)
        edges.add((members[j], members[i]))
    for i in range(size):
        for j in range(i + 1, size):
            if rng.random() < 0.25:
                edges.add((members[i], members[j]))
    return members, sorted(edges)


def extended_graph(n_senders: int) -> SocialGraph:
    """Reference groups plus generated communities until there are ``n_senders`` nodes."""
    groups, edges = canonical_groups()
    rng = random.Random(_EXTRA_GRAPH_SEED)
    total = sum(len(m) for m in groups.values())
    k = 0
    while total < n_senders:
        name = "S" + chr(ord("D") + k)
        members, group_edges = _extra_group(name, _EXTRA_SIZES[k % len(_EXTRA_SIZES)], rng)
        groups[name] = members
        edges.extend(group_edges)
        total += len(members)
        k += 1
    return SocialGraph(groups, edges)


def build_canonical_scenario(rate: float = 4.0, duration: float = 200.0, seed: int = 1,
                             discipline: Discipline = Discipline.POP_AWARE) -> Scenario:
    """Every member of the three reference groups sends CBR traffic through the relay."""
    g = canonical_graph()
    senders = [n for members in g.members.values() for n in members]
    return Scenario(
        graph=g,
        flows=tuple(FlowSpec(s, rate, PACKET_SIZE) for s in senders),
        link_rate=LINK_RATE,
        queue_capacity=QUEUE_CAPACITY,
        duration=duration,
        discipline=discipline,
        seed=seed,
    )


def build_overload_scenario(n_flows: int = 40, load_factor: float = 1.5, duration: float = 200.0,
                            seed: int = 1, replications: int = 5,
                            discipline: Discipline = Discipline.POP_AWARE) -> Scenario:
    """``n_flows`` equal-rate senders whose total offered load is ``load_factor`` x link capacity."""
    g = extended_graph(n_flows)
    senders = [n for members in g.members.values() for n in members][:n_flows]
    rate = load_factor * LINK_RATE / (PACKET_SIZE * 8) / n_flows
    return Scenario(
        graph=g,
        flows=tuple(FlowSpec(s, rate, PACKET_SIZE) for s in senders),
        link_rate=LINK_RATE,
        queue_capacity=QUEUE_CAPACITY,
        duration=duration,
        discipline=discipline,
        seed=seed,
        replications=replications,
    )
