"""Social communities and degree centrality of their members."""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, FrozenSet, Iterable, Mapping, Set, Tuple

NodeId = str
GroupId = str


class GraphError(ValueError):
    """Invalid graph construction or query."""


class DegenerateGroupError(GraphError):
    """Centrality is undefined for a group with fewer than two members."""


class SocialGraph:
    """Undirected simple graph whose nodes are partitioned into groups.

    Only intra-group edges contribute to degree. Edges between groups are
    accepted (they model sender/relay links) but ignored by ``raw_degree``.
    """

    def __init__(
        self,
        groups: Mapping[GroupId, Iterable[NodeId]],
        edges: Iterable[Tuple[NodeId, NodeId]] = (),
    ):
        self.group_of: Dict[NodeId, GroupId] = {}
        self.members: Dict[GroupId, Tuple[NodeId, ...]] = {}
        for group, nodes in groups.items():
            nodes = tuple(nodes)
            for node in nodes:
                if node in self.group_of:
                    raise GraphError(
                        f"node {node!r} appears in groups {self.group_of[node]!r} and {group!r}"
                    )
                self.group_of[node] = group
            self.members[group] = nodes
        self._adj: Dict[NodeId, Set[NodeId]] = defaultdict(set)
        self.edges: Set[FrozenSet[NodeId]] = set()
        for a, b in edges:
            self.add_edge(a, b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SocialGraph):
            return NotImplemented
        return self.members == other.members and self.edges == other.edges

    __hash__ = None  # mutable via add_edge

    @property
    def nodes(self) -> Set[NodeId]:
        return set(self.group_of)

    def add_edge(self, a: NodeId, b: NodeId) -> None:
        if a == b:
            raise GraphError(f"self-loop on {a!r}")
        for node in (a, b):
            if node not in self.group_of:
                raise GraphError(f"edge endpoint {node!r} is not a declared node")
        self.edges.add(frozenset((a, b)))
        self._adj[a].add(b)
        self._adj[b].add(a)

    def has_edge(self, a: NodeId, b: NodeId) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, a: NodeId) -> Set[NodeId]:
        self._check(a)
        return set(self._adj[a])

    def group_size(self, group: GroupId) -> int:
        return len(self.members[group])

    def _check(self, a: NodeId) -> None:
        if a not in self.group_of:
            raise GraphError(f"unknown node {a!r}")


def raw_degree(g: SocialGraph, a: NodeId) -> int:
    """Number of distinct neighbours of ``a`` inside its own group."""
    g._check(a)
    group = g.group_of[a]
    return sum(1 for u in g._adj[a] if g.group_of[u] == group)


def degree_centrality(g: SocialGraph, a: NodeId) -> float:
    """Intra-group degree divided by the number of other group members."""
    g._check(a)
    m = g.group_size(g.group_of[a])
    if m < 2:
        raise DegenerateGroupError(
            f"group {g.group_of[a]!r} of node {a!r} has {m} member(s); centrality needs at least 2"
        )
    return raw_degree(g, a) / (m - 1)


def centralities(g: SocialGraph) -> Dict[NodeId, float]:
    return {a: degree_centrality(g, a) for a in g.group_of}


def is_group_connected(g: SocialGraph, group: GroupId) -> bool:
    members = g.members[group]
    if not members:
        return True
    seen = {members[0]}
    stack = [members[0]]
    while stack:
        node = stack.pop()
        for u in g._adj[node]:
            if g.group_of[u] == group and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(members)
