"""Doubled flow graphs, unit-capacity max-flow, generic ranks and t-separating cuts.

The flow graph of a mixed graph has one left copy 1..n and one right copy
1'..n' of the vertex set (primed node w' is stored as n + w).  Every vertex
and arc has capacity one, so integral flows from sources S to sinks T' are
systems of treks from S to T with no sided intersection, and the max-flow
value equals the generic rank of the covariance submatrix over rows S and
columns T.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .graph import DirectedEdge, MixedGraph, require_valid

_INF = 1 << 30


@dataclass(frozen=True)
class FlowWitness:
    """An integral max flow together with its unit-path decomposition.

    Each path is a node sequence from a source to a sink; paths are pairwise
    vertex-disjoint on capacity-one nodes.
    """

    value: int
    paths: tuple[tuple[int, ...], ...]

    def endpoints(self) -> frozenset[tuple[int, int]]:
        return frozenset((p[0], p[-1]) for p in self.paths)


@dataclass(frozen=True)
class FlowNetwork:
    """Immutable unit-capacity network template.

    Nodes are 1..n_nodes; nodes in ``unit_nodes`` have throughput capacity
    one (enforced internally by node splitting), all others are unbounded.
    For doubled graphs, ``n_base`` is the size of the underlying vertex set
    and ``primed(v) == n_base + v``.  Each max_flow call owns its residual
    state, so concurrent queries on one template are safe.
    """

    n_nodes: int
    arcs: tuple[DirectedEdge, ...]
    unit_nodes: frozenset[int]
    n_base: int

    def __init__(self, n_nodes: int, arcs: Iterable[DirectedEdge],
                 unit_nodes: Iterable[int] | None = None, n_base: int | None = None):
        arcs = tuple(sorted(set(arcs)))
        for u, w in arcs:
            if not (1 <= u <= n_nodes and 1 <= w <= n_nodes):
                raise ValueError(f"arc ({u},{w}) references a node outside 1..{n_nodes}")
        unit = frozenset(range(1, n_nodes + 1)) if unit_nodes is None else frozenset(unit_nodes)
        object.__setattr__(self, "n_nodes", n_nodes)
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "unit_nodes", unit)
        object.__setattr__(self, "n_base", n_nodes // 2 if n_base is None else n_base)

    def primed(self, v: int) -> int:
        return self.n_base + v

    def max_flow(self, sources: Iterable[int], sinks: Iterable[int]) -> FlowWitness:
        """Integral max flow from ``sources`` to ``sinks``.

        Breadth-first augmentation over sorted adjacency keeps the result
        (value, paths and the residual cut) deterministic in the inputs.
        """
        sources = sorted(set(sources))
        sinks = sorted(set(sinks))
        if not sources or not sinks:
            raise ValueError("sources and sinks must be nonempty")
        for x in sources + sinks:
            if not 1 <= x <= self.n_nodes:
                raise ValueError(f"node {x} outside 1..{self.n_nodes}")
        state = _ResidualState(self, sources, sinks)
        state.run()
        return FlowWitness(state.value, state.decompose())

    def min_cut_nodes(self, sources: Iterable[int], sinks: Iterable[int]) -> tuple[int, ...]:
        """Nodes owning the saturated arcs on the residual reachability frontier.

        The returned set has size equal to the max-flow value and meets every
        source-to-sink path.
        """
        sources = sorted(set(sources))
        sinks = sorted(set(sinks))
        state = _ResidualState(self, sources, sinks)
        state.run()
        return state.cut_nodes()


class _ResidualState:
    """Edmonds-Karp residual graph over the node-split expansion."""

    def __init__(self, net: FlowNetwork, sources: list[int], sinks: list[int]):
        self.net = net
        self.sources = sources
        self.sinks = sinks
        # split node x -> (2x, 2x+1); 0 is the super source, 1 the super sink
        self.size = 2 * net.n_nodes + 2
        self.adj: list[list[list[int]]] = [[] for _ in range(self.size)]
        for x in range(1, net.n_nodes + 1):
            cap = 1 if x in net.unit_nodes else _INF
            self._add(2 * x, 2 * x + 1, cap)
        for u, w in net.arcs:
            self._add(2 * u + 1, 2 * w, 1)
        for s in sources:
            self._add(0, 2 * s, 1 if s in net.unit_nodes else _INF)
        for t in sinks:
            self._add(2 * t + 1, 1, 1 if t in net.unit_nodes else _INF)
        self.value = 0

    def _add(self, u: int, w: int, cap: int) -> None:
        # entries are [to, residual_cap, reverse_index, is_forward]
        self.adj[u].append([w, cap, len(self.adj[w]), True])
        self.adj[w].append([u, 0, len(self.adj[u]) - 1, False])

    def run(self) -> None:
        while True:
            parent: list[tuple[int, int] | None] = [None] * self.size
            parent[0] = (0, -1)
            queue = deque([0])
            while queue and parent[1] is None:
                x = queue.popleft()
                for i, (y, cap, _, _) in enumerate(self.adj[x]):
                    if cap > 0 and parent[y] is None:
                        parent[y] = (x, i)
                        queue.append(y)
            if parent[1] is None:
                return
            bottleneck = _INF
            y = 1
            while y != 0:
                x, i = parent[y]
                bottleneck = min(bottleneck, self.adj[x][i][1])
                y = x
            y = 1
            while y != 0:
                x, i = parent[y]
                arc = self.adj[x][i]
                arc[1] -= bottleneck
                self.adj[arc[0]][arc[2]][1] += bottleneck
                y = x
            self.value += bottleneck

    def _flow_on(self, x: int, i: int) -> int:
        y, _, rev, _ = self.adj[x][i]
        return self.adj[y][rev][1]  # residual capacity of the reverse arc

    def decompose(self) -> tuple[tuple[int, ...], ...]:
        # remaining[u][w] = unassigned flow units on original arc u -> w
        remaining: dict[int, dict[int, int]] = {}
        for u, w in self.net.arcs:
            out = 2 * u + 1
            for i, (y, _, _, fwd) in enumerate(self.adj[out]):
                if fwd and y == 2 * w:
                    f = self._flow_on(out, i)
                    if f:
                        remaining.setdefault(u, {})[w] = f
        source_flow = {}
        for i, (y, _, _, fwd) in enumerate(self.adj[0]):
            if fwd:
                f = self._flow_on(0, i)
                if f:
                    source_flow[y // 2] = f
        sink_flow = {}
        sink_set = set(self.sinks)
        for t in self.sinks:
            out = 2 * t + 1
            for i, (y, _, _, fwd) in enumerate(self.adj[out]):
                if fwd and y == 1:
                    f = self._flow_on(out, i)
                    if f:
                        sink_flow[t] = f

        paths = []
        for s in self.sources:
            while source_flow.get(s, 0) > 0:
                source_flow[s] -= 1
                path = [s]
                x = s
                while True:
                    if x in sink_set and sink_flow.get(x, 0) > 0:
                        sink_flow[x] -= 1
                        break
                    nxt = min(w for w, f in remaining.get(x, {}).items() if f > 0)
                    remaining[x][nxt] -= 1
                    path.append(nxt)
                    x = nxt
                paths.append(tuple(path))
        return tuple(paths)

    def cut_nodes(self) -> tuple[int, ...]:
        reach = [False] * self.size
        reach[0] = True
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y, cap, _, _ in self.adj[x]:
                if cap > 0 and not reach[y]:
                    reach[y] = True
                    queue.append(y)
        owners: set[int] = set()
        for x in range(self.size):
            if not reach[x]:
                continue
            for y, cap, rev, fwd in self.adj[x]:
                if not fwd or reach[y] or cap > 0:
                    continue  # only saturated forward arcs across the cut
                if y == 1:
                    owners.add(x // 2)  # sink-side arc: charge the sink node
                elif x == 0:
                    owners.add(y // 2)  # source-side arc: charge the source node
                elif x // 2 == y // 2:
                    owners.add(x // 2)  # split arc: the node itself
                else:
                    owners.add(y // 2)  # original arc u -> w: charge w
        return tuple(sorted(owners))


def build_flow_graph(g: MixedGraph) -> FlowNetwork:
    """Doubled flow graph whose S -> T' max-flows are generic covariance ranks.

    Arcs: i -> j when j -> i is a directed edge (climbing the left side),
    i -> i' for every vertex, i -> j' for every bidirected edge i <-> j, and
    i' -> j' when i -> j is directed (descending the right side).
    """
    return build_restricted_flow_graph(g, g.directed, g.directed)


def build_restricted_flow_graph(
    g: MixedGraph,
    left_edges: Iterable[DirectedEdge],
    right_edges: Iterable[DirectedEdge],
) -> FlowNetwork:
    """Flow graph whose left/right descents are restricted to edge subsets.

    As build_flow_graph, but climbing arcs are generated only from
    ``left_edges`` and descending arcs only from ``right_edges``.  With both
    equal to the full directed edge set this is exactly build_flow_graph.
    """
    require_valid(g)
    left_edges = frozenset(left_edges)
    right_edges = frozenset(right_edges)
    for name, subset in (("left", left_edges), ("right", right_edges)):
        extra = subset - g.directed
        if extra:
            raise ValueError(f"{name} edge restriction {sorted(extra)} not a subset of the directed edges")
    n = g.n
    arcs = []
    for u, w in left_edges:
        arcs.append((w, u))
    for x in g.vertices:
        arcs.append((x, n + x))
    for u, w in g.bidirected:
        arcs.append((u, n + w))
        arcs.append((w, n + u))
    for u, w in right_edges:
        arcs.append((n + u, n + w))
    return FlowNetwork(2 * n, arcs, n_base=n)


def generic_rank(g: MixedGraph, S: Iterable[int], T: Iterable[int]) -> int:
    """Generic rank of the covariance submatrix with rows S and columns T."""
    net = build_flow_graph(g)
    return net.max_flow(S, [net.primed(t) for t in T]).value


def t_separating_cut(
    g: MixedGraph, S: Iterable[int], T: Iterable[int]
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """A minimum t-separating pair (L, R) for sources S and targets T.

    Every trek from S to T intersects L on its left side or R on its right
    side, and |L| + |R| equals generic_rank(g, S, T).  Ties are broken by the
    residual reachability frontier of the deterministic max-flow, so equal
    inputs give equal cuts.
    """
    net = build_flow_graph(g)
    S = sorted(set(S))
    T = sorted(set(T))
    if not S or not T:
        return (), ()
    owners = net.min_cut_nodes(S, [net.primed(t) for t in T])
    left = tuple(x for x in owners if x <= g.n)
    right = tuple(x - g.n for x in owners if x > g.n)
    return left, right
