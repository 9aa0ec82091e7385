"""Shared fixture graphs and helpers for the test suite."""

from __future__ import annotations

import random
from pathlib import Path

from semid import MixedGraph

# Classical instrumental-variable model: 1 -> 2 -> 3 with confounded 2 <-> 3.
IV_GRAPH = MixedGraph(3, [(1, 2), (2, 3)], [(2, 3)])

# Five-vertex graph that is rationally identifiable although the plain
# half-trek criterion certifies nothing; determinantal ratios crack it.
HTC_FAIL_GRAPH = MixedGraph(
    5, [(1, 2), (1, 3), (1, 4), (4, 5)], [(1, 2), (1, 3), (1, 4), (1, 5)]
)

# Graph where the relaxed ratio test accepts sources inside des(v) that the
# strict variant must reject.
DESCENDANT_SOURCE_GRAPH = MixedGraph(
    5, [(1, 2), (2, 3), (4, 3), (3, 5)], [(1, 2), (3, 5), (1, 5)]
)

# All directed edges identifiable except 2 -> 3, which is infinite-to-one.
ONE_EDGE_NONID_GRAPH = MixedGraph(
    5, [(1, 3), (2, 3), (3, 4), (4, 5)], [(1, 4), (2, 3), (2, 5), (3, 5), (4, 5)]
)

# Graph whose edges 4 -> 6 and 5 -> 6 admit a joint 2x2 determinantal system.
JOINT_SYSTEM_GRAPH = MixedGraph(
    6,
    [(1, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 6)],
    [(2, 6), (3, 6), (4, 5), (2, 5), (3, 4)],
)

# Acyclic and cyclic members of the shipped inconclusive corpus.
INCONCLUSIVE_ACYCLIC_GRAPH = MixedGraph(
    5, [(2, 3), (2, 4), (3, 1), (4, 1), (1, 5)], [(1, 2), (2, 3), (2, 4), (2, 5)]
)
INCONCLUSIVE_CYCLIC_GRAPH = MixedGraph(
    5,
    [(1, 2), (2, 3), (2, 4), (2, 5), (3, 4), (4, 1), (5, 1)],
    [(2, 3), (2, 5)],
)

CORPUS_PATH = Path(__file__).resolve().parents[1] / "src" / "semid" / "data" / "corpus_inconclusive_n5.txt"


def corpus_codes() -> list[str]:
    codes = []
    for raw in CORPUS_PATH.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            codes.append(line)
    return codes


def random_mixed_graph(
    rng: random.Random,
    n: int,
    p_directed: float = 0.35,
    p_bidirected: float = 0.3,
    acyclic: bool = False,
) -> MixedGraph:
    """Seeded random graph; acyclic graphs orient all edges low-to-high."""
    directed = set()
    for u in range(1, n + 1):
        for w in range(1, n + 1):
            if u == w or (acyclic and u > w):
                continue
            if rng.random() < p_directed:
                directed.add((u, w))
    bidirected = set()
    for u in range(1, n):
        for w in range(u + 1, n + 1):
            if rng.random() < p_bidirected:
                bidirected.add((u, w))
    return MixedGraph(n, directed, bidirected)
