"""Connected random graphs with an embedded ring, plus activation orders.

Agents are numbered 1..N.  Every generated graph contains the ring
1 -> 2 -> ... -> N -> 1 by construction; extra edges are sampled uniformly
without replacement until the target density is met, so connectivity never
needs to be searched for.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import IO, Literal

import numpy as np


@dataclass(frozen=True)
class Graph:
    n_agents: int
    edges: frozenset[tuple[int, int]]  # (u, v) with u < v, 1-indexed
    # ring order is agent-id order: successor of i is i % N + 1

    def __post_init__(self) -> None:
        n = self.n_agents
        for u, v in self.edges:
            if not (1 <= u < v <= n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} agents")
        for i in range(1, n + 1):
            j = i % n + 1
            if (min(i, j), max(i, j)) not in self.edges:
                raise ValueError(f"ring edge ({i}, {j}) missing")

    @cached_property
    def neighbors(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {i: [] for i in range(1, self.n_agents + 1)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return {i: tuple(sorted(js)) for i, js in adj.items()}

    def cycle_successor(self, agent: int) -> int:
        return agent % self.n_agents + 1


def target_edge_count(n_agents: int, eta: float) -> int:
    # round() is round-half-to-even on ties
    return round(eta * n_agents * (n_agents - 1) / 2)


def generate_graph(n_agents: int, eta: float, seed: int) -> Graph:
    """Connected graph on ``n_agents`` with edge count round(eta*N(N-1)/2).

    The ring over id order is inserted first; remaining edges are drawn
    uniformly without replacement.  eta must be large enough for the ring
    to fit.
    """
    if n_agents < 3:
        raise ValueError("need at least 3 agents")
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    target = target_edge_count(n_agents, eta)
    if target < n_agents:
        raise ValueError(
            f"eta={eta} gives {target} edges, fewer than the {n_agents} ring edges"
        )
    edges = {
        (min(i, i % n_agents + 1), max(i, i % n_agents + 1))
        for i in range(1, n_agents + 1)
    }
    pool = [
        (u, v)
        for u in range(1, n_agents + 1)
        for v in range(u + 1, n_agents + 1)
        if (u, v) not in edges
    ]
    extra = target - len(edges)
    rng = np.random.default_rng(seed)
    if extra > 0:
        picks = rng.choice(len(pool), size=extra, replace=False)
        for idx in picks:
            edges.add(pool[idx])
    return Graph(n_agents, frozenset(edges))


@dataclass(frozen=True)
class ActivationSchedule:
    """Which agent is active at iteration k.

    cyclic: agent (k mod N) + 1, the fixed ring order.
    random_walk: a uniformly random neighbor of the previous agent, drawn
    from a stream keyed by (seed, k) so the walk is reproducible and
    queries are order-independent.
    """

    kind: Literal["cyclic", "random_walk"]
    seed: int = 0

    def first_agent(self) -> int:
        return 1


def next_agent(schedule: ActivationSchedule, graph: Graph, k: int, prev: int) -> int:
    if not (1 <= prev <= graph.n_agents):
        raise ValueError(f"agent {prev} out of range")
    if schedule.kind == "cyclic":
        return graph.cycle_successor(prev)
    nbrs = graph.neighbors[prev]
    if not nbrs:
        raise ValueError(f"agent {prev} has no neighbors")
    rng = np.random.default_rng([schedule.seed, k])
    return nbrs[int(rng.integers(0, len(nbrs)))]


def write_edgelist(graph: Graph, fh: IO[str]) -> None:
    """Text edge list: first line N, then one "u v" line per edge."""
    fh.write(f"{graph.n_agents}\n")
    for u, v in sorted(graph.edges):
        fh.write(f"{u} {v}\n")


def read_edgelist(fh: IO[str]) -> Graph:
    lines = [ln.strip() for ln in fh if ln.strip()]
    n = int(lines[0])
    edges = set()
    for ln in lines[1:]:
        u, v = (int(tok) for tok in ln.split())
        edges.add((min(u, v), max(u, v)))
    return Graph(n, frozenset(edges))
