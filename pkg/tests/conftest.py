import numpy as np
import pytest

from ringadmm.config import ExperimentConfig
from ringadmm.harness import build_problem


def make_cfg(**overrides) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.n_agents = 8
    cfg.eta = 0.5
    cfg.max_iters = 400
    cfg.stop_eps = 0.0
    for key, val in overrides.items():
        setattr(cfg, key, val)
    return cfg


@pytest.fixture
def small_ridge():
    """An 8-agent ridge problem plus its graph, deterministic seeds."""
    cfg = make_cfg()
    graph, problem = build_problem(cfg)
    return cfg, graph, problem


def bfs_connected(graph) -> bool:
    seen = {1}
    frontier = [1]
    while frontier:
        nxt = []
        for u in frontier:
            for v in graph.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return len(seen) == graph.n_agents


def total_gradient_norm(objectives, x: np.ndarray) -> float:
    return float(np.linalg.norm(sum(f.gradient(x) for f in objectives)))
