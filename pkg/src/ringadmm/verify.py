"""Small-scale invariant suite behind the `verify` CLI command.

Every check re-derives its expectation independently of the code path it
exercises (BFS for connectivity, finite differences for gradients, full
re-averaging for the token, and so on) and runs in well under a minute.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import adversary, linalg, objectives, solver, topology
from .config import ExperimentConfig
from .harness import build_problem


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _bfs_connected(graph: topology.Graph) -> bool:
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


def check_dense_solve() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for p in (1, 2, 4):
        for _ in range(20):
            a = rng.standard_normal((p, p)) + p * np.eye(p)
            b = rng.standard_normal(p)
            x = linalg.solve_dense(a, b)
            worst = max(worst, np.linalg.norm(a @ x - b) / (1 + np.linalg.norm(b)))
    return worst <= 1e-10, f"worst relative residual {worst:.2e}"


def check_lsqr() -> tuple[bool, str]:
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(10):
        a = rng.standard_normal((20, 10))
        x_true = rng.standard_normal(10)
        trips = [(i, j, float(a[i, j])) for i in range(20) for j in range(10)]
        system = linalg.SparseSystem.from_triplets(20, 10, trips, a @ x_true)
        res = linalg.lsqr(system, tol=1e-12)
        worst = max(worst, np.linalg.norm(res.x - x_true) / np.linalg.norm(x_true))
        if np.any(np.diff(res.residual_history) > 1e-12):
            return False, "residual history not monotone"
    return worst <= 1e-8, f"worst planted-solution error {worst:.2e}"


def check_graphs() -> tuple[bool, str]:
    for n, eta, seed in ((10, 0.25, 3), (20, 0.3, 4), (12, 1.0, 5)):
        g = topology.generate_graph(n, eta, seed)
        if not _bfs_connected(g):
            return False, f"graph N={n} eta={eta} not connected"
        if len(g.edges) != topology.target_edge_count(n, eta):
            return False, f"edge count mismatch at N={n} eta={eta}"
    sched = topology.ActivationSchedule("cyclic")
    g = topology.generate_graph(6, 1.0, 0)
    order = []
    agent = 1
    for k in range(12):
        order.append(agent)
        agent = topology.next_agent(sched, g, k, agent)
    if order != [1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6]:
        return False, f"cyclic order wrong: {order}"
    return True, "connectivity, density, and ring order verified"


def check_gradients() -> tuple[bool, str]:
    rng = np.random.default_rng(9)
    h = 1e-5
    worst_r, worst_l = 0.0, 0.0
    ridge = objectives.RidgeObjective(objectives.generate_ridge_data(12, 3, 10))
    logi = objectives.LogisticObjective(objectives.generate_logistic_data(12, 3, 11, 12))
    for _ in range(25):
        x = rng.standard_normal(3)
        for obj, slot in ((ridge, "r"), (logi, "l")):
            g = obj.gradient(x)
            fd = np.zeros(3)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                fd[j] = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
            rel = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12)
            if slot == "r":
                worst_r = max(worst_r, rel)
            else:
                worst_l = max(worst_l, rel)
    ok = worst_r <= 1e-9 and worst_l <= 1e-5
    return ok, f"finite-diff rel err: quadratic {worst_r:.1e}, logistic {worst_l:.1e}"


def check_prox_stationarity() -> tuple[bool, str]:
    rng = np.random.default_rng(13)
    ridge = objectives.RidgeObjective(objectives.generate_ridge_data(15, 2, 14))
    worst = 0.0
    for _ in range(20):
        z = rng.standard_normal(2)
        y = rng.standard_normal(2)
        rho_eff = float(rng.uniform(0.5, 20.0))
        x = ridge.prox(z, y, rho_eff)
        gap = ridge.gradient(x) - (y + rho_eff * (z - x))
        worst = max(worst, float(np.linalg.norm(gap)))
    return worst <= 1e-10, f"worst prox stationarity gap {worst:.2e}"


def _quick_cfg(**kw) -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.n_agents = kw.pop("n_agents", 8)
    cfg.eta = kw.pop("eta", 0.5)
    cfg.max_iters = kw.pop("max_iters", 400)
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def check_token_conservation() -> tuple[bool, str]:
    worst = 0.0
    for variant, init, gamma, sigma in (
        (solver.Variant.IADMM, solver.InitSpec.zeros(), solver.GammaSpec.constant(1.0), 0.0),
        (solver.Variant.IADMM_RANDINIT, solver.InitSpec.uniform(0, 100),
         solver.GammaSpec.constant(1.0), 0.0),
        (solver.Variant.PIADMM1, solver.InitSpec.uniform(0, 100),
         solver.GammaSpec.uniform(0.9, 1.1), 0.0),
        (solver.Variant.PIADMM2, solver.InitSpec.uniform(0, 100),
         solver.GammaSpec.constant(1.0), 1e-3),
        (solver.Variant.WADMM_BASELINE, solver.InitSpec.zeros(),
         solver.GammaSpec.constant(1.0), 0.0),
    ):
        cfg = _quick_cfg(variant=variant, init=init, gamma=gamma, sigma=sigma,
                         stop_eps=0.0)
        graph, problem = build_problem(cfg)
        sim = solver.Simulation(problem, graph, cfg.solver_config())
        for _ in range(cfg.max_iters):
            sim.step()
            worst = max(worst, solver.token_gap(sim.x, sim.y, sim.z, cfg.rho))
    return worst <= 1e-10, f"worst token drift {worst:.2e}"


def check_dual_gradient_identity() -> tuple[bool, str]:
    cfg = _quick_cfg(variant=solver.Variant.IADMM)
    graph, problem = build_problem(cfg)
    sim = solver.Simulation(problem, graph, cfg.solver_config())
    worst = 0.0
    for _ in range(200):
        rec = sim.step()
        i = rec.agent - 1
        grad = problem.objectives[i].gradient(sim.x[i])
        worst = max(worst, float(np.linalg.norm(grad - sim.y[i])))
    return worst <= 1e-9, f"worst |grad - dual| after activation {worst:.2e}"


def check_reductions() -> tuple[bool, str]:
    base = _quick_cfg(variant=solver.Variant.IADMM_RANDINIT,
                      init=solver.InitSpec.uniform(0, 100), stop_eps=0.0,
                      max_iters=200)
    graph, problem = build_problem(base)
    ref = solver.run(problem, graph, base.solver_config())
    for variant, gamma, sigma in (
        (solver.Variant.PIADMM1, solver.GammaSpec.constant(1.0), 0.0),
        (solver.Variant.PIADMM2, solver.GammaSpec.constant(1.0), 0.0),
    ):
        cfg = _quick_cfg(variant=variant, init=solver.InitSpec.uniform(0, 100),
                         gamma=gamma, sigma=sigma, stop_eps=0.0, max_iters=200)
        res = solver.run(problem, graph, cfg.solver_config())
        if not (np.array_equal(res.x, ref.x) and np.array_equal(res.y, ref.y)
                and np.array_equal(res.z, ref.z)):
            return False, f"{variant.value} does not reduce bit-exactly"
    return True, "unit step scale and zero noise reduce bit-exactly"


def check_exact_attack() -> tuple[bool, str]:
    cfg = _quick_cfg(variant=solver.Variant.IADMM, max_iters=50 * 8, stop_eps=0.0)
    graph, problem = build_problem(cfg)
    result = solver.run(problem, graph, cfg.solver_config())
    rep = adversary.exact_recursion_attack(result.transcript)
    adversary.score_report(rep, result.history)
    worst = max(
        max(rep.err_x[a].max(), rep.err_y[a].max()) for a in rep.agents
    )
    return worst <= 1e-9, f"worst reconstruction error {worst:.2e}"


def check_backward_bounds() -> tuple[bool, str]:
    cfg = _quick_cfg(variant=solver.Variant.IADMM, max_iters=50_000, stop_eps=1e-4)
    graph, problem = build_problem(cfg)
    result = solver.run(problem, graph, cfg.solver_config())
    eps = cfg.stop_eps
    rep = adversary.terminal_backward_attack(result.transcript, eps=eps)
    adversary.score_report(rep, result.history)
    target = rep.agents[0]
    acts = adversary.activations_of(result.transcript, target)
    total = result.transcript.last_iteration // cfg.n_agents
    last = result.transcript.last_iteration
    for n in range(1, total + 1):
        k_rep = last - (n - 1) * cfg.n_agents
        bx, by = adversary.backward_error_bounds(n, total, eps, cfg.rho)
        if np.linalg.norm(rep.err_x[target][k_rep]) >= bx:
            return False, f"x bound violated at epoch {n}"
        if np.linalg.norm(rep.err_y[target][k_rep]) >= by:
            return False, f"y bound violated at epoch {n}"
    _ = acts
    return True, f"bounds hold over {total} epochs"


def check_system_oracle() -> tuple[bool, str]:
    # short run, exact rows only: the pins are asymptotic and are exercised
    # by the longer converged runs in the test suite instead
    cfg = _quick_cfg(variant=solver.Variant.IADMM_RANDINIT,
                     init=solver.InitSpec.uniform(0, 10), max_iters=1_000)
    graph, problem = build_problem(cfg)
    result = solver.run(problem, graph, cfg.solver_config())
    ms = adversary.build_ls_system(result.transcript, kkt_row=False,
                                   pin_last_cycle=False)
    resid = adversary.system_truth_residual(ms, result.history)
    full = adversary.build_ls_system(result.transcript)
    counts = adversary.count_equations_unknowns(
        "randinit", result.transcript.last_iteration, cfg.n_agents,
        kkt_row=True, pin_last_cycle=True,
    )
    if full.shape != counts.implemented:
        return False, f"system shape {full.shape} != counted {counts.implemented}"
    return resid <= 1e-9, f"truth residual through exact system rows {resid:.2e}"


def check_config_roundtrip() -> tuple[bool, str]:
    cfg = _quick_cfg(variant=solver.Variant.PIADMM1,
                     gamma=solver.GammaSpec.uniform(0.9, 1.1),
                     init=solver.InitSpec.uniform(0, 100))
    text = cfg.to_text()
    again = ExperimentConfig.from_text(text)
    return again.to_text() == text, "parse -> serialize -> parse is stable"


ALL_CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("dense_solve_residual", check_dense_solve),
    ("lsqr_planted_recovery", check_lsqr),
    ("graph_generation", check_graphs),
    ("gradient_finite_differences", check_gradients),
    ("prox_stationarity", check_prox_stationarity),
    ("token_conservation", check_token_conservation),
    ("dual_gradient_identity", check_dual_gradient_identity),
    ("reduction_identities", check_reductions),
    ("exact_recursion_attack", check_exact_attack),
    ("backward_error_bounds", check_backward_bounds),
    ("measurement_system_oracle", check_system_oracle),
    ("config_roundtrip", check_config_roundtrip),
]


def run_all(quiet: bool = False) -> list[CheckResult]:
    results = []
    for name, fn in ALL_CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        results.append(CheckResult(name, ok, detail, dt))
        if not quiet:
            print(f"{'PASS' if ok else 'FAIL'} {name} ({dt:.2f}s): {detail}")
    return results
