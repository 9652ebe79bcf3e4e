"""Token-passing incremental consensus solver.

One agent is active per iteration.  It receives the token z, refreshes its
primal/dual pair (x_i, y_i), folds the change into the token, and forwards
the token to the next agent.  The token is, at every iteration, the network
average of x_i - y_i / rho, maintained incrementally so no global
aggregation ever happens.

Variants:
  iadmm           deterministic all-zero start, ring activation order
  iadmm_randinit  random start with x_i^0 = v_i, y_i^0 = rho * v_i
  piadmm1         random start plus a private multiplicative step-size
                  perturbation gamma drawn fresh at every activation
  piadmm2         random start plus additive Gaussian noise on the new x
  wadmm           all-zero start, random-walk activation order (baseline)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .objectives import ProxUnsupportedError
from .records import IterationRecord, RunTrace, StateHistory, Transcript
from .topology import ActivationSchedule, Graph, next_agent


class Variant(str, Enum):
    IADMM = "iadmm"
    IADMM_RANDINIT = "iadmm_randinit"
    PIADMM1 = "piadmm1"
    PIADMM2 = "piadmm2"
    WADMM_BASELINE = "wadmm"


RANDOMIZED_INIT_VARIANTS = frozenset(
    {Variant.IADMM_RANDINIT, Variant.PIADMM1, Variant.PIADMM2}
)


class XUpdateMode(str, Enum):
    EXACT_PROX = "exact_prox"
    FIRST_ORDER = "first_order"


class DivergenceError(RuntimeError):
    """A state became non-finite; the run is aborted with diagnostics."""


@dataclass(frozen=True)
class GammaSpec:
    """Distribution of the private step-size scale gamma.

    kind "constant": always `value`.
    kind "uniform": U(lo, hi); the support must stay strictly positive.
    kind "floor": the deterministic value margin * gamma_lower_bound(rho, L, N),
    the smallest scale for which monotone descent of the augmented
    Lagrangian is guaranteed.
    """

    kind: str
    lo: float = 0.0
    hi: float = 0.0
    value: float = 1.0
    margin: float = 1.0

    @classmethod
    def constant(cls, value: float) -> "GammaSpec":
        if value <= 0:
            raise ValueError("gamma must be positive")
        return cls(kind="constant", value=float(value))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "GammaSpec":
        if lo <= 0 or hi <= lo:
            raise ValueError(f"uniform gamma support ({lo}, {hi}) must be positive")
        return cls(kind="uniform", lo=float(lo), hi=float(hi))

    @classmethod
    def floor(cls, margin: float) -> "GammaSpec":
        if margin <= 0:
            raise ValueError("margin must be positive")
        return cls(kind="floor", margin=float(margin))


@dataclass(frozen=True)
class InitSpec:
    """Initial per-coordinate distribution of v; x^0 = v and y^0 = rho * v,
    which keeps every term x^0 - y^0/rho at exactly zero."""

    kind: str  # "zeros" | "uniform"
    lo: float = 0.0
    hi: float = 0.0

    @classmethod
    def zeros(cls) -> "InitSpec":
        return cls(kind="zeros")

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "InitSpec":
        if hi <= lo:
            raise ValueError("empty init interval")
        return cls(kind="uniform", lo=float(lo), hi=float(hi))


@dataclass
class SolverConfig:
    rho: float
    variant: Variant = Variant.IADMM
    x_update: XUpdateMode = XUpdateMode.EXACT_PROX
    gamma: GammaSpec = field(default_factory=lambda: GammaSpec.constant(1.0))
    sigma: float = 0.0
    init: InitSpec = field(default_factory=InitSpec.zeros)
    seed: int = 0
    max_iters: int = 10_000
    stop_eps: float = 1e-10

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class Problem:
    """Objectives plus the centralized optimum used only for scoring."""

    objectives: Sequence
    x_star: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.x_star)

    @property
    def n_agents(self) -> int:
        return len(self.objectives)

    def lipschitz(self) -> float:
        return max(f.lipschitz_bound() for f in self.objectives)


def gamma_lower_bound(rho: float, lipschitz: float, n_agents: int) -> float:
    """Smallest step-scale for which every iteration provably decreases the
    augmented Lagrangian: max{(2 rho^2 + 4 rho + 1)/(rho - L), 2 (rho + 2) N}."""
    if rho <= lipschitz:
        raise ValueError(f"need rho > L, got rho={rho}, L={lipschitz}")
    return max(
        (2.0 * rho * rho + 4.0 * rho + 1.0) / (rho - lipschitz),
        2.0 * (rho + 2.0) * n_agents,
    )


def sample_gamma(
    spec: GammaSpec,
    rng: np.random.Generator,
    rho: float,
    lipschitz: float,
    n_agents: int,
) -> float:
    if spec.kind == "constant":
        if spec.value <= 0:
            raise ValueError("gamma must be positive")
        return spec.value
    if spec.kind == "uniform":
        if spec.lo <= 0:
            raise ValueError("gamma support touches zero")
        return float(rng.uniform(spec.lo, spec.hi))
    if spec.kind == "floor":
        return spec.margin * gamma_lower_bound(rho, lipschitz, n_agents)
    raise ValueError(f"unknown gamma spec kind {spec.kind!r}")


def x_update(
    objective,
    x_current: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    rho_eff: float,
    mode: XUpdateMode,
) -> np.ndarray:
    """New primal iterate of the active agent.

    exact_prox minimizes f(x) + (rho_eff/2)||z - x + y/rho_eff||^2 exactly;
    first_order takes the linearized step z + y/rho_eff - grad f(x)/rho_eff.
    """
    if rho_eff <= 0:
        raise ValueError("rho_eff must be positive")
    if mode == XUpdateMode.EXACT_PROX:
        return objective.prox(z, y, rho_eff)
    return z + y / rho_eff - objective.gradient(x_current) / rho_eff


def y_update(y: np.ndarray, z: np.ndarray, x_new: np.ndarray, rho_eff: float) -> np.ndarray:
    if rho_eff <= 0:
        raise ValueError("rho_eff must be positive")
    return y + rho_eff * (z - x_new)


def z_update_incremental(
    z: np.ndarray,
    x_old: np.ndarray,
    y_old: np.ndarray,
    x_new: np.ndarray,
    y_new: np.ndarray,
    rho: float,
    n_agents: int,
) -> np.ndarray:
    """Fold one agent's state change into the network average.

    rho here is always the global penalty, never the perturbed step scale;
    otherwise the token would drift off the average it represents.
    """
    return z + ((x_new - y_new / rho) - (x_old - y_old / rho)) / n_agents


def accuracy(
    x: np.ndarray, x_star: np.ndarray, init_dist: np.ndarray
) -> float:
    """Mean over agents of ||x_i - x*|| / ||x_i^0 - x*||.

    Agents whose start coincides with x* are excluded (the mean runs over
    the remaining agents) after a one-time warning; 0.0 if nobody remains.
    """
    included = init_dist > 0.0
    if not np.all(included):
        warnings.warn(
            "accuracy: excluding agents initialized exactly at the optimum",
            stacklevel=2,
        )
    if not included.any():
        return 0.0
    num = np.linalg.norm(x - x_star, axis=1)
    return float(np.mean(num[included] / init_dist[included]))


def aug_lagrangian(
    objectives: Sequence, x: np.ndarray, y: np.ndarray, z: np.ndarray, rho: float
) -> float:
    total = 0.0
    for i, f in enumerate(objectives):
        gap = z - x[i]
        total += f.value(x[i]) + float(y[i] @ gap) + 0.5 * rho * float(gap @ gap)
    return total


def kkt_residuals(
    objectives: Sequence, x: np.ndarray, y: np.ndarray, z: np.ndarray
) -> tuple[float, float, float]:
    """(max_i ||grad f_i(x_i) - y_i||, ||sum_i y_i||, max_i ||z - x_i||)."""
    r_grad = max(
        float(np.linalg.norm(f.gradient(x[i]) - y[i])) for i, f in enumerate(objectives)
    )
    r_sum = float(np.linalg.norm(y.sum(axis=0)))
    r_cons = float(np.max(np.linalg.norm(z - x, axis=1)))
    return r_grad, r_sum, r_cons


def token_gap(x: np.ndarray, y: np.ndarray, z: np.ndarray, rho: float) -> float:
    """Distance between the token and the average it is supposed to carry."""
    avg = np.mean(x - y / rho, axis=0)
    return float(np.linalg.norm(z - avg))


def initialize(
    graph: Graph, config: SolverConfig, dim: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Initial (X, Y, z).

    Deterministic variants start from all zeros.  Randomized variants draw
    v_i per agent and set x_i^0 = v_i, y_i^0 = rho * v_i so that the token
    z^0 = 0 equals the average of x_i^0 - y_i^0 / rho from the start.  The
    stored x is y / rho (one rounding of v), which makes every term
    x_i^0 - y_i^0 / rho zero in exact floating point, not just approximately.
    """
    n = graph.n_agents
    x = np.zeros((n, dim))
    y = np.zeros((n, dim))
    if config.variant in RANDOMIZED_INIT_VARIANTS and config.init.kind != "zeros":
        if config.init.kind != "uniform":
            raise ValueError(f"unknown init kind {config.init.kind!r}")
        for i in range(n):
            v = rng.uniform(config.init.lo, config.init.hi, size=dim)
            y[i] = config.rho * v
            x[i] = y[i] / config.rho
    return x, y, np.zeros(dim)


@dataclass
class RunResult:
    trace: RunTrace
    transcript: Transcript
    history: StateHistory
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    n_iterations: int


class Simulation:
    """Drives one token-passing run; states live in (N, p) arrays."""

    def __init__(
        self,
        problem: Problem,
        graph: Graph,
        config: SolverConfig,
        schedule: ActivationSchedule | None = None,
    ):
        if graph.n_agents != problem.n_agents:
            raise ValueError("graph and problem disagree on the number of agents")
        if schedule is None:
            kind = "random_walk" if config.variant == Variant.WADMM_BASELINE else "cyclic"
            schedule = ActivationSchedule(kind=kind, seed=config.seed)
        self.problem = problem
        self.graph = graph
        self.config = config
        self.schedule = schedule
        self.rng = np.random.default_rng(config.seed)
        self.lipschitz = problem.lipschitz()
        self.x, self.y, self.z = initialize(graph, config, problem.dim, self.rng)
        self._x0 = self.x.copy()
        self._y0 = self.y.copy()
        self._init_dist = np.linalg.norm(self.x - problem.x_star, axis=1)
        self._acc_mask = self._init_dist > 0.0
        if not np.all(self._acc_mask):
            warnings.warn(
                "accuracy: excluding agents initialized exactly at the optimum",
                stacklevel=2,
            )
        self._fvals = np.array(
            [f.value(self.x[i]) for i, f in enumerate(problem.objectives)]
        )
        self.k = 0
        self.comm_units = 0
        self.active = schedule.first_agent()
        self.trace = RunTrace()
        self._senders: list[int] = []
        self._receivers: list[int] = []
        self._z_sent: list[np.ndarray] = []
        self._hist_agent: list[int] = []
        self._hist_x: list[np.ndarray] = []
        self._hist_y: list[np.ndarray] = []

    def step(self) -> IterationRecord:
        cfg = self.config
        k = self.k
        agent = self.active
        i = agent - 1
        obj = self.problem.objectives[i]

        gamma = math.nan
        rho_eff = cfg.rho
        if cfg.variant == Variant.PIADMM1:
            gamma = sample_gamma(
                cfg.gamma, self.rng, cfg.rho, self.lipschitz, self.graph.n_agents
            )
            rho_eff = cfg.rho * gamma

        x_old = self.x[i].copy()
        y_old = self.y[i].copy()
        try:
            x_new = x_update(obj, x_old, y_old, self.z, rho_eff, cfg.x_update)
        except ProxUnsupportedError:
            raise
        omega_norm = math.nan
        if cfg.variant == Variant.PIADMM2:
            omega = self.rng.normal(0.0, cfg.sigma, size=self.problem.dim)
            x_new = x_new + omega
            omega_norm = float(np.linalg.norm(omega))
        y_new = y_update(y_old, self.z, x_new, rho_eff)
        z_new = z_update_incremental(
            self.z, x_old, y_old, x_new, y_new, cfg.rho, self.graph.n_agents
        )

        if not (
            np.all(np.isfinite(x_new))
            and np.all(np.isfinite(y_new))
            and np.all(np.isfinite(z_new))
        ):
            raise DivergenceError(
                f"non-finite state at iteration {k} (agent {agent}); "
                f"the configured step scale is likely unstable"
            )

        self.x[i] = x_new
        self.y[i] = y_new
        self.z = z_new
        self._fvals[i] = obj.value(x_new)
        receiver = next_agent(self.schedule, self.graph, k, agent)
        self.comm_units += 1

        self._senders.append(agent)
        self._receivers.append(receiver)
        self._z_sent.append(z_new.copy())
        self._hist_agent.append(agent)
        self._hist_x.append(x_new.copy())
        self._hist_y.append(y_new.copy())

        # metrics, vectorized over agents; gaps are formed before any reduction
        # so near-consensus values do not cancel catastrophically
        gap = self.z - self.x
        pen = float(np.einsum("ij,ij->", gap, gap))
        lin = float(np.einsum("ij,ij->", self.y, gap))
        lagr = float(self._fvals.sum()) + lin + 0.5 * cfg.rho * pen
        r_primal = float(np.sqrt(np.einsum("ij,ij->i", gap, gap).max()))
        if self._acc_mask.any():
            diff = self.x - self.problem.x_star
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            acc = float(np.mean(dist[self._acc_mask] / self._init_dist[self._acc_mask]))
        else:
            acc = 0.0  # every agent started at the optimum

        rec = IterationRecord(
            k=k,
            agent=agent,
            accuracy=acc,
            aug_lagrangian=lagr,
            r_primal=r_primal,
            r_dualstep=float(np.linalg.norm(y_new - y_old)),
            r_gradsum=float(np.linalg.norm(self.y.sum(axis=0))),
            comm_units=self.comm_units,
            gamma=gamma,
            omega_norm=omega_norm,
        )
        if not (math.isfinite(lagr) and math.isfinite(acc) and math.isfinite(r_primal)):
            raise DivergenceError(
                f"metrics overflowed at iteration {k} (agent {agent}); "
                f"the run is diverging"
            )
        self.trace.append(rec)
        self.k += 1
        self.active = receiver
        return rec

    def run(self) -> RunResult:
        cfg = self.config
        stopped_by_eps = False
        try:
            for _ in range(cfg.max_iters):
                rec = self.step()
                if rec.r_primal < cfg.stop_eps:
                    stopped_by_eps = True
                    self.trace.stop_reason = "primal_eps"
                    break
            else:
                self.trace.stop_reason = "max_iters"
        except DivergenceError as exc:
            self.trace.diverged = True
            self.trace.stop_reason = f"diverged: {exc}"
        transcript = Transcript(
            n_agents=self.graph.n_agents,
            rho=cfg.rho,
            senders=np.array(self._senders, dtype=np.int64),
            receivers=np.array(self._receivers, dtype=np.int64),
            z_values=np.array(self._z_sent),
            deterministic_init=cfg.variant not in RANDOMIZED_INIT_VARIANTS
            or cfg.init.kind == "zeros",
            stopped_by_eps=stopped_by_eps,
            stop_eps=cfg.stop_eps,
        )
        history = StateHistory(
            x0=self._x0,
            y0=self._y0,
            agents=np.array(self._hist_agent, dtype=np.int64),
            x_new=np.array(self._hist_x),
            y_new=np.array(self._hist_y),
        )
        return RunResult(
            trace=self.trace,
            transcript=transcript,
            history=history,
            x=self.x,
            y=self.y,
            z=self.z,
            n_iterations=self.k,
        )


def run(
    problem: Problem,
    graph: Graph,
    config: SolverConfig,
    schedule: ActivationSchedule | None = None,
) -> RunResult:
    return Simulation(problem, graph, config, schedule).run()


def descent_regimes(
    rho: float, lipschitz: float, n_agents: int, gamma: GammaSpec
) -> dict[str, bool]:
    """Which sufficient descent conditions the configuration satisfies."""
    out = {"descent_fixed_step": rho >= 2.0 * lipschitz + 2.0}
    ok = False
    if rho > lipschitz:
        floor = gamma_lower_bound(rho, lipschitz, n_agents)
        if gamma.kind == "constant":
            ok = gamma.value > floor
        elif gamma.kind == "uniform":
            ok = gamma.lo > floor
        elif gamma.kind == "floor":
            ok = gamma.margin > 1.0
    out["descent_perturbed_step"] = ok
    return out
