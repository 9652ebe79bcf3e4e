"""Passive attacks that try to reconstruct per-agent states from the token
transcript alone.

Against the deterministic all-zero start the token differences invert
exactly: each iteration contributes two linear equations in the two values
the active agent just produced, so the whole run unrolls forward.  Against
randomized starts the same relations only yield an under-determined linear
system; the attacks then assume a unit step scale, optionally add the
stationarity row (sum of duals is zero) and pin the last observed cycle to
the token, and take the least-squares solution.

Ground truth enters only through `score_report`, never through estimation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from .linalg import LsqrResult, SparseSystem, lsqr
from .records import StateHistory, Transcript


class AttackPreconditionError(RuntimeError):
    """The transcript does not satisfy the attack's stated precondition."""


@dataclass
class AttackReport:
    """Per-iteration state estimates for one or more agents.

    est_x[agent] has shape (K+2, p): row k is the estimate of that agent's
    x at the start of iteration k, plus the post-final state at K+1.
    Truth and absolute-error arrays are filled by `score_report` only.
    """

    kind: str
    n_agents: int
    rho: float
    last_iteration: int
    est_x: dict[int, np.ndarray] = field(default_factory=dict)
    est_y: dict[int, np.ndarray] = field(default_factory=dict)
    truth_x: dict[int, np.ndarray] = field(default_factory=dict)
    truth_y: dict[int, np.ndarray] = field(default_factory=dict)
    err_x: dict[int, np.ndarray] = field(default_factory=dict)
    err_y: dict[int, np.ndarray] = field(default_factory=dict)
    dims: tuple[int, int] | None = None
    residual_norms: list[float] = field(default_factory=list)
    lsqr_converged: bool = True
    init_assumption_violated: bool = False
    notes: str = ""

    @property
    def agents(self) -> list[int]:
        return sorted(self.est_x)

    def gradient_estimates(self, agent: int, activations: list[int]) -> np.ndarray:
        """Estimated grad f_agent at its post-activation states: identical to
        the dual estimates there, since the exact x-step equates the two."""
        return self.est_y[agent][[k + 1 for k in activations]]

    def write_csv(self, fh: IO[str], agent: int, coordinates: list[int] | None = None) -> None:
        """Columns: k, coordinate (1-indexed), truth_x, est_x, truth_y, est_y,
        abs_err_x, abs_err_y.  Truth columns are empty when unscored."""
        fh.write("#schema=1\n")
        w = csv.writer(fh)
        w.writerow(
            ["k", "coordinate", "truth_x", "est_x", "truth_y", "est_y",
             "abs_err_x", "abs_err_y"]
        )
        ex = self.est_x[agent]
        ey = self.est_y[agent]
        tx = self.truth_x.get(agent)
        ty = self.truth_y.get(agent)
        p = ex.shape[1]
        coords = coordinates if coordinates is not None else list(range(1, p + 1))
        for k in range(ex.shape[0]):
            for c in coords:
                j = c - 1
                row = [k, c]
                if tx is not None:
                    row += [repr(float(tx[k, j])), repr(float(ex[k, j])),
                            repr(float(ty[k, j])), repr(float(ey[k, j])),
                            repr(abs(float(ex[k, j] - tx[k, j]))),
                            repr(abs(float(ey[k, j] - ty[k, j])))]
                else:
                    row += ["", repr(float(ex[k, j])), "", repr(float(ey[k, j])), "", ""]
                w.writerow(row)


def score_report(report: AttackReport, history: StateHistory) -> AttackReport:
    """Fill truth and absolute-error arrays from the simulator's history."""
    for agent in report.agents:
        xs, ys = history.trajectory(agent)
        kk = report.est_x[agent].shape[0]
        report.truth_x[agent] = xs[:kk]
        report.truth_y[agent] = ys[:kk]
        report.err_x[agent] = np.abs(report.est_x[agent] - xs[:kk])
        report.err_y[agent] = np.abs(report.est_y[agent] - ys[:kk])
    return report


def activations_of(transcript: Transcript, agent: int) -> list[int]:
    return [k for k in range(transcript.last_iteration + 1) if transcript.senders[k] == agent]


def _expand_epochs(
    values_x: dict[tuple[int, int], np.ndarray],
    values_y: dict[tuple[int, int], np.ndarray],
    acts: dict[int, list[int]],
    agents: list[int],
    last_k: int,
    p: int,
) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    out_x: dict[int, np.ndarray] = {}
    out_y: dict[int, np.ndarray] = {}
    for a in agents:
        xs = np.empty((last_k + 2, p))
        ys = np.empty((last_k + 2, p))
        e = 0
        cur_x = values_x[(a, 0)]
        cur_y = values_y[(a, 0)]
        xs[0], ys[0] = cur_x, cur_y
        act_set = set(acts[a])
        for k in range(last_k + 1):
            if k in act_set:
                e += 1
                cur_x = values_x[(a, e)]
                cur_y = values_y[(a, e)]
            xs[k + 1], ys[k + 1] = cur_x, cur_y
        out_x[a] = xs
        out_y[a] = ys
    return out_x, out_y


def exact_recursion_attack(transcript: Transcript) -> AttackReport:
    """Unroll the token differences forward from the assumed all-zero start.

    Each iteration k gives two equations in the active agent's fresh pair:
        x_new = (N*Delta + z^k + x_prev) / 2
        y_new = y_prev + (rho/2) (z^k - N*Delta - x_prev)
    With x_prev, y_prev known (zero at the start), both are determined, and
    the gradient at the new point equals y_new.
    """
    n = transcript.n_agents
    rho = transcript.rho
    p = transcript.dim
    last = transcript.last_iteration
    cur_x = {a: np.zeros(p) for a in range(1, n + 1)}
    cur_y = {a: np.zeros(p) for a in range(1, n + 1)}
    vals_x: dict[tuple[int, int], np.ndarray] = {(a, 0): cur_x[a].copy() for a in cur_x}
    vals_y: dict[tuple[int, int], np.ndarray] = {(a, 0): cur_y[a].copy() for a in cur_y}
    epoch = {a: 0 for a in cur_x}
    acts: dict[int, list[int]] = {a: [] for a in cur_x}
    z_prev = np.zeros(p)
    for k in range(last + 1):
        a = int(transcript.senders[k])
        delta = transcript.z_values[k] - z_prev
        x_new = 0.5 * (n * delta + z_prev + cur_x[a])
        y_new = cur_y[a] + 0.5 * rho * (z_prev - n * delta - cur_x[a])
        cur_x[a] = x_new
        cur_y[a] = y_new
        epoch[a] += 1
        vals_x[(a, epoch[a])] = x_new
        vals_y[(a, epoch[a])] = y_new
        acts[a].append(k)
        z_prev = transcript.z_values[k]
    est_x, est_y = _expand_epochs(vals_x, vals_y, acts, list(cur_x), last, p)
    return AttackReport(
        kind="exact_recursion",
        n_agents=n,
        rho=rho,
        last_iteration=last,
        est_x=est_x,
        est_y=est_y,
        init_assumption_violated=not transcript.deterministic_init,
        notes="" if transcript.deterministic_init else
        "transcript declares a randomized start; zero-start recursion will be off",
    )


def backward_error_bounds(
    n_epoch: int, total_epochs: int, eps: float, rho: float
) -> tuple[float, float]:
    """Worst-case estimate errors after unrolling n_epoch steps backward from
    a token pinned within eps of the final state: the x error doubles per
    step, and the y error telescopes to rho (2^(C+1) - 2^n) eps."""
    return (2.0**n_epoch) * eps, rho * (2.0 ** (total_epochs + 1) - 2.0**n_epoch) * eps


def terminal_backward_attack(transcript: Transcript, eps: float) -> AttackReport:
    """Estimate the final active agent's whole trajectory by treating the last
    token as its final state and unrolling the recursion backward, then
    rebuilding the duals forward from y^0 = rho x^0.

    Requires the run to have declared convergence within eps.
    """
    if not transcript.stopped_by_eps or not (transcript.stop_eps <= eps):
        raise AttackPreconditionError(
            f"transcript does not declare convergence within eps={eps}"
        )
    n = transcript.n_agents
    rho = transcript.rho
    p = transcript.dim
    last = transcript.last_iteration
    target = int(transcript.senders[last])
    acts = activations_of(transcript, target)

    # backward pass: post[idx] estimates the state set at activation acts[idx]
    post = [np.zeros(p) for _ in acts]
    pre = [np.zeros(p) for _ in acts]
    post[-1] = transcript.z_values[last].copy()
    for idx in range(len(acts) - 1, -1, -1):
        k0 = acts[idx]
        z_k = transcript.z_before(k0)
        delta = transcript.z_values[k0] - z_k
        pre[idx] = 2.0 * post[idx] - n * delta - z_k
        if idx > 0:
            post[idx - 1] = pre[idx]
    x_init = pre[0]

    # forward dual pass from y^0 = rho x^0
    vals_x = {(target, 0): x_init}
    vals_y = {(target, 0): rho * x_init}
    y_cur = rho * x_init
    for idx, k0 in enumerate(acts):
        z_k = transcript.z_before(k0)
        delta = transcript.z_values[k0] - z_k
        y_cur = y_cur + 0.5 * rho * (z_k - n * delta - pre[idx])
        vals_x[(target, idx + 1)] = post[idx]
        vals_y[(target, idx + 1)] = y_cur.copy()
    est_x, est_y = _expand_epochs(vals_x, vals_y, {target: acts}, [target], last, p)
    return AttackReport(
        kind="terminal_backward",
        n_agents=n,
        rho=rho,
        last_iteration=last,
        est_x=est_x,
        est_y=est_y,
        notes=f"target agent {target}, eps={eps}",
    )


@dataclass
class MeasurementSystem:
    """Per-coordinate sparse systems sharing one matrix structure.

    Unknowns are indexed per (agent, epoch, which) where an agent's epoch
    advances only at its own activations; states are constant in between, so
    nothing is lost and the column count stays small.
    """

    systems: list[SparseSystem]
    columns: dict[tuple[int, int, str], int]
    row_tags: list[str]
    n_agents: int
    rho: float
    last_iteration: int
    activations: dict[int, list[int]]

    @property
    def shape(self) -> tuple[int, int]:
        return self.systems[0].n_rows, self.systems[0].n_cols


def build_ls_system(
    transcript: Transcript,
    last_k: int | None = None,
    kkt_row: bool = True,
    pin_last_cycle: bool = True,
) -> MeasurementSystem:
    """Assemble the eavesdropper's linear system with unit step scale assumed.

    Rows, per coordinate:
      init             x_i^0 - y_i^0 / rho = 0 for every agent; when the
                        transcript declares the deterministic all-zero start,
                        x_i^0 = 0 and y_i^0 = 0 are added as well, since the
                        protocol makes them public
      recursion_x/_y   the two token-difference relations per iteration
      kkt_sum          sum of all duals at the last iteration = 0 (optional)
      convergence_pin  the last cycle's fresh x equals the observed token
                        (optional; needs at least one full cycle)
    """
    n = transcript.n_agents
    rho = transcript.rho
    p = transcript.dim
    last = transcript.last_iteration if last_k is None else last_k
    if not (0 <= last <= transcript.last_iteration):
        raise ValueError(f"last_k={last_k} outside transcript")
    if pin_last_cycle and last + 1 < n:
        raise ValueError("pin_last_cycle needs at least one full cycle of iterations")

    acts: dict[int, list[int]] = {a: [] for a in range(1, n + 1)}
    for k in range(last + 1):
        acts[int(transcript.senders[k])].append(k)
    columns: dict[tuple[int, int, str], int] = {}
    nc = 0
    for a in range(1, n + 1):
        for e in range(len(acts[a]) + 1):
            columns[(a, e, "x")] = nc
            nc += 1
            columns[(a, e, "y")] = nc
            nc += 1

    triplets: list[tuple[int, int, float]] = []
    rhs: list[list[float]] = [[] for _ in range(p)]
    row_tags: list[str] = []
    r = 0

    def add_row(entries: list[tuple[int, float]], rv: np.ndarray, tag: str) -> None:
        nonlocal r
        for c, v in entries:
            triplets.append((r, c, v))
        for ci in range(p):
            rhs[ci].append(float(rv[ci]))
        row_tags.append(tag)
        r += 1

    zero = np.zeros(p)
    for a in range(1, n + 1):
        add_row(
            [(columns[(a, 0, "x")], 1.0), (columns[(a, 0, "y")], -1.0 / rho)],
            zero,
            "init",
        )
        if transcript.deterministic_init:
            add_row([(columns[(a, 0, "x")], 1.0)], zero, "init")
            add_row([(columns[(a, 0, "y")], 1.0)], zero, "init")
    epoch = {a: 0 for a in range(1, n + 1)}
    z_prev = np.zeros(p)
    for k in range(last + 1):
        a = int(transcript.senders[k])
        e = epoch[a]
        delta = transcript.z_values[k] - z_prev
        add_row(
            [(columns[(a, e + 1, "x")], 1.0), (columns[(a, e, "x")], -0.5)],
            0.5 * (n * delta + z_prev),
            "recursion_x",
        )
        add_row(
            [
                (columns[(a, e + 1, "y")], 1.0),
                (columns[(a, e, "y")], -1.0),
                (columns[(a, e, "x")], rho / 2.0),
            ],
            (rho / 2.0) * (z_prev - n * delta),
            "recursion_y",
        )
        epoch[a] += 1
        z_prev = transcript.z_values[k]

    if kkt_row:
        ep_at_last = {a: 0 for a in range(1, n + 1)}
        for k in range(last):
            ep_at_last[int(transcript.senders[k])] += 1
        add_row(
            [(columns[(a, ep_at_last[a], "y")], 1.0) for a in range(1, n + 1)],
            zero,
            "kkt_sum",
        )
    if pin_last_cycle:
        for j in range(n):
            k = last - j
            a = int(transcript.senders[k])
            add_row(
                [(columns[(a, epoch[a], "x")], 1.0)],
                transcript.z_values[k],
                "convergence_pin",
            )

    base = SparseSystem.from_triplets(r, nc, triplets, np.array(rhs[0]))
    systems = [base] + [base.with_rhs(np.array(rhs[ci])) for ci in range(1, p)]
    return MeasurementSystem(
        systems=systems,
        columns=columns,
        row_tags=row_tags,
        n_agents=n,
        rho=rho,
        last_iteration=last,
        activations=acts,
    )


def _solve_system(
    ms: MeasurementSystem, tol: float, max_iter: int | None
) -> tuple[list[LsqrResult], dict[tuple[int, int], np.ndarray], dict[tuple[int, int], np.ndarray]]:
    p = len(ms.systems)
    results = [lsqr(sysm, tol=tol, max_iter=max_iter) for sysm in ms.systems]
    vals_x: dict[tuple[int, int], np.ndarray] = {}
    vals_y: dict[tuple[int, int], np.ndarray] = {}
    for (a, e, which), c in ms.columns.items():
        vec = np.array([results[ci].x[c] for ci in range(p)])
        if which == "x":
            vals_x[(a, e)] = vec
        else:
            vals_y[(a, e)] = vec
    return results, vals_x, vals_y


def lsq_attack(
    transcript: Transcript,
    kkt_row: bool = True,
    pin_last_cycle: bool = True,
    tol: float = 1e-10,
    max_iter: int | None = None,
    agents: list[int] | None = None,
) -> AttackReport:
    """Least-squares state reconstruction from the token transcript."""
    ms = build_ls_system(transcript, kkt_row=kkt_row, pin_last_cycle=pin_last_cycle)
    results, vals_x, vals_y = _solve_system(ms, tol, max_iter)
    wanted = agents if agents is not None else list(range(1, ms.n_agents + 1))
    est_x, est_y = _expand_epochs(
        vals_x, vals_y, ms.activations, wanted, ms.last_iteration, transcript.dim
    )
    return AttackReport(
        kind="lsq",
        n_agents=ms.n_agents,
        rho=ms.rho,
        last_iteration=ms.last_iteration,
        est_x=est_x,
        est_y=est_y,
        dims=ms.shape,
        residual_norms=[res.residual_norm for res in results],
        lsqr_converged=all(res.converged for res in results),
    )


def build_colluding_system(
    transcript: Transcript,
    target: int,
    colluder_final_y_sum: np.ndarray | None = None,
    pin: bool = True,
    gamma_assumed: float = 1.0,
) -> MeasurementSystem:
    """System available to all agents except `target` pooling their knowledge.

    Only the rows involving the target's own activations carry new
    information; with the step scale fixed to `gamma_assumed` they are
    linear (the true per-activation scales stay private, so 1 is the neutral
    guess; other values support controlled mis-modeling experiments).  The
    colluders' summed final dual turns the stationarity condition into the
    extra row y_target = -(sum of colluders' duals), and the last token pins
    the target's final state.
    """
    n = transcript.n_agents
    rho = transcript.rho
    p = transcript.dim
    last = transcript.last_iteration
    acts = activations_of(transcript, target)
    if not acts:
        raise ValueError(f"agent {target} never activates in the transcript")
    columns: dict[tuple[int, int, str], int] = {}
    nc = 0
    for e in range(len(acts) + 1):
        columns[(target, e, "x")] = nc
        nc += 1
        columns[(target, e, "y")] = nc
        nc += 1
    triplets: list[tuple[int, int, float]] = []
    rhs: list[list[float]] = [[] for _ in range(p)]
    row_tags: list[str] = []
    r = 0

    def add_row(entries: list[tuple[int, float]], rv: np.ndarray, tag: str) -> None:
        nonlocal r
        for c, v in entries:
            triplets.append((r, c, v))
        for ci in range(p):
            rhs[ci].append(float(rv[ci]))
        row_tags.append(tag)
        r += 1

    zero = np.zeros(p)
    g = gamma_assumed
    if g <= 0:
        raise ValueError("gamma_assumed must be positive")
    add_row(
        [(columns[(target, 0, "x")], 1.0), (columns[(target, 0, "y")], -1.0 / rho)],
        zero,
        "init",
    )
    for e, k in enumerate(acts):
        z_k = transcript.z_before(k)
        delta = transcript.z_values[k] - z_k
        add_row(
            [(columns[(target, e + 1, "x")], 1.0),
             (columns[(target, e, "x")], -1.0 / (1.0 + g))],
            (n * delta + g * z_k) / (1.0 + g),
            "recursion_x",
        )
        add_row(
            [
                (columns[(target, e + 1, "y")], 1.0),
                (columns[(target, e, "y")], -1.0),
                (columns[(target, e, "x")], rho * g / (1.0 + g)),
            ],
            (rho * g / (1.0 + g)) * (z_k - n * delta),
            "recursion_y",
        )
    e_final = len(acts)
    if colluder_final_y_sum is not None:
        add_row(
            [(columns[(target, e_final, "y")], 1.0)],
            -np.asarray(colluder_final_y_sum, dtype=float),
            "kkt_sum",
        )
    if pin:
        add_row([(columns[(target, e_final, "x")], 1.0)], transcript.z_values[last],
                "convergence_pin")
    base = SparseSystem.from_triplets(r, nc, triplets, np.array(rhs[0]))
    systems = [base] + [base.with_rhs(np.array(rhs[ci])) for ci in range(1, p)]
    return MeasurementSystem(
        systems=systems,
        columns=columns,
        row_tags=row_tags,
        n_agents=n,
        rho=rho,
        last_iteration=last,
        activations={target: acts},
    )


def colluding_attack(
    transcript: Transcript,
    target: int,
    colluder_final_y_sum: np.ndarray | None = None,
    pin: bool = True,
    tol: float = 1e-10,
    max_iter: int | None = None,
    gamma_assumed: float = 1.0,
) -> AttackReport:
    """Reconstruct one agent's trajectory from the colluders' viewpoint,
    assuming a fixed step scale (1 unless overridden)."""
    ms = build_colluding_system(transcript, target, colluder_final_y_sum, pin,
                                gamma_assumed)
    results, vals_x, vals_y = _solve_system(ms, tol, max_iter)
    est_x, est_y = _expand_epochs(
        vals_x, vals_y, ms.activations, [target], ms.last_iteration, transcript.dim
    )
    return AttackReport(
        kind="colluding",
        n_agents=ms.n_agents,
        rho=ms.rho,
        last_iteration=ms.last_iteration,
        est_x=est_x,
        est_y=est_y,
        dims=ms.shape,
        residual_norms=[res.residual_norm for res in results],
        lsqr_converged=all(res.converged for res in results),
        notes=f"target agent {target}",
    )


@dataclass(frozen=True)
class SystemCounts:
    """Equation/unknown counts per coordinate.

    `stated` follows the published counting convention for the variant
    (one summed init relation for the randomized-start system, per-agent
    init rows plus unknown step scales for the perturbed one); `implemented`
    counts the rows and columns this module actually assembles, with the
    step scales substituted by 1.
    """

    stated: tuple[int, int]
    implemented: tuple[int, int]


def count_equations_unknowns(
    kind: str,
    last_k: int,
    n_agents: int,
    kkt_row: bool = False,
    pin_last_cycle: bool = False,
) -> SystemCounts:
    """Counts for kind in {"randinit", "piadmm1", "colluding"} at K=last_k."""
    if last_k < 0 or n_agents < 3:
        raise ValueError("need last_k >= 0 and n_agents >= 3")
    k = last_k
    n = n_agents
    extra = (1 if kkt_row else 0) + (n if pin_last_cycle else 0)
    impl_rows = n + 2 * (k + 1) + extra
    impl_cols = 2 * (k + 1 + n)
    if kind == "randinit":
        return SystemCounts(stated=(2 * k + 3, 2 * k + 2 * n + 2),
                            implemented=(impl_rows, impl_cols))
    if kind == "piadmm1":
        return SystemCounts(stated=(2 * k + n + 2, 3 * k + 2 * n + 3),
                            implemented=(impl_rows, impl_cols))
    if kind == "colluding":
        c = k // n
        extra_c = (1 if kkt_row else 0) + (1 if pin_last_cycle else 0)
        return SystemCounts(
            stated=(2 * c + 3, 3 * c + 5),
            implemented=(1 + 2 * (c + 1) + extra_c, 2 * (c + 2)),
        )
    raise ValueError(f"unknown system kind {kind!r}")


def system_truth_residual(ms: MeasurementSystem, history: StateHistory) -> float:
    """Max residual of the ground-truth states plugged into the system rows
    (diagnostic oracle; meaningful when the run matched the gamma=1, no-noise
    assumptions except for the soft convergence pins)."""
    worst = 0.0
    p = len(ms.systems)
    truth_cols = np.zeros((ms.systems[0].n_cols, p))
    for (a, e, which), c in ms.columns.items():
        if e == 0:
            truth_cols[c] = history.x0[a - 1] if which == "x" else history.y0[a - 1]
        else:
            k_act = ms.activations[a][e - 1]
            truth_cols[c] = (
                history.x_new[k_act] if which == "x" else history.y_new[k_act]
            )
    for ci in range(p):
        sysm = ms.systems[ci]
        resid = sysm.matrix() @ truth_cols[:, ci] - sysm.rhs
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst
