"""Wires configs to runs: problem assembly, experiment execution with CSV
outputs, attack driving (ground truth regenerated from the config's seeds),
and parameter sweeps.
"""

from __future__ import annotations

import csv
import itertools
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import adversary
from .config import ConfigError, ExperimentConfig, parse_kv_text
from .objectives import (
    LogisticObjective,
    RidgeObjective,
    centralized_optimum,
    generate_logistic_data,
    generate_ridge_data,
)
from .records import Transcript
from .solver import Problem, RunResult, kkt_residuals, descent_regimes, run
from .topology import Graph, generate_graph, write_edgelist

PLANTED_STREAM = 0  # sub-stream of seeds.data holding the hidden label model


def build_objectives(cfg: ExperimentConfig) -> list:
    objs = []
    for agent in range(1, cfg.n_agents + 1):
        if cfg.problem == "ridge":
            data = generate_ridge_data(cfg.b, cfg.p, seed=[cfg.seed_data, agent])
            objs.append(RidgeObjective(data))
        else:
            data = generate_logistic_data(
                cfg.b,
                cfg.p,
                planted_seed=[cfg.seed_data, PLANTED_STREAM],
                data_seed=[cfg.seed_data, agent],
            )
            objs.append(LogisticObjective(data))
    return objs


def build_problem(cfg: ExperimentConfig) -> tuple[Graph, Problem]:
    graph = generate_graph(cfg.n_agents, cfg.eta, cfg.seed_graph)
    objectives = build_objectives(cfg)
    x_star = centralized_optimum(objectives, tol=1e-12)
    return graph, Problem(objectives=objectives, x_star=x_star)


def _atomic_write(path: str, writer) -> None:
    """Write via a temp file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunSummary:
    final_accuracy: float
    comm_units: int
    kkt: tuple[float, float, float]
    regimes: dict[str, bool]
    stop_reason: str
    diverged: bool
    n_iterations: int

    def line(self) -> str:
        r = self.regimes
        return (
            f"accuracy={self.final_accuracy:.6e} comm_units={self.comm_units} "
            f"kkt_grad={self.kkt[0]:.3e} kkt_sum={self.kkt[1]:.3e} "
            f"kkt_cons={self.kkt[2]:.3e} "
            f"descent_fixed_step={'yes' if r['descent_fixed_step'] else 'no'} "
            f"descent_perturbed_step={'yes' if r['descent_perturbed_step'] else 'no'} "
            f"stop={self.stop_reason}"
            + (" DIVERGED" if self.diverged else "")
        )


GNUPLOT_TRACE_SCRIPT = """\
# accuracy against communication cost; run: gnuplot plot_trace.gp
set datafile separator ","
set logscale y
set xlabel "communication units"
set ylabel "accuracy"
set key off
plot "run_trace.csv" skip 2 using 8:3 with lines
"""


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | None = None, gnuplot: bool = False
) -> tuple[RunResult, RunSummary]:
    cfg.validate()
    graph, problem = build_problem(cfg)
    result = run(problem, graph, cfg.solver_config())
    kkt = kkt_residuals(problem.objectives, result.x, result.y, result.z)
    summary = RunSummary(
        final_accuracy=result.trace.final.accuracy,
        comm_units=result.trace.final.comm_units,
        kkt=kkt,
        regimes=descent_regimes(cfg.rho, problem.lipschitz(), cfg.n_agents, cfg.gamma),
        stop_reason=result.trace.stop_reason,
        diverged=result.trace.diverged,
        n_iterations=result.n_iterations,
    )
    if out_dir is not None:
        every = cfg.checkpoint_every if cfg.checkpoint_every > 0 else cfg.n_agents
        _atomic_write(
            os.path.join(out_dir, "run_trace.csv"),
            lambda fh: result.trace.write_csv(fh, every=every),
        )
        _atomic_write(
            os.path.join(out_dir, "transcript.csv"), result.transcript.write_csv
        )
        _atomic_write(
            os.path.join(out_dir, "graph.txt"), lambda fh: write_edgelist(graph, fh)
        )
        _atomic_write(
            os.path.join(out_dir, "summary.txt"), lambda fh: fh.write(summary.line() + "\n")
        )
        if gnuplot:
            _atomic_write(
                os.path.join(out_dir, "plot_trace.gp"),
                lambda fh: fh.write(GNUPLOT_TRACE_SCRIPT),
            )
    return result, summary


def _transcripts_match(a: Transcript, b: Transcript) -> bool:
    if a.n_agents != b.n_agents or a.z_values.shape != b.z_values.shape:
        return False
    if not np.array_equal(a.senders, b.senders):
        return False
    return bool(np.allclose(a.z_values, b.z_values, rtol=0.0, atol=1e-12))


def run_attack(
    cfg: ExperimentConfig, transcript: Transcript, out_dir: str | None = None
) -> dict[int, adversary.AttackReport]:
    """Run the configured attack on a transcript.

    The estimate uses the transcript alone.  For scoring, the run is
    regenerated from the config's seeds; if the regenerated transcript does
    not match the supplied one, truth columns are left empty.
    """
    cfg.validate()
    if transcript.n_agents != cfg.n_agents:
        raise ConfigError(
            f"transcript has {transcript.n_agents} agents, config says {cfg.n_agents}"
        )
    if abs(transcript.rho - cfg.rho) > 1e-12 * max(1.0, cfg.rho):
        raise ConfigError(f"transcript rho={transcript.rho} differs from config rho={cfg.rho}")

    opts = cfg.attack
    max_iter = opts.lsqr_max_iter if opts.lsqr_max_iter > 0 else None
    reports: dict[int, adversary.AttackReport] = {}
    if opts.kind == "exact":
        rep = adversary.exact_recursion_attack(transcript)
        for agent in opts.agents:
            reports[agent] = rep
    elif opts.kind == "lsq":
        rep = adversary.lsq_attack(
            transcript,
            kkt_row=opts.kkt_row,
            pin_last_cycle=opts.pin_last_cycle,
            tol=opts.lsqr_tol,
            max_iter=max_iter,
            agents=list(opts.agents),
        )
        for agent in opts.agents:
            reports[agent] = rep
    elif opts.kind == "backward":
        rep = adversary.terminal_backward_attack(transcript, eps=opts.eps)
        reports[rep.agents[0]] = rep
    else:  # colluding
        y_final = None
        regen = _regenerate(cfg)
        if regen is not None and _transcripts_match(regen.transcript, transcript):
            _, y_all = regen.history.states_at(regen.history.last_iteration + 1)
            mask = np.arange(1, cfg.n_agents + 1) != opts.target
            y_final = y_all[mask].sum(axis=0)
        rep = adversary.colluding_attack(
            transcript,
            target=opts.target,
            colluder_final_y_sum=y_final,
            pin=opts.pin_last_cycle,
            tol=opts.lsqr_tol,
            max_iter=max_iter,
        )
        reports[opts.target] = rep

    regen = _regenerate(cfg)
    if regen is not None and _transcripts_match(regen.transcript, transcript):
        for rep in {id(r): r for r in reports.values()}.values():
            adversary.score_report(rep, regen.history)
    if out_dir is not None:
        for agent, rep in reports.items():
            _atomic_write(
                os.path.join(out_dir, f"attack_agent{agent}.csv"),
                lambda fh, rep=rep, agent=agent: rep.write_csv(
                    fh, agent, list(opts.coordinates)
                ),
            )
    return reports


_REGEN_CACHE: dict[str, RunResult] = {}


def _regenerate(cfg: ExperimentConfig) -> RunResult | None:
    key = cfg.to_text()
    if key not in _REGEN_CACHE:
        try:
            graph, problem = build_problem(cfg)
            _REGEN_CACHE.clear()  # keep a single entry; runs can be large
            _REGEN_CACHE[key] = run(problem, graph, cfg.solver_config())
        except Exception:
            return None
    return _REGEN_CACHE[key]


SWEEP_COLUMNS = [
    "run_index", "overrides", "seed", "k", "agent", "accuracy", "lagrangian",
    "r_primal", "r_dualstep", "r_gradsum", "comm_units", "status",
]


def parse_sweep_spec(text: str) -> tuple[dict[str, list[str]], list[int] | None]:
    """Sweep spec uses the config syntax; each value is a comma list.

    The special key `seed` expands to the four seeds.* keys with fixed
    offsets so grid points stay decoupled across seed axes; without it the
    base config's seeds are kept.
    """
    kv = parse_kv_text(text)
    seeds: list[int] | None = None
    grid: dict[str, list[str]] = {}
    for key, val in kv.items():
        vals = [tok.strip() for tok in val.split(",") if tok.strip()]
        if key == "seed":
            seeds = [int(tok) for tok in vals]
        else:
            grid[key] = vals
    return grid, seeds


def _apply_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    cfg.seed_graph = seed
    cfg.seed_data = seed + 10_000
    cfg.seed_solver = seed + 20_000
    cfg.seed_attack = seed + 30_000
    return cfg


def run_sweep(
    base_cfg_text: str, sweep_text: str, out_path: str, quiet: bool = True
) -> int:
    """Cartesian grid x seeds; one long-format CSV row per checkpoint.

    Failures of individual grid points are recorded in their rows' status
    column and the sweep continues.  Returns the number of failed runs.
    """
    grid, seeds = parse_sweep_spec(sweep_text)
    base_kv = parse_kv_text(base_cfg_text)
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) if keys else [()]
    failures = 0
    rows: list[list] = []
    run_index = 0
    for combo in combos:
        for seed in seeds if seeds is not None else [None]:
            kv = dict(base_kv)
            kv.update(dict(zip(keys, combo)))
            overrides = ";".join(f"{k}={v}" for k, v in zip(keys, combo))
            seed_col = "" if seed is None else seed
            status = "ok"
            try:
                cfg = ExperimentConfig.from_mapping(kv)
                if seed is not None:
                    _apply_seed(cfg, seed)
                cfg.validate()
                result, _ = run_experiment(cfg)
                every = cfg.checkpoint_every if cfg.checkpoint_every > 0 else cfg.n_agents
                last = len(result.trace.records) - 1
                for idx, rec in enumerate(result.trace.records):
                    if idx % every and idx != last:
                        continue
                    rows.append([
                        run_index, overrides, seed_col, rec.k, rec.agent,
                        repr(rec.accuracy), repr(rec.aug_lagrangian),
                        repr(rec.r_primal), repr(rec.r_dualstep),
                        repr(rec.r_gradsum), rec.comm_units, status,
                    ])
            except Exception as exc:  # keep sweeping; record the failure
                failures += 1
                rows.append([
                    run_index, overrides, seed_col, "", "", "", "", "", "", "", "",
                    f"error:{type(exc).__name__}:{exc}",
                ])
                if not quiet:
                    print(f"sweep point {overrides} seed={seed} failed: {exc}")
            run_index += 1

    def write(fh):
        fh.write("#schema=1\n")
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)

    _atomic_write(out_path, write)
    return failures
