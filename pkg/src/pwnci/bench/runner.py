"""Deterministic Monte Carlo replication runner.

Replication ``r`` draws from a stream seeded by ``(master_seed, r, role)``,
so its record depends only on the configuration and ``r``, never on which
worker ran it or in what order.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ..errors import ConvergenceError, DegenerateSolutionError
from ..gauss import chi2_quantile
from ..inference import ci_x0, ci_z0, confidence_region, lambda_hat, select_cell
from ..svi import SviProblem, solve_saa
from .config import ExperimentConfig


class StreamRole(IntEnum):
    SAMPLE = 0
    SOLVER = 1  # reserved for randomized solver perturbations
    BOOTSTRAP = 2  # reserved


def stream(seed: int, rep: int, role: StreamRole = StreamRole.SAMPLE) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, int(role))))


@dataclass
class BudgetResult:
    alphas: tuple
    cell: str
    cell_dim: int
    region_hit: bool
    z_hits: np.ndarray
    x_hits: np.ndarray
    z_width: np.ndarray
    x_width: np.ndarray


@dataclass
class ReplicationRecord:
    rep: int
    status: str
    budgets: list = field(default_factory=list)
    baseline: dict | None = None
    error: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def baseline_intervals(sol, lam, alpha):
    """Plug-in intervals ``z_N +/- sqrt(chi2_1(alpha) Lambda_jj / N)`` and their
    clamp onto ``S`` (midpoint and half-length of the clamped interval)."""
    ups = np.sqrt(chi2_quantile(1, alpha) * np.diag(lam.matrix) / sol.N)
    lo = sol.set.project(sol.z - ups)
    hi = sol.set.project(sol.z + ups)
    return sol.z, ups, 0.5 * (lo + hi), 0.5 * (hi - lo)


def _hits(center, half, truth, tol=1e-9):
    gap = np.abs(center - truth)
    return np.where(half == 0.0, gap <= tol, gap <= half)


def run_replication(cfg: ExperimentConfig, r: int, problem: SviProblem | None = None) -> ReplicationRecord:
    """Sample, solve and compute every interval of ``cfg`` for replication ``r``."""
    problem = cfg.build_problem() if problem is None else problem
    t0 = time.perf_counter()
    rng = stream(cfg.seed, r)
    try:
        sol = solve_saa(problem, cfg.N, rng)
    except DegenerateSolutionError as exc:
        return ReplicationRecord(r, "degenerate", error=str(exc))
    except ConvergenceError as exc:
        return ReplicationRecord(r, "failed", error=str(exc))
    rec = ReplicationRecord(r, "ok")
    z0, x0 = problem.z0, problem.x0
    for a1, a2 in cfg.budgets:
        Q = confidence_region(sol, a1)
        C = select_cell(Q, sol.cell, sol.set)
        zr = ci_z0(sol, C, a2, a1)
        xr = ci_x0(sol, C, sol.set, a2, a1)
        rec.budgets.append(
            BudgetResult(
                (a1, a2),
                C.label,
                C.dim,
                Q.contains(z0),
                zr.covers(z0),
                xr.covers(x0),
                zr.half_widths,
                xr.half_widths,
            )
        )
    if cfg.baseline_alpha is not None:
        zc, ups, xc, nu = baseline_intervals(sol, lambda_hat(sol), cfg.baseline_alpha)
        rec.baseline = dict(
            z_hits=_hits(zc, ups, z0), x_hits=_hits(xc, nu, x0), z_width=ups, x_width=nu
        )
    rec.seconds = time.perf_counter() - t0
    return rec


_WORKER_PROBLEMS: dict = {}


def _worker(args):
    cfg, r = args
    key = cfg.to_json()
    problem = _WORKER_PROBLEMS.get(key)
    if problem is None:
        problem = _WORKER_PROBLEMS[key] = cfg.build_problem()
    return run_replication(cfg, r, problem)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None, progress=None) -> list:
    """All replications of ``cfg``, ordered by replication index."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, r) for r in range(cfg.reps)]
    if workers <= 1:
        problem = cfg.build_problem()
        records = []
        for cfg_r in jobs:
            records.append(run_replication(cfg_r[0], cfg_r[1], problem))
            if progress:
                progress(len(records), cfg.reps)
    else:
        chunk = max(1, cfg.reps // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_worker, jobs, chunksize=chunk))
    return sorted(records, key=lambda rec: rec.rep)
