"""Seeded Monte-Carlo harness and the data generators behind the CLI."""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import toeplitz

from ..gp import TimeSeries, mse, posterior
from ..kernels import GsmModel, SubKernelGrid, generate_grids, gsm_lags, numeric_rank, sub_kernel_matrix
from ..lowrank import NystromParams, RffParams, exact_factor, nystrom_factor, rae, rff_factor
from ..optim.admm import AdmmParams, admm_solve
from ..optim.gradproj import GradProjParams, gradproj_solve
from ..optim.mm import MmParams, gaussian_init, mm_solve
from ..optim.problem import LmkProblem
from ..spectral_init import welch_l1_init
from .config import ExperimentConfig
from .io import RESULTS_HEADER, format_float, load_series

__all__ = [
    "RunResult", "ExperimentReport", "synth_series", "series_from_config", "run_single",
    "run_experiment", "write_results", "rank_report", "approx_bench", "build_factors",
    "initial_model", "solve",
]

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    run: int
    seed: int
    mse: float
    nll_final: float
    iterations: int
    nnz_alpha: int
    wall_time: float
    failed: bool
    model: Optional[GsmModel] = None
    error: str = ""


@dataclass
class ExperimentReport:
    runs: list
    mean_mse: float
    pfr: float

    @property
    def all_failed(self) -> bool:
        return all(r.failed for r in self.runs)


def synth_series(freqs, weights, sigma, noise_var, n, n_star, seed) -> TimeSeries:
    """One sample path of a GSM prior plus white noise at times ``1..n+n_star``.

    The draw is ``U diag(sqrt(lambda)) z`` from the eigendecomposition of the
    assembled covariance, which also covers singular covariances.
    """
    total = int(n) + int(n_star)
    grids = [SubKernelGrid(float(f), float(sigma)) for f in freqs]
    model = GsmModel(grids, np.asarray(weights, dtype=float), float(noise_var))
    C = toeplitz(gsm_lags(total, model)) + model.noise_var * np.eye(total)
    lam, U = np.linalg.eigh(C)
    top = max(float(np.max(np.abs(lam))), 1e-300)
    if lam.min() < -1e-8 * top:
        raise ValueError("synthetic covariance is not positive semidefinite")
    z = np.random.default_rng(seed).standard_normal(total)
    values = (U * np.sqrt(np.clip(lam, 0.0, None))) @ z
    return TimeSeries(np.arange(1, total + 1), values, int(n))


def series_from_config(cfg: ExperimentConfig) -> TimeSeries:
    if cfg.data:
        return load_series(cfg.data, cfg.train_len, cfg.test_len)
    return synth_series(cfg.synth_freqs, cfg.synth_weights, cfg.synth_sigma, cfg.synth_noise_var,
                        cfg.synth_n, cfg.synth_n_star, cfg.synth_seed)


def build_factors(cfg: ExperimentConfig, n: int, grids, seed: int):
    if cfg.factorization == "exact":
        return [exact_factor(sub_kernel_matrix(n, g)) for g in grids]
    if cfg.factorization == "nystrom":
        return [nystrom_factor(n, g, NystromParams(cfg.nystrom_p, seed=seed + i)) for i, g in enumerate(grids)]
    return [rff_factor(n, g, RffParams(cfg.rff_R, seed=seed + i)) for i, g in enumerate(grids)]


def default_noise(cfg: ExperimentConfig, y) -> float:
    if cfg.noise_var is not None:
        return float(cfg.noise_var)
    return 0.1 * max(float(np.var(y)), 1e-4)


def initial_model(cfg: ExperimentConfig, y, grids, rng) -> GsmModel:
    m = len(grids)
    if cfg.init == "gaussian":
        alpha = gaussian_init(m, rng, cfg.init_var)
    elif cfg.init == "zeros":
        alpha = np.zeros(m)
    else:
        alpha = welch_l1_init(y, grids)
    return GsmModel(list(grids), alpha, default_noise(cfg, y))


def solve(cfg: ExperimentConfig, y, factors, model0: GsmModel, problem=None):
    """Dispatch to the configured solver; returns ``(model, report)``."""
    problem = problem or LmkProblem(y, factors)
    if cfg.solver == "mm":
        params = MmParams(max_outer_iters=cfg.max_iters, obj_tol=cfg.obj_tol,
                          inner_max_iters=cfg.inner_max_iters, estimate_noise=cfg.estimate_noise)
        return mm_solve(y, factors, model0, params, problem=problem)
    if cfg.solver == "gradproj":
        params = GradProjParams(max_iters=cfg.max_iters, estimate_noise=cfg.estimate_noise)
        return gradproj_solve(y, factors, model0, params, problem=problem)
    if problem.K is None:
        raise ValueError("ADMM needs dense sub-kernel matrices; the instance is too large")
    params = AdmmParams(rho=cfg.admm_rho, rho_prime=cfg.admm_rho_prime, eps_admm=cfg.admm_eps,
                        it_S=cfg.admm_it_s, max_outer_iters=cfg.max_iters, s_solver=cfg.admm_s_solver)
    noise = model0.noise_var if model0.noise_var > 0 else default_noise(cfg, y)
    alpha, report = admm_solve(y, problem.K, noise, model0.alpha, params=params)
    return GsmModel(list(model0.grids), alpha, noise), report


def run_single(cfg: ExperimentConfig, run: int, series: TimeSeries, solver: Optional[Callable] = None) -> RunResult:
    """One seeded run; any exception is recorded as a failed run."""
    seed = cfg.base_seed ^ run
    start = time.perf_counter()
    try:
        rng = np.random.default_rng(seed)
        grids = generate_grids(cfg.grid_spec(seed=seed))
        y = series.y_train
        factors = build_factors(cfg, series.n_train, grids, seed)
        model0 = initial_model(cfg, y, grids, rng)
        model, report = (solver or solve)(cfg, y, factors, model0)
        pred = posterior(series, model)
        err = mse(pred.mean, series.y_test)
        threshold = cfg.fail_threshold_factor * float(np.var(series.y_test))
        failed = report.termination == "numerical_failure" or not np.isfinite(err) or err > threshold
        return RunResult(run, seed, err, float(report.final_objective), report.iterations,
                         report.nnz_alpha, time.perf_counter() - start, bool(failed), model)
    except Exception as exc:  # noqa: BLE001 - a crashed run counts as a failure
        log.warning("run %d failed: %s", run, exc)
        return RunResult(run, seed, float("nan"), float("nan"), 0, 0,
                         time.perf_counter() - start, True, None, str(exc))


def _run_star(args):
    return run_single(*args)


def run_experiment(cfg: ExperimentConfig, series: Optional[TimeSeries] = None,
                   solver: Optional[Callable] = None) -> ExperimentReport:
    """Run ``mc_runs`` seeded runs; failed runs are excluded from the mean MSE."""
    series = series if series is not None else series_from_config(cfg)
    jobs = [(cfg, r, series, solver) for r in range(cfg.mc_runs)]
    if cfg.workers > 1 and solver is None:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, os.cpu_count() or 1)) as pool:
            runs = list(pool.map(_run_star, jobs))
    else:
        runs = [_run_star(j) for j in jobs]
    runs.sort(key=lambda r: r.run)
    ok = [r.mse for r in runs if not r.failed]
    mean_mse = float(np.mean(ok)) if ok else float("nan")
    pfr = sum(r.failed for r in runs) / len(runs)
    return ExperimentReport(runs=runs, mean_mse=mean_mse, pfr=pfr)


def write_results(path, report: ExperimentReport, record_wall_time=False):
    """Per-run CSV plus a ``#`` footer; ``wall_ms`` is blank unless requested."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(RESULTS_HEADER) + "\n")
        for r in report.runs:
            wall = str(int(round(r.wall_time * 1000))) if record_wall_time else ""
            fh.write(",".join([
                str(r.run), str(r.seed), format_float(r.mse), format_float(r.nll_final),
                str(r.iterations), str(r.nnz_alpha), "1" if r.failed else "0", wall,
            ]) + "\n")
        n_failed = sum(r.failed for r in report.runs)
        fh.write(f"# runs={len(report.runs)} failed={n_failed} mean_mse={format_float(report.mean_mse)} "
                 f"pfr={format_float(report.pfr)}\n")


def write_timing(path, report: ExperimentReport):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("run,wall_ms\n")
        for r in report.runs:
            fh.write(f"{r.run},{int(round(r.wall_time * 1000))}\n")


def rank_report(n: int, grids, rel_tol: Optional[float] = None):
    """``(max, min, mean)`` numeric rank over all sub-kernel matrices.

    ``rel_tol=None`` uses the machine-precision cutoff ``n * eps(lambda_max)``.
    """
    if not grids:
        raise ValueError("rank_report needs at least one grid")
    ranks = np.array([numeric_rank(sub_kernel_matrix(n, g), rel_tol) for g in grids])
    return int(ranks.max()), int(ranks.min()), float(ranks.mean())


def approx_bench(n: int, grid: SubKernelGrid, nystrom_budgets=(), rff_budgets=(), seeds: int = 10):
    """Rows ``(method, param, storage, rae)``; RAE is averaged over ``seeds``."""
    if not list(nystrom_budgets) and not list(rff_budgets):
        raise ValueError("no budgets given")
    K = sub_kernel_matrix(n, grid)
    rows = []
    for p in nystrom_budgets:
        if not 1 <= p <= n:
            raise ValueError(f"Nystrom budget {p} must lie in [1, {n}]")
        errs, store = [], []
        for s in range(seeds):
            f = nystrom_factor(n, grid, NystromParams(int(p), seed=s))
            errs.append(rae(K, f))
            store.append(f.storage)
        rows.append(("nystrom", int(p), int(round(np.mean(store))), float(np.mean(errs))))
    for R in rff_budgets:
        errs = []
        for s in range(seeds):
            f = rff_factor(n, grid, RffParams(int(R), seed=s))
            errs.append(rae(K, f))
        rows.append(("rff", int(R), n * 2 * int(R), float(np.mean(errs))))
    return rows
