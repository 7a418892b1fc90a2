"""Sequential majorization-minimization for the GSM likelihood.

Each outer step linearizes the concave part ``-h = log det C`` at the current
iterate and minimizes the convex majorizer

    lbar(theta; theta_k) = g(theta) - h(theta_k) - grad_h(theta_k)^T (theta - theta_k)

over ``theta >= 0``.  The subproblem is the smooth form of the rotated-cone
program (``g`` is a matrix-fractional function), solved here by a bounded
quasi-Newton method.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError
from scipy.optimize import minimize

from ..kernels import GsmModel
from .problem import LmkProblem, SolverReport, Timer, count_nonzero_weights

__all__ = ["MmParams", "InnerResult", "mm_solve", "mm_inner_solve", "majorizer", "gaussian_init"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MmParams:
    max_outer_iters: int = 50
    obj_tol: float = 1e-4
    inner_max_iters: int = 500
    kkt_tol: float = 1e-7
    estimate_noise: bool = True
    # lower bound on noise_var, relative to var(y); keeps C positive definite
    noise_floor: float = 1e-6


@dataclass
class InnerResult:
    theta: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    stalled: bool


def gaussian_init(m, rng, var=10.0) -> np.ndarray:
    """``max(g_i, 0)`` with ``g_i ~ N(0, var)``."""
    return np.maximum(rng.normal(0.0, np.sqrt(var), size=m), 0.0)


def _noise_floor(y, rel):
    return rel * max(float(np.var(y)), 1e-4)


def majorizer(problem: LmkProblem, theta, theta_k, h_k=None, grad_h_k=None) -> float:
    """Value of the linear majorizer ``lbar(theta; theta_k)``."""
    theta = np.asarray(theta, dtype=float)
    theta_k = np.asarray(theta_k, dtype=float)
    if h_k is None or grad_h_k is None:
        ev_k = problem.evaluate(theta_k[:-1], theta_k[-1])
        h_k = -ev_k.logdet
        grad_h_k = problem.grad_h(ev_k)
    g = problem.evaluate(theta[:-1], theta[-1]).g
    return g - h_k - float(grad_h_k @ (theta - theta_k))


def _projected_residual(theta, grad, lower, free):
    step = np.where(free, np.maximum(theta - grad, lower) - theta, 0.0)
    return float(np.max(np.abs(step))) if step.size else 0.0


def mm_inner_solve(problem: LmkProblem, grad_h, theta_start, kkt_tol=1e-7, max_iters=500,
                   noise_fixed=False, noise_lower=0.0) -> InnerResult:
    """Minimize ``g(theta) - grad_h^T theta`` over ``theta >= 0``.

    ``theta_start`` is always feasible, so the returned point never has a
    larger subproblem objective than the start.  When ``noise_fixed`` the last
    coordinate stays at its starting value.
    """
    grad_h = np.asarray(grad_h, dtype=float)
    theta_start = np.asarray(theta_start, dtype=float)
    m = problem.m
    fixed_noise = float(theta_start[-1])
    lower = np.zeros(m + 1)
    lower[-1] = noise_lower

    def full(x):
        return np.append(x, fixed_noise) if noise_fixed else x

    def fun(x):
        th = full(x)
        try:
            ev = problem.evaluate(th[:-1], th[-1])
        except (LinAlgError, ValueError):
            return 1e300, np.zeros_like(x)
        val = ev.g - float(grad_h @ th)
        gr = problem.grad_g(ev) - grad_h
        return val, (gr[:-1] if noise_fixed else gr)

    x0 = theta_start[:-1].copy() if noise_fixed else theta_start.copy()
    x0 = np.maximum(x0, lower[: x0.size])
    bounds = [(lo, None) for lo in lower[: x0.size]]
    f0, g0 = fun(x0)
    scale = max(1.0, float(np.max(np.abs(g0))))
    res = minimize(
        fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": max_iters, "gtol": kkt_tol * scale, "ftol": 1e-15, "maxcor": 20},
    )
    x = np.maximum(res.x, lower[: x0.size])
    fx, gx = fun(x)
    stalled = not res.success and res.nit >= max_iters
    if not fx <= f0:
        x, fx, gx, stalled = x0, f0, g0, True
    kkt = _projected_residual(x, gx, lower[: x.size], np.ones(x.size, dtype=bool)) / scale
    return InnerResult(theta=full(x), objective=fx, kkt_residual=kkt, iterations=int(res.nit), stalled=stalled)


def mm_solve(y, factors, theta0: GsmModel, params: MmParams | None = None, problem=None):
    """Run sequential MM from ``theta0``; returns ``(model, report)``.

    Stops when the relative objective decrease falls below ``obj_tol`` or after
    ``max_outer_iters`` steps.  A failed factorization or an objective increase
    beyond round-off ends the run as ``numerical_failure`` with the best iterate.
    """
    params = params or MmParams()
    timer = Timer()
    problem = problem or LmkProblem(y, factors)
    floor = _noise_floor(problem.y, params.noise_floor) if params.estimate_noise else 0.0
    theta = theta0.theta.copy()
    if params.estimate_noise:
        theta[-1] = max(theta[-1], floor)
    report = SolverReport()
    try:
        ev = problem.evaluate(theta[:-1], theta[-1])
    except (LinAlgError, ValueError):
        report.termination = "numerical_failure"
        report.wall_time = timer.elapsed()
        report.nnz_alpha = count_nonzero_weights(theta[:-1])
        return theta0, report
    obj = ev.value
    report.objective_trace.append(obj)
    inner_iters = []
    for k in range(params.max_outer_iters):
        grad_h = problem.grad_h(ev)
        inner = mm_inner_solve(problem, grad_h, theta, kkt_tol=params.kkt_tol,
                               max_iters=params.inner_max_iters,
                               noise_fixed=not params.estimate_noise, noise_lower=floor)
        inner_iters.append(inner.iterations)
        try:
            ev_new = problem.evaluate(inner.theta[:-1], inner.theta[-1])
        except (LinAlgError, ValueError):
            report.termination = "numerical_failure"
            break
        obj_new = ev_new.value
        if obj_new > obj + 1e-9 * max(1.0, abs(obj)):
            log.warning("MM objective increased from %g to %g", obj, obj_new)
            report.termination = "numerical_failure"
            break
        decrease = obj - obj_new
        theta, ev = inner.theta, ev_new
        obj = min(obj, obj_new)
        report.objective_trace.append(obj_new)
        report.iterations = k + 1
        if decrease <= params.obj_tol * max(1.0, abs(obj)):
            report.termination = "converged"
            break
    report.extra["inner_iterations"] = inner_iters
    report.nnz_alpha = count_nonzero_weights(theta[:-1])
    report.wall_time = timer.elapsed()
    return theta0.with_theta(theta), report
