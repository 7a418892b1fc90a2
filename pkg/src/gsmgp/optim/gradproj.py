"""Projected-gradient baseline: ``theta <- max(theta - mu * grad l, 0)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError

from ..kernels import GsmModel
from .problem import LmkProblem, SolverReport, Timer, count_nonzero_weights

__all__ = ["GradProjParams", "gradproj_solve", "projected_step"]


@dataclass(frozen=True)
class GradProjParams:
    max_iters: int = 500
    # first trial step is s / max|grad|; later trials start from the last step / beta
    s: float = 1.0
    beta: float = 0.2
    c: float = 1e-4
    max_backtracks: int = 50
    obj_tol: float = 1e-8
    estimate_noise: bool = True
    noise_floor: float = 1e-6


def projected_step(theta, grad, mu, lower):
    return np.maximum(theta - mu * grad, lower)


def gradproj_solve(y, factors, theta0: GsmModel, params: GradProjParams | None = None, problem=None):
    """Projected gradient with Armijo backtracking along the projection arc.

    A trial ``theta(mu)`` is accepted when
    ``l(theta(mu)) <= l(theta) + c * grad^T (theta(mu) - theta)``.  The run
    stops on a stall, a relative decrease below ``obj_tol`` or ``max_iters``.
    """
    params = params or GradProjParams()
    timer = Timer()
    problem = problem or LmkProblem(y, factors)
    m = problem.m
    lower = np.zeros(m + 1)
    if params.estimate_noise:
        lower[-1] = params.noise_floor * max(float(np.var(problem.y)), 1e-4)
    theta = np.maximum(theta0.theta.copy(), lower)
    report = SolverReport()
    try:
        ev = problem.evaluate(theta[:-1], theta[-1])
    except (LinAlgError, ValueError):
        report.termination = "numerical_failure"
        report.wall_time = timer.elapsed()
        return theta0, report
    obj = ev.value
    report.objective_trace.append(obj)
    mu = None
    for k in range(params.max_iters):
        grad = problem.grad(ev)
        if not params.estimate_noise:
            grad[-1] = 0.0
        gmax = float(np.max(np.abs(grad)))
        if gmax == 0.0 or np.array_equal(projected_step(theta, grad, 1.0, lower), theta):
            report.termination = "converged"
            break
        mu = params.s / gmax if mu is None else mu / params.beta
        accepted = None
        for _ in range(params.max_backtracks + 1):
            trial = projected_step(theta, grad, mu, lower)
            try:
                ev_t = problem.evaluate(trial[:-1], trial[-1])
            except (LinAlgError, ValueError):
                mu *= params.beta
                continue
            if ev_t.value < obj and ev_t.value <= obj + params.c * float(grad @ (trial - theta)):
                accepted = (trial, ev_t)
                break
            mu *= params.beta
        if accepted is None:
            report.termination = "converged" if k > 0 else "numerical_failure"
            break
        theta, ev = accepted
        decrease = obj - ev.value
        obj = ev.value
        report.objective_trace.append(obj)
        report.iterations = k + 1
        if decrease <= params.obj_tol * max(1.0, abs(obj)):
            report.termination = "converged"
            break
    report.nnz_alpha = count_nonzero_weights(theta[:-1])
    report.wall_time = timer.elapsed()
    return theta0.with_theta(theta), report
