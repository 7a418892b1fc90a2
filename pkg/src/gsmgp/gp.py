"""Exact GP regression: likelihood, gradient, posterior prediction and MSE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .kernels import GsmModel, gsm_lags
from .lowrank import assemble_cov, stack_factors

__all__ = [
    "NotPositiveDefiniteError",
    "TimeSeries",
    "PosteriorPrediction",
    "stable_cholesky",
    "nll",
    "nll_factor_form",
    "nll_gradient",
    "posterior",
    "posterior_at",
    "mse",
]

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Covariance could not be factorized even with jitter; increase the noise variance."""


@dataclass
class TimeSeries:
    """Integer-indexed observations with a train prefix of length ``n_train``."""

    times: np.ndarray
    values: np.ndarray
    n_train: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.times.size != self.values.size:
            raise ValueError("times and values differ in length")
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not 1 <= self.n_train <= self.times.size:
            raise ValueError("n_train must be between 1 and the series length")

    @property
    def n(self):
        return self.n_train

    @property
    def n_star(self):
        return self.times.size - self.n_train

    @property
    def y_train(self):
        return self.values[: self.n_train]

    @property
    def y_test(self):
        return self.values[self.n_train:]

    @property
    def t_train(self):
        return self.times[: self.n_train]

    @property
    def t_test(self):
        return self.times[self.n_train:]


@dataclass
class PosteriorPrediction:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def std(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


def stable_cholesky(C):
    """Lower Cholesky factor of ``C``, retrying with a jitter ladder.

    Jitter is added as ``j * mean(diag(C))`` for ``j`` in 1e-10 .. 1e-6.
    """
    C = np.asarray(C, dtype=float)
    scale = float(np.mean(np.diag(C))) if C.size else 1.0
    scale = scale if scale > 0 else 1.0
    n = C.shape[0]
    for j in JITTER_LADDER:
        A = C if j == 0.0 else C + (j * scale) * np.eye(n)
        try:
            return cholesky(A, lower=True, check_finite=True)
        except (LinAlgError, ValueError):
            continue
    raise NotPositiveDefiniteError("covariance is not positive definite; increase the noise variance")


def _logdet_from_chol(Lc):
    return 2.0 * float(np.sum(np.log(np.diag(Lc))))


def nll(y, C) -> float:
    """``y^T C^{-1} y + log det C`` via a Cholesky factorization."""
    y = np.asarray(y, dtype=float).reshape(-1)
    Lc = stable_cholesky(C)
    v = solve_triangular(Lc, y, lower=True)
    return float(v @ v) + _logdet_from_chol(Lc)


def nll_factor_form(y, factors, alpha, noise_var) -> float:
    """Same value as :func:`nll` using the matrix inversion lemma.

    Cost is ``O(n R^2)`` with ``R = sum_i r_i``; requires ``noise_var > 0``.
    """
    if noise_var <= 0:
        raise ValueError("factor-form likelihood needs a positive noise variance")
    y = np.asarray(y, dtype=float).reshape(-1)
    B, _, widths = stack_factors(factors)
    B = B * np.repeat(np.sqrt(np.asarray(alpha, dtype=float)), widths)
    n, R = B.shape
    inner = noise_var * np.eye(R) + B.T @ B
    Li = stable_cholesky(inner)
    By = B.T @ y
    w = solve_triangular(Li, By, lower=True)
    quad = (y @ y - w @ w) / noise_var
    logdet = (n - R) * np.log(noise_var) + _logdet_from_chol(Li)
    return float(quad + logdet)


def nll_gradient(y, factors, model: GsmModel) -> np.ndarray:
    """Gradient of the NLL over ``(alpha_1..alpha_m, noise_var)``.

    ``d l / d alpha_i = tr(C^{-1} L_i L_i^T) - ||L_i^T C^{-1} y||^2`` and
    ``d l / d noise_var = tr(C^{-1}) - ||C^{-1} y||^2``.  Traces are column
    sums of squares of ``chol(C)^{-1} L_i``; ``C^{-1}`` is never formed.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    C = assemble_cov(factors, model.alpha, model.noise_var)
    Lc = stable_cholesky(C)
    b = cho_solve((Lc, True), y)
    B, offsets, widths = stack_factors(factors)
    grad = np.zeros(model.m + 1)
    if B.shape[1]:
        W = solve_triangular(Lc, B, lower=True)
        col_tr = np.einsum("ij,ij->j", W, W)
        col_q = (B.T @ b) ** 2
        nz = widths > 0
        grad[:-1][nz] = np.add.reduceat(col_tr - col_q, offsets[nz])
    Linv = solve_triangular(Lc, np.eye(y.size), lower=True)
    grad[-1] = float(np.sum(Linv * Linv)) - float(b @ b)
    return grad


def _cross_cov(t_a, t_b, lags):
    return lags[np.abs(np.subtract.outer(t_a, t_b))]


def posterior(series: TimeSeries, model: GsmModel) -> PosteriorPrediction:
    """Predictive distribution of the noisy test outputs given the training block."""
    return posterior_at(model, series.t_train, series.y_train, series.t_test)


def posterior_at(model: GsmModel, t_train, y_train, t_test) -> PosteriorPrediction:
    """Posterior at arbitrary integer times; ``t_test`` may repeat training times."""
    tr = np.asarray(t_train, dtype=np.int64).reshape(-1)
    te = np.asarray(t_test, dtype=np.int64).reshape(-1)
    origin = min(tr.min(), te.min()) if te.size else tr.min()
    span = int(max(tr.max(), te.max() if te.size else tr.max()) - origin) + 1
    lags = gsm_lags(span, model)
    K_tt = _cross_cov(tr, tr, lags)
    K_st = _cross_cov(te, tr, lags)
    K_ss = _cross_cov(te, te, lags)
    C = K_tt + model.noise_var * np.eye(tr.size)
    Lc = stable_cholesky(C)
    mean = K_st @ cho_solve((Lc, True), np.asarray(y_train, dtype=float).reshape(-1))
    V = solve_triangular(Lc, K_st.T, lower=True)
    cov = K_ss + model.noise_var * np.eye(te.size) - V.T @ V
    cov = 0.5 * (cov + cov.T)
    return PosteriorPrediction(mean=mean, cov=cov)


def mse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.size != truth.size:
        raise ValueError("prediction and truth differ in length")
    if pred.size == 0:
        raise ValueError("mse of empty vectors is undefined")
    return float(np.mean((pred - truth) ** 2))
