"""Welch-periodogram initialization of the GSM weights.

The periodogram ``s_W`` is evaluated at the grid frequencies and the weights
are fitted by nonnegative L1-regularized least squares::

    min_{alpha >= 0} ||s_W - Psi alpha||^2 + lam * ||alpha||_1

with ``Psi[i, j] = s_j(mu_i)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._backend import core
from .kernels import DegenerateDensityError

__all__ = [
    "WelchParams",
    "L1FitParams",
    "L1FitResult",
    "default_welch_params",
    "welch_periodogram",
    "build_psi",
    "l1_ls_fit",
    "l1_ls_objective",
    "default_lambda",
    "welch_l1_init",
]

log = logging.getLogger(__name__)

WINDOWS = ("bartlett", "hann", "rect")


@dataclass(frozen=True)
class WelchParams:
    segment_len: int
    overlap_frac: float = 0.5
    window: str = "bartlett"

    def validate(self, n):
        if not 1 <= self.segment_len <= n:
            raise ValueError(f"segment length {self.segment_len} must be in [1, {n}]")
        if not 0.0 <= self.overlap_frac < 1.0:
            raise ValueError("overlap fraction must be in [0, 1)")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")


@dataclass(frozen=True)
class L1FitParams:
    lam: float | None = None
    max_iters: int = 20000
    tol: float = 1e-8


@dataclass
class L1FitResult:
    alpha: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: list


def default_welch_params(n: int) -> WelchParams:
    """``D = max(n // 8, 32)`` clamped to ``n``, 50% overlap, Bartlett window."""
    return WelchParams(segment_len=min(max(n // 8, 32), n))


def _window(name, D):
    if name == "rect" or D == 1:
        return np.ones(D)
    if name == "hann":
        return np.hanning(D)
    return np.bartlett(D)


def _segments(y, params):
    n = y.size
    D = params.segment_len
    step = max(1, int(round(D * (1.0 - params.overlap_frac))))
    starts = np.arange(0, n - D + 1, step)
    return np.stack([y[s:s + D] for s in starts])


def welch_periodogram(y, params: WelchParams, eval_freqs) -> np.ndarray:
    """Averaged windowed-segment periodogram evaluated at ``eval_freqs``.

    Each segment contributes ``|sum_t w(t) y_l(t) e^{-j 2 pi f t}|^2 / (D A)``
    with ``A = mean(w^2)``.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    params.validate(y.size)
    freqs = np.asarray(eval_freqs, dtype=float).reshape(-1)
    if freqs.size == 0:
        raise ValueError("no evaluation frequencies given")
    if np.any(freqs < 0) or np.any(freqs >= 0.5):
        raise ValueError("evaluation frequencies must lie in [0, 1/2)")
    D = params.segment_len
    w = _window(params.window, D)
    A = np.mean(w * w)
    if A == 0.0:
        raise ValueError("window has zero energy")
    segs = _segments(y, params) * w
    power = core.segment_power(segs, freqs) / (D * A)
    # average in segment order for reproducibility
    return power.mean(axis=0)


def build_psi(grids) -> np.ndarray:
    """``Psi[i, j] = s_j(mu_i)`` for the two-sided Gaussian mixture components."""
    mus = np.array([g.mu for g in grids], dtype=float)
    sig = np.array([g.sigma for g in grids], dtype=float)
    if np.any(sig <= 0):
        raise DegenerateDensityError("build_psi needs sigma > 0 on every grid")
    f = mus[:, None]
    norm = 1.0 / (sig[None, :] * np.sqrt(2.0 * np.pi))
    return norm * (
        np.exp(-0.5 * ((f - mus[None, :]) / sig[None, :]) ** 2)
        + np.exp(-0.5 * ((f + mus[None, :]) / sig[None, :]) ** 2)
    )


def l1_ls_objective(alpha, s_w, psi, lam) -> float:
    r = s_w - psi @ alpha
    return float(r @ r + lam * np.sum(np.abs(alpha)))


def default_lambda(s_w, psi) -> float:
    return 0.1 * float(np.max(np.abs(psi.T @ s_w)))


def l1_ls_fit(s_w, psi, params: L1FitParams | None = None) -> L1FitResult:
    """Nonnegative L1-regularized least squares by monotone FISTA.

    The proximal step is the nonnegative soft threshold
    ``max(x - step * lam, 0)``; the Lipschitz estimate is found by
    backtracking.  Iterates are accepted only when they do not increase the
    objective, so the trace is monotone.  Convergence is declared when the
    scaled prox-gradient residual drops below ``tol``.
    """
    params = params or L1FitParams()
    s_w = np.asarray(s_w, dtype=float).reshape(-1)
    psi = np.asarray(psi, dtype=float)
    if psi.ndim != 2 or psi.shape[0] != s_w.size:
        raise ValueError("Psi and s_W disagree in shape")
    lam = default_lambda(s_w, psi) if params.lam is None else float(params.lam)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    m = psi.shape[1]

    def smooth(a):
        r = psi @ a - s_w
        return float(r @ r), 2.0 * (psi.T @ r)

    def prox(v, step):
        return np.maximum(v - step * lam, 0.0)

    x = np.zeros(m)
    z = x.copy()
    t = 1.0
    fx = l1_ls_objective(x, s_w, psi, lam)
    trace = [fx]
    Lip = max(2.0 * np.linalg.norm(psi, 2) ** 2 * 1e-3, 1e-12)
    scale = max(1.0, float(np.max(np.abs(2.0 * psi.T @ s_w))))
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        fz, gz = smooth(z)
        while True:
            u = prox(z - gz / Lip, 1.0 / Lip)
            d = u - z
            fu = float((psi @ u - s_w) @ (psi @ u - s_w))
            if fu <= fz + gz @ d + 0.5 * Lip * (d @ d) + 1e-14 * max(1.0, abs(fz)):
                break
            Lip *= 2.0
        Fu = fu + lam * float(np.sum(u))
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if Fu <= fx:
            x_next, fx_next = u, Fu
        else:
            x_next, fx_next = x, fx
        z = x_next + (t / t_next) * (u - x_next) + ((t - 1.0) / t_next) * (x_next - x)
        x, fx, t = x_next, fx_next, t_next
        trace.append(fx)
        # prox-gradient residual at the accepted iterate
        _, gx = smooth(x)
        resid = Lip * np.linalg.norm(x - prox(x - gx / Lip, 1.0 / Lip))
        if resid <= params.tol * scale:
            converged = True
            break
    if not converged:
        log.info("l1_ls_fit stopped after %d iterations without meeting tol", it)
    return L1FitResult(alpha=x, objective=fx, iterations=it, converged=converged, trace=trace)


def welch_l1_init(y, grids, welch: WelchParams | None = None, fit: L1FitParams | None = None) -> np.ndarray:
    """Initial weights from the periodogram of ``y`` at the grid frequencies."""
    y = np.asarray(y, dtype=float)
    welch = welch or default_welch_params(y.size)
    mus = np.array([g.mu for g in grids])
    s_w = welch_periodogram(y, welch, mus)
    return l1_ls_fit(s_w, build_psi(grids), fit).alpha
