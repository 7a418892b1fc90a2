"""Nonlinearly constrained ADMM for the GSM weights with a known noise variance.

The likelihood is rewritten over a precision-like matrix ``S`` with the
nonlinear constraint ``S C(alpha) = I``; the augmented Lagrangian is

    L(S, alpha, Lam) = y^T S y - log det S + <Lam, S C - I> + rho/2 ||S C - I||_F^2

and each outer iteration does an ``S`` step, a Gauss-Seidel sweep of
closed-form weight updates, and a dual step of size ``rho_prime``.

Two ``S`` steps are available.  ``steepest`` is normalized steepest descent
with Armijo steps, switching to the cheap gradient (``S^{-1} -> C``) while the
constraint gap is below ``delta``.  ``lbfgs`` minimizes the ``S`` subproblem
with L-BFGS in coordinates scaled by the curvature of the penalty in the
eigenbasis of ``C``, which is far cheaper at the same accuracy.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .._backend import core
from ..gp import stable_cholesky
from .linesearch import armijo_step
from .problem import SolverReport, Timer, count_nonzero_weights

__all__ = ["AdmmParams", "AdmmState", "admm_solve", "admm_grad_S", "augmented_lagrangian", "alpha_sweep"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmmParams:
    rho: float = 100.0
    rho_prime: float = 50.0
    it_S: int = 1000
    eps_S: float = 1e-15
    eps_admm: float = 1e-3
    delta: float = 1.0
    armijo: tuple = (1e-4, 0.2, 1e-5)
    max_outer_iters: int = 100
    s_solver: str = "lbfgs"

    def validate(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.rho_prime <= self.rho:
            raise ValueError("rho_prime must lie in (0, rho]")
        if self.it_S < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration caps must be positive")
        if not (self.eps_S > 0 and self.eps_admm > 0 and self.delta > 0):
            raise ValueError("tolerances must be positive")
        if self.s_solver not in ("lbfgs", "steepest"):
            raise ValueError(f"unknown S solver {self.s_solver!r}")
        s, beta, h = self.armijo
        if not (s > 0 and 0 < beta < 1 and h > 0):
            raise ValueError("armijo triple needs s > 0, 0 < beta < 1, h > 0")


@dataclass
class AdmmState:
    S: np.ndarray
    alpha: np.ndarray
    Lambda: np.ndarray
    C: np.ndarray

    def gap(self) -> float:
        """``||S C - I||_F``."""
        return float(np.linalg.norm(self.S @ self.C - np.eye(self.C.shape[0])))


def _cov(K, alpha, noise_var):
    C = np.tensordot(alpha, K, axes=1)
    C = 0.5 * (C + C.T)
    C[np.diag_indices_from(C)] += noise_var
    return C


def _logdet_pd(A):
    try:
        Lc = cholesky(A, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        return None
    return 2.0 * float(np.sum(np.log(np.diag(Lc))))


def augmented_lagrangian(S, C, Lam, y, rho) -> float:
    """``L_rho`` at ``S`` for fixed ``C`` and ``Lam``; ``inf`` when ``S`` is not PD."""
    logdet = _logdet_pd(S)
    if logdet is None:
        return float("inf")
    R = S @ C
    R[np.diag_indices_from(R)] -= 1.0
    return float(y @ S @ y) - logdet + float(np.sum(Lam * R)) + 0.5 * rho * float(np.sum(R * R))


def admm_grad_S(state: AdmmState, y, rho, use_approx=False) -> np.ndarray:
    """Gradient of ``L_rho`` over symmetric ``S``.

    Off-diagonal entries are derivatives along the paired perturbation of
    ``S_ij`` and ``S_ji``, which is where the ``X o I`` correction terms come
    from.  With ``use_approx`` the inverse ``S^{-1}`` is replaced by ``C``.
    """
    S, C, Lam = state.S, state.C, state.Lambda
    y = np.asarray(y, dtype=float).reshape(-1)
    if use_approx:
        S_inv = C
    else:
        try:
            S_inv = cho_solve(cho_factor(S, lower=True), np.eye(S.shape[0]))
        except (LinAlgError, ValueError):
            log.warning("S is singular; using the approximate gradient")
            S_inv = C
    return _grad(S, C, Lam, y, rho, S_inv)


def _diag(X):
    return np.diag(np.diag(X))


def _grad(S, C, Lam, y, rho, S_inv, CC=None, LC=None):
    yy = np.outer(y, y)
    LC = Lam @ C if LC is None else LC
    CC = C @ C if CC is None else CC
    SCC = S @ CC
    G = (2.0 * yy - _diag(yy) - 2.0 * S_inv + _diag(S_inv)
         + LC + LC.T - _diag(LC)
         + rho * (SCC + SCC.T - _diag(SCC))
         - rho * (2.0 * C - _diag(C)))
    return 0.5 * (G + G.T)


def alpha_sweep(S, K, alpha, C, Lam, rho, cache=None):
    """One Gauss-Seidel pass of the closed-form weight updates.

    Returns the new weights; ``C`` must be the covariance at ``alpha``.
    ``cache`` is the output of ``sweep_cache(K)``, worth reusing across calls.
    """
    KK, L, ranks = sweep_cache(K) if cache is None else cache
    S = 0.5 * (S + S.T)
    S2 = S @ S
    S2 = 0.5 * (S2 + S2.T)
    Z = np.ascontiguousarray(S - S2 @ C - S @ Lam / rho)
    den = KK @ S2.reshape(-1)
    return core.gram_sweep(np.ascontiguousarray(K), L, ranks, S2, Z, den, np.asarray(alpha, dtype=float))


def sweep_cache(K):
    """``(K_i K_i flattened, padded factors L_i, ranks)`` for ``alpha_sweep``."""
    K = np.asarray(K, dtype=float)
    m, n = K.shape[:2]
    w, V = np.linalg.eigh(K)
    keep = w > n * np.finfo(float).eps * np.maximum(w[:, -1:], 0.0)
    ranks = keep.sum(axis=1).astype(np.intp)
    r_max = max(int(ranks.max(initial=0)), 1)
    L = np.zeros((m, n, r_max))
    for i in range(m):
        r = ranks[i]
        if r:
            L[i, :, :r] = V[i, :, n - r:] * np.sqrt(w[i, n - r:])
    return np.matmul(K, K).reshape(m, -1), L, ranks


class _SLine:
    """``L_rho(S + mu d)`` with the linear pieces precomputed."""

    def __init__(self, S, d, C, Lam, y, rho, R0):
        self.S, self.d, self.rho = S, d, rho
        self.R0 = R0
        self.dC = d @ C
        self.ySy = float(y @ S @ y)
        self.ydy = float(y @ d @ y)
        self.lam0 = float(np.sum(Lam * R0))
        self.lamd = float(np.sum(Lam * self.dC))

    def __call__(self, mu):
        logdet = _logdet_pd(self.S + mu * self.d)
        if logdet is None:
            return float("inf")
        R = self.R0 + mu * self.dC
        return (self.ySy + mu * self.ydy - logdet + self.lam0 + mu * self.lamd
                + 0.5 * self.rho * float(np.sum(R * R)))


def _s_step(state, y, params, use_approx, CC, LC, f0):
    """Inner steepest descent on ``S``; returns ``(S, value, inner_iters, failed)``."""
    s, beta, h = params.armijo
    S, C, Lam, rho = state.S, state.C, state.Lambda, params.rho
    n = S.shape[0]
    eye = np.eye(n)
    for it in range(params.it_S):
        if use_approx:
            S_inv = C
        else:
            try:
                S_inv = cho_solve(cho_factor(S, lower=True), eye)
            except (LinAlgError, ValueError):
                return S, f0, it, True
        G = _grad(S, C, Lam, y, rho, S_inv, CC=CC, LC=LC)
        norm = float(np.linalg.norm(G))
        if norm == 0.0:
            return S, f0, it, False
        d = -G / norm
        R0 = S @ C - eye
        line = _SLine(S, d, C, Lam, y, rho, R0)
        res = armijo_step(line, s=s, beta=beta, h=h, f0=f0)
        if res.stalled:
            if use_approx:
                # the approximate direction may not descend; retry exactly
                use_approx = False
                continue
            return S, f0, it, it == 0
        S = S + res.step * d
        S = 0.5 * (S + S.T)
        f0 = res.value
        if res.step <= params.eps_S:
            return S, f0, it + 1, False
    return S, f0, params.it_S, False


def _s_lbfgs(state, y, params, f0):
    """Scaled L-BFGS on the ``S`` subproblem; returns ``(S, value, iters, failed)``."""
    C, Lam, rho = state.C, state.Lambda, params.rho
    n = C.shape[0]
    eye = np.eye(n)
    d, U = np.linalg.eigh(C)
    d = np.maximum(d, 1e-300)
    # inverse square root of the diagonal Hessian (penalty plus log-det at S = C^-1)
    W = 1.0 / np.sqrt(0.5 * rho * (d[:, None] ** 2 + d[None, :] ** 2) + np.outer(d, d))
    # everything below lives in the eigenbasis, where C is diagonal
    yh = U.T @ y
    yy = np.outer(yh, yh)
    Lh = U.T @ Lam @ U
    LD = Lh * d[None, :]

    def fun(x):
        Z = x.reshape(n, n)
        Sh = 0.5 * (Z + Z.T) * W
        try:
            cf = cho_factor(Sh, lower=True)
        except (LinAlgError, ValueError):
            return 1e300, np.zeros_like(x)
        logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
        R = Sh * d[None, :] - eye
        val = float(yh @ Sh @ yh) - logdet + float(np.sum(Lh * R)) + 0.5 * rho * float(np.sum(R * R))
        G = yy - cho_solve(cf, eye) + LD + rho * (R * d[None, :])
        Gt = 0.5 * (G + G.T) * W
        return val, Gt.ravel()

    z0 = ((U.T @ state.S @ U) / W).ravel()
    res = minimize(fun, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": params.it_S, "gtol": 1e-10, "ftol": 1e-15, "maxcor": 30})
    if not res.fun < f0:
        return state.S, f0, int(res.nit), False
    Z = res.x.reshape(n, n)
    S = U @ (0.5 * (Z + Z.T) * W) @ U.T
    return 0.5 * (S + S.T), float(res.fun), int(res.nit), False


def admm_solve(y, K_list, noise_var, alpha0, Lambda0=None, params: AdmmParams | None = None):
    """Run the ADMM with fixed ``noise_var``; returns ``(alpha, report)``.

    ``report.objective_trace`` holds the likelihood ``y^T C^{-1} y + log det C``
    after every outer iteration and ``report.extra['gap']`` the constraint
    residual ``||S C - I||_F``.
    """
    params = params or AdmmParams()
    params.validate()
    timer = Timer()
    y = np.asarray(y, dtype=float).reshape(-1)
    K = np.asarray(K_list, dtype=float)
    if K.ndim != 3 or K.shape[1:] != (y.size, y.size):
        raise ValueError("K_list must be an (m, n, n) stack matching y")
    if not noise_var > 0:
        raise ValueError("ADMM needs a fixed positive noise variance")
    alpha = np.maximum(np.asarray(alpha0, dtype=float).reshape(-1), 0.0)
    if alpha.size != K.shape[0]:
        raise ValueError("alpha0 and K_list disagree on m")
    n = y.size
    Lam = np.eye(n) if Lambda0 is None else np.array(Lambda0, dtype=float)
    report = SolverReport()
    gaps, inner_counts = [], []

    C = _cov(K, alpha, noise_var)
    try:
        S = cho_solve(cho_factor(C, lower=True), np.eye(n))
    except (LinAlgError, ValueError):
        report.termination = "numerical_failure"
        report.wall_time = timer.elapsed()
        return alpha, report
    S = 0.5 * (S + S.T)
    state = AdmmState(S=S, alpha=alpha, Lambda=Lam, C=C)
    K = np.ascontiguousarray(K)
    cache = sweep_cache(K)
    report.objective_trace.append(_likelihood(y, C))

    for k in range(params.max_outer_iters):
        use_approx = state.gap() <= params.delta
        CC = state.C @ state.C
        LC = state.Lambda @ state.C
        f0 = augmented_lagrangian(state.S, state.C, state.Lambda, y, params.rho)
        if params.s_solver == "lbfgs":
            S_new, _, n_inner, failed = _s_lbfgs(state, y, params, f0)
        else:
            S_new, _, n_inner, failed = _s_step(state, y, params, use_approx, CC, LC, f0)
        inner_counts.append(n_inner)
        if failed:
            log.warning("ADMM S-step found no Armijo step at outer iteration %d", k)
            report.termination = "numerical_failure"
            report.extra["state"] = state
            break
        state.S = S_new
        alpha_new = alpha_sweep(state.S, K, state.alpha, state.C, state.Lambda, params.rho, cache)
        change = float(np.linalg.norm(alpha_new - state.alpha))
        state.alpha = alpha_new
        state.C = _cov(K, alpha_new, noise_var)
        report.iterations = k + 1
        report.objective_trace.append(_likelihood(y, state.C))
        gaps.append(state.gap())
        if change <= params.eps_admm:
            report.termination = "converged"
            break
        R = state.S @ state.C
        R[np.diag_indices(n)] -= 1.0
        state.Lambda = state.Lambda + params.rho_prime * R

    report.extra["gap"] = gaps
    report.extra["inner_iterations"] = inner_counts
    report.nnz_alpha = count_nonzero_weights(state.alpha)
    report.wall_time = timer.elapsed()
    return state.alpha, report


def _likelihood(y, C) -> float:
    Lc = stable_cholesky(C)
    v = solve_triangular(Lc, y, lower=True)
    return float(v @ v) + 2.0 * float(np.sum(np.log(np.diag(Lc))))
