"""Low-rank factors ``K_i ~= L_i L_i^T`` for GSM sub-kernel matrices.

Three constructions are provided: a truncated eigendecomposition
(:func:`exact_factor`), Nystrom subsampling (:func:`nystrom_factor`) and
random Fourier features (:func:`rff_factor`).  :func:`assemble_cov` turns a
list of factors plus weights into the model covariance
``C = sum_i alpha_i L_i L_i^T + noise_var * I``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import SubKernelGrid, sub_kernel_matrix

__all__ = [
    "FactorError",
    "FactorMatrix",
    "NystromParams",
    "RffParams",
    "exact_factor",
    "exact_factors",
    "nystrom_factor",
    "rff_factor",
    "rae",
    "assemble_cov",
    "stack_factors",
]

PROVENANCES = ("exact", "nystrom", "rff")


class FactorError(ValueError):
    """A factorization could not be produced from the given inputs."""


@dataclass
class FactorMatrix:
    """An ``n x r`` factor together with how it was obtained."""

    data: np.ndarray
    provenance: str = "exact"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise FactorError("factor data must be a 2-D array")
        if self.provenance not in PROVENANCES:
            raise FactorError(f"unknown provenance {self.provenance!r}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def r(self) -> int:
        return self.data.shape[1]

    @property
    def storage(self) -> int:
        """Number of stored floats, ``n * r``."""
        return self.data.size

    def gram(self) -> np.ndarray:
        return self.data @ self.data.T


@dataclass(frozen=True)
class NystromParams:
    p: int
    seed: int = 0
    eig_tol: float = 1e-10


@dataclass(frozen=True)
class RffParams:
    R: int
    seed: int = 0


def _check_symmetric(K):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise FactorError("expected a square matrix")
    scale = max(np.max(np.abs(K)) if K.size else 0.0, 1.0)
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * scale):
        raise FactorError("matrix is not symmetric")
    return K


def exact_factor(K, rel_tol: float = 1e-10) -> FactorMatrix:
    """Truncated eigendecomposition ``L = U diag(sqrt(lambda))``.

    Eigenvalues at or below ``rel_tol * lambda_max`` are dropped; negative
    ones are float noise on an analytically PSD input and are clipped.
    """
    K = _check_symmetric(K)
    w, U = np.linalg.eigh(0.5 * (K + K.T))
    w = np.clip(w, 0.0, None)
    top = w.max() if w.size else 0.0
    if top <= 0.0:
        return FactorMatrix(np.zeros((K.shape[0], 0)), "exact")
    keep = w > rel_tol * top
    # descending order keeps the leading columns most significant
    order = np.argsort(w[keep])[::-1]
    L = U[:, keep][:, order] * np.sqrt(w[keep][order])
    return FactorMatrix(L, "exact")


def exact_factors(n: int, grids, rel_tol: float = 1e-10) -> list[FactorMatrix]:
    return [exact_factor(sub_kernel_matrix(n, g), rel_tol) for g in grids]


def nystrom_factor(n: int, grid: SubKernelGrid, params: NystromParams) -> FactorMatrix:
    """Nystrom factor from ``p`` landmarks drawn uniformly without replacement.

    The landmark eigenpairs ``(lambda_l, u_l)`` with ``lambda_l`` above
    ``eig_tol * lambda_max`` are rescaled to ``(n/p) lambda_l`` and extended
    to ``sqrt(p/n) / lambda_l * K(X, Xp) u_l``; the factor is
    ``U_ext diag(sqrt(lambda_ext))``.
    """
    p = int(params.p)
    if p < 1:
        raise FactorError("Nystrom needs at least one landmark")
    if p > n:
        raise FactorError(f"landmark count p={p} exceeds n={n}")
    rng = np.random.default_rng(params.seed)
    idx = np.sort(rng.choice(n, size=p, replace=False))
    K_full_cols = _cross_block(n, idx, grid)
    Kp = K_full_cols[idx]
    lam, U = np.linalg.eigh(0.5 * (Kp + Kp.T))
    top = lam.max()
    keep = lam > params.eig_tol * top if top > 0 else np.zeros_like(lam, dtype=bool)
    if not np.any(keep):
        raise FactorError("all landmark eigenvalues fall below the cutoff")
    order = np.argsort(lam[keep])[::-1]
    lam = lam[keep][order]
    U = U[:, keep][:, order]
    lam_ext = (n / p) * lam
    U_ext = np.sqrt(p / n) * (K_full_cols @ U) / lam
    return FactorMatrix(U_ext * np.sqrt(lam_ext), "nystrom")


def _cross_block(n, idx, grid):
    t = np.arange(n, dtype=float)[:, None]
    tau = t - idx[None, :].astype(float)
    return np.exp(-2.0 * np.pi ** 2 * tau ** 2 * grid.sigma ** 2) * np.cos(2.0 * np.pi * tau * grid.mu)


def rff_frequencies(grid: SubKernelGrid, R: int, seed: int) -> np.ndarray:
    """Draw ``R`` frequencies from the two-sided mixture ``s_i(f) / 2``."""
    if grid.sigma <= 0:
        raise FactorError(
            "sigma = 0 has no spectral density to sample; use exact_factor "
            "(the pure cosine sub-kernel has rank <= 2)"
        )
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=R)
    return signs * grid.mu + grid.sigma * rng.standard_normal(R)


def rff_factor(n: int, grid: SubKernelGrid, params: RffParams) -> FactorMatrix:
    """Random Fourier feature factor of shape ``(n, 2R)``.

    Row ``t`` is ``[cos(w_1 t), sin(w_1 t), ..., cos(w_R t), sin(w_R t)] / sqrt(R)``
    with ``w_r = 2 pi f_r``.
    """
    R = int(params.R)
    if R < 1:
        raise FactorError("RFF needs R >= 1")
    f = rff_frequencies(grid, R, params.seed)
    return FactorMatrix(rff_features(n, f), "rff")


def rff_features(n: int, freqs) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=float)
    R = freqs.size
    t = np.arange(1, n + 1, dtype=float)
    phase = 2.0 * np.pi * np.outer(t, freqs)
    L = np.empty((n, 2 * R))
    L[:, 0::2] = np.cos(phase)
    L[:, 1::2] = np.sin(phase)
    return L / np.sqrt(R)


def rae(K, factor) -> float:
    """Relative approximation error ``||K - L L^T||_F / ||K||_F``."""
    K = np.asarray(K, dtype=float)
    L = factor.data if isinstance(factor, FactorMatrix) else np.asarray(factor, dtype=float)
    if L.shape[0] != K.shape[0] or K.shape[0] != K.shape[1]:
        raise FactorError("shape mismatch between matrix and factor")
    denom = np.linalg.norm(K, "fro")
    if denom == 0.0:
        raise FactorError("RAE is undefined for a zero matrix")
    return float(np.linalg.norm(K - L @ L.T, "fro") / denom)


def stack_factors(factors):
    """Concatenate factors column-wise; returns ``(B, offsets)`` for ``np.add.reduceat``."""
    mats = [f.data if isinstance(f, FactorMatrix) else np.asarray(f, dtype=float) for f in factors]
    n = mats[0].shape[0]
    if any(M.shape[0] != n for M in mats):
        raise FactorError("factors disagree on n")
    widths = np.array([M.shape[1] for M in mats], dtype=int)
    offsets = np.concatenate(([0], np.cumsum(widths)[:-1]))
    B = np.hstack(mats) if widths.sum() else np.zeros((n, 0))
    return B, offsets, widths


def assemble_cov(factors, alpha, noise_var: float) -> np.ndarray:
    """``sum_i alpha_i L_i L_i^T + noise_var * I`` (symmetric by construction)."""
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if len(factors) != alpha.size:
        raise FactorError(f"{len(factors)} factors but {alpha.size} weights")
    if np.any(alpha < 0):
        raise FactorError("weights must be nonnegative")
    if noise_var < 0:
        raise FactorError("noise variance must be nonnegative")
    B, _, widths = stack_factors(factors)
    n = B.shape[0]
    scale = np.repeat(np.sqrt(alpha), widths)
    Bs = B * scale
    C = Bs @ Bs.T
    C = 0.5 * (C + C.T)
    C[np.diag_indices(n)] += noise_var
    return C
