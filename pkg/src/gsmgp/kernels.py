"""Spectral mixture (SM) and grid spectral mixture (GSM) kernels.

A GSM sub-kernel is ``k_i(tau) = exp(-2 pi^2 tau^2 sigma_i^2) cos(2 pi tau mu_i)``
at a fixed grid point ``(mu_i, sigma_i)``; the GSM kernel is a nonnegative
weighted sum of sub-kernels.  Time indices are the integers ``1..n``, so every
kernel matrix is a symmetric Toeplitz matrix built from integer lags.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import toeplitz

from ._backend import core

__all__ = [
    "InvalidSpecError",
    "DegenerateDensityError",
    "SubKernelGrid",
    "GridSpec",
    "GsmModel",
    "SmKernelSpec",
    "generate_grids",
    "sub_kernel_value",
    "sub_kernel_matrix",
    "sub_kernel_matrices",
    "gsm_kernel_value",
    "gsm_lags",
    "spectral_density",
    "sm_kernel_value",
    "numeric_rank",
    "machine_rank_tol",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class InvalidSpecError(ValueError):
    """Grid or model parameters violate their invariants."""


class DegenerateDensityError(ValueError):
    """Spectral density requested for a zero-bandwidth grid."""


@dataclass(frozen=True)
class SubKernelGrid:
    """Frequency ``mu`` (cycles per sample) and bandwidth ``sigma`` of one sub-kernel."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (0.0 <= self.mu < 0.5):
            raise InvalidSpecError(f"mu must lie in [0, 1/2), got {self.mu}")
        if not self.sigma >= 0.0:
            raise InvalidSpecError(f"sigma must be nonnegative, got {self.sigma}")


@dataclass(frozen=True)
class GridSpec:
    """How to lay out ``m`` grid points.

    Parameters
    ----------
    strategy : {"uniform", "random"}
    dimensionality : {"one_d", "two_d"}
        ``one_d`` shares ``fixed_sigma`` across all grids; ``two_d`` also
        spreads the variance ``sigma**2`` over ``var_bounds``.
    m : int
        Number of grid points.
    mu_bounds : (float, float)
        Half-open frequency band ``[low, high)`` inside ``[0, 1/2]``.
    fixed_sigma : float
        Shared bandwidth for 1-D grids.
    var_bounds : (float, float)
        Bandwidth-variance band ``[sigma2_low, sigma2_high]`` for 2-D grids.
    seed : int
        Seed for the random strategy.
    """

    strategy: str = "uniform"
    dimensionality: str = "one_d"
    m: int = 500
    mu_bounds: tuple = (0.0, 0.5)
    fixed_sigma: float = 0.001
    var_bounds: tuple = (0.0, 0.15)
    seed: int = 0

    def validate(self):
        if self.strategy not in ("uniform", "random"):
            raise InvalidSpecError(f"unknown grid strategy {self.strategy!r}")
        if self.dimensionality not in ("one_d", "two_d"):
            raise InvalidSpecError(f"unknown dimensionality {self.dimensionality!r}")
        if int(self.m) < 1:
            raise InvalidSpecError("grid count m must be at least 1")
        lo, hi = self.mu_bounds
        if not (0.0 <= lo < hi <= 0.5):
            raise InvalidSpecError(f"mu bounds {self.mu_bounds} must satisfy 0 <= low < high <= 1/2")
        if self.dimensionality == "one_d":
            if not self.fixed_sigma >= 0.0:
                raise InvalidSpecError("fixed_sigma must be nonnegative")
        else:
            vlo, vhi = self.var_bounds
            if not (0.0 <= vlo <= vhi):
                raise InvalidSpecError(f"variance bounds {self.var_bounds} are inverted or negative")


def _midpoints(lo, hi, count):
    return lo + (np.arange(count) + 0.5) * (hi - lo) / count


def _near_square_split(m):
    rows = int(math.isqrt(m))
    while m % rows:
        rows -= 1
    return m // rows, rows


def generate_grids(spec: GridSpec) -> list[SubKernelGrid]:
    """Generate the grid points described by ``spec``.

    Uniform 1-D grids use bin midpoints ``mu_low + (i - 1/2) (mu_high - mu_low) / m``.
    Uniform 2-D grids use a midpoint lattice whose side lengths are the
    divisor pair of ``m`` closest to square.  Random grids are drawn uniformly
    from the box with a ``numpy.random.default_rng(seed)`` stream.
    """
    spec.validate()
    m = int(spec.m)
    lo, hi = spec.mu_bounds
    if spec.strategy == "uniform":
        if spec.dimensionality == "one_d":
            mus = _midpoints(lo, hi, m)
            sigmas = np.full(m, float(spec.fixed_sigma))
        else:
            n_mu, n_var = _near_square_split(m)
            vlo, vhi = spec.var_bounds
            mu_axis = _midpoints(lo, hi, n_mu)
            var_axis = _midpoints(vlo, vhi, n_var) if vhi > vlo else np.full(n_var, vlo)
            mus = np.repeat(mu_axis, n_var)
            sigmas = np.sqrt(np.tile(var_axis, n_mu))
    else:
        rng = np.random.default_rng(spec.seed)
        mus = rng.uniform(lo, hi, size=m)
        if spec.dimensionality == "one_d":
            sigmas = np.full(m, float(spec.fixed_sigma))
        else:
            vlo, vhi = spec.var_bounds
            sigmas = np.sqrt(rng.uniform(vlo, vhi, size=m))
    # uniform() can round up to ``hi`` in float arithmetic
    mus = np.minimum(mus, np.nextafter(min(hi, 0.5), 0.0))
    return [SubKernelGrid(float(mu), float(s)) for mu, s in zip(mus, sigmas)]


@dataclass
class GsmModel:
    """GSM hyper-parameters: grids, nonnegative weights and noise variance."""

    grids: list
    alpha: np.ndarray
    noise_var: float = 1.0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        self.noise_var = float(self.noise_var)
        if len(self.grids) != self.alpha.size:
            raise InvalidSpecError(
                f"{len(self.grids)} grids but {self.alpha.size} weights"
            )
        if np.any(self.alpha < 0) or not np.all(np.isfinite(self.alpha)):
            raise InvalidSpecError("weights must be finite and nonnegative")
        if not self.noise_var >= 0.0:
            raise InvalidSpecError("noise variance must be nonnegative")

    @property
    def m(self) -> int:
        return self.alpha.size

    @property
    def mus(self) -> np.ndarray:
        return np.array([g.mu for g in self.grids], dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([g.sigma for g in self.grids], dtype=float)

    @property
    def theta(self) -> np.ndarray:
        """Full hyper-parameter vector ``[alpha..., noise_var]``."""
        return np.append(self.alpha, self.noise_var)

    def with_theta(self, theta) -> "GsmModel":
        theta = np.asarray(theta, dtype=float)
        return GsmModel(list(self.grids), theta[:-1].copy(), float(theta[-1]))


@dataclass(frozen=True)
class SmKernelSpec:
    """Spectral mixture kernel with ``Q`` free (weight, mean, variance) components."""

    weights: tuple
    means: tuple
    variances: tuple

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.variances)):
            raise InvalidSpecError("SM component arrays differ in length")
        if any(w < 0 for w in self.weights) or any(v < 0 for v in self.variances):
            raise InvalidSpecError("SM weights and variances must be nonnegative")

    @property
    def Q(self) -> int:
        return len(self.weights)


def sub_kernel_value(tau, grid: SubKernelGrid) -> float:
    tau = float(tau)
    return math.exp(-2.0 * math.pi ** 2 * tau * tau * grid.sigma ** 2) * math.cos(
        2.0 * math.pi * tau * grid.mu
    )


def sub_kernel_matrix(n: int, grid: SubKernelGrid) -> np.ndarray:
    """Dense ``n x n`` sub-kernel matrix over time indices ``1..n``."""
    if n < 1:
        raise InvalidSpecError("n must be at least 1")
    lags = core.lag_table([grid.mu], [grid.sigma], n)[0]
    return toeplitz(lags)


def sub_kernel_matrices(n: int, grids: Sequence[SubKernelGrid]) -> np.ndarray:
    """Stack of all sub-kernel matrices, shape ``(m, n, n)``."""
    mus = [g.mu for g in grids]
    sigmas = [g.sigma for g in grids]
    return core.toeplitz_stack(core.lag_table(mus, sigmas, n))


def gsm_lags(n: int, model: GsmModel) -> np.ndarray:
    """GSM kernel at lags ``0..n-1``."""
    return model.alpha @ core.lag_table(model.mus, model.sigmas, n)


def gsm_kernel_value(tau, model: GsmModel) -> float:
    tau = float(tau)
    mus, sigmas = model.mus, model.sigmas
    vals = np.exp(-2.0 * np.pi ** 2 * tau * tau * sigmas ** 2) * np.cos(2.0 * np.pi * tau * mus)
    return float(model.alpha @ vals)


def spectral_density(f, model: GsmModel) -> float:
    """Two-sided Gaussian-mixture spectral density ``sum_i alpha_i s_i(f)``.

    ``s_i(f) = N(f; mu_i, sigma_i^2) + N(f; -mu_i, sigma_i^2)``.  Each ``s_i``
    integrates to 2 over the real line, so ``k(tau)`` is recovered by the
    one-sided transform ``int_0^inf S(f) cos(2 pi f tau) df``.
    """
    sigmas = model.sigmas
    if np.any(sigmas <= 0):
        raise DegenerateDensityError("spectral density is undefined for sigma = 0 grids")
    mus = model.mus
    f = float(f)
    norm = 1.0 / (sigmas * _SQRT_2PI)
    s = norm * (np.exp(-0.5 * ((f - mus) / sigmas) ** 2) + np.exp(-0.5 * ((f + mus) / sigmas) ** 2))
    return float(model.alpha @ s)


def sm_kernel_value(tau, spec: SmKernelSpec) -> float:
    tau = float(tau)
    total = 0.0
    for w, mu, var in zip(spec.weights, spec.means, spec.variances):
        total += w * math.exp(-2.0 * math.pi ** 2 * tau * tau * var) * math.cos(2.0 * math.pi * tau * mu)
    return total


def machine_rank_tol(n: int, top: float) -> float:
    """Absolute cutoff ``n * eps(top)``, the convention of MATLAB's ``rank``."""
    return n * float(np.spacing(top))


def numeric_rank(matrix, rel_tol: Optional[float] = 1e-10) -> int:
    """Number of eigenvalues above ``rel_tol`` times the largest one.

    ``rel_tol=None`` switches to the machine-precision cutoff
    :func:`machine_rank_tol` applied to eigenvalue magnitudes (the singular
    values of a symmetric matrix).
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("numeric_rank needs a square matrix")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("numeric_rank needs a symmetric matrix")
    w = np.linalg.eigvalsh(A)
    if rel_tol is None:
        w = np.abs(w)
    top = w.max() if w.size else 0.0
    if top <= 0.0:
        return 0
    cutoff = machine_rank_tol(A.shape[0], top) if rel_tol is None else rel_tol * top
    return int(np.count_nonzero(w > cutoff))
