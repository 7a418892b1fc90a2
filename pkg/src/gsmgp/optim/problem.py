"""Shared objective machinery for the weight/noise solvers.

The ML objective for a linear multiple kernel is

    l(theta) = g(theta) - h(theta),   g = y^T C^{-1} y,   h = -log det C,

with ``C(theta) = sum_i alpha_i L_i L_i^T + noise_var * I``.  Both ``g`` and
``h`` are convex on ``theta >= 0``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from ..lowrank import FactorMatrix, stack_factors

__all__ = ["SolverReport", "LmkProblem", "Evaluation", "count_nonzero_weights"]

# dense sub-kernel stacks above this many floats fall back to factor products
_DENSE_LIMIT = 60_000_000


def count_nonzero_weights(alpha) -> int:
    alpha = np.asarray(alpha, dtype=float)
    top = float(alpha.max()) if alpha.size else 0.0
    if top <= 0:
        return 0
    return int(np.count_nonzero(alpha > 1e-8 * top))


@dataclass
class SolverReport:
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    termination: str = "max_iters"
    nnz_alpha: int = 0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")


@dataclass
class Evaluation:
    chol: np.ndarray
    b: np.ndarray  # C^{-1} y
    g: float
    logdet: float

    @property
    def value(self) -> float:
        return self.g + self.logdet


class LmkProblem:
    """Objective pieces for ``y`` and a fixed list of sub-kernel factors."""

    def __init__(self, y, factors, dense=None):
        self.y = np.asarray(y, dtype=float).reshape(-1)
        mats = [f.data if isinstance(f, FactorMatrix) else np.asarray(f, dtype=float) for f in factors]
        self.B, self.offsets, self.widths = stack_factors(mats)
        self.n = self.y.size
        self.m = len(mats)
        if self.B.shape[0] != self.n:
            raise ValueError("factors and y disagree on n")
        self._nz = self.widths > 0
        if dense is None:
            dense = self.m * self.n * self.n <= _DENSE_LIMIT
        self.K = np.stack([M @ M.T for M in mats]) if dense else None
        self.n_evals = 0

    def cov(self, alpha, noise_var) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        active = alpha != 0.0
        n_active = int(np.count_nonzero(active))
        if self.K is not None and n_active * 4 > self.m:
            C = np.tensordot(alpha, self.K, axes=1)
        else:
            # sparse weights: a product over the active factor columns is cheaper
            cols = np.repeat(active, self.widths)
            w = np.repeat(np.sqrt(np.clip(alpha[active], 0.0, None)), self.widths[active])
            Bs = self.B[:, cols] * w
            C = Bs @ Bs.T
        C = 0.5 * (C + C.T)
        C[np.diag_indices(self.n)] += noise_var
        return C

    def evaluate(self, alpha, noise_var) -> Evaluation:
        """Cholesky-based evaluation; raises ``LinAlgError`` when ``C`` is not PD."""
        self.n_evals += 1
        C = self.cov(alpha, noise_var)
        Lc = cholesky(C, lower=True, check_finite=True)
        b = cho_solve((Lc, True), self.y)
        return Evaluation(chol=Lc, b=b, g=float(self.y @ b), logdet=2.0 * float(np.sum(np.log(np.diag(Lc)))))

    def objective(self, alpha, noise_var) -> float:
        try:
            return self.evaluate(alpha, noise_var).value
        except (LinAlgError, ValueError):
            return float("inf")

    def blocks(self, col_values) -> np.ndarray:
        out = np.zeros(self.m)
        if self.B.shape[1]:
            out[self._nz] = np.add.reduceat(col_values, self.offsets[self._nz])
        return out

    def grad_g(self, ev: Evaluation) -> np.ndarray:
        """``[-||L_i^T b||^2 ..., -||b||^2]`` with ``b = C^{-1} y``."""
        q = (self.B.T @ ev.b) ** 2 if self.B.shape[1] else np.zeros(0)
        return np.append(-self.blocks(q), -float(ev.b @ ev.b))

    def grad_h(self, ev: Evaluation) -> np.ndarray:
        """``[-tr(C^{-1} K_i) ..., -tr(C^{-1})]``."""
        if self.B.shape[1]:
            W = solve_triangular(ev.chol, self.B, lower=True)
            tr = self.blocks(np.einsum("ij,ij->j", W, W))
        else:
            tr = np.zeros(self.m)
        Linv = solve_triangular(ev.chol, np.eye(self.n), lower=True)
        return -np.append(tr, float(np.sum(Linv * Linv)))

    def grad(self, ev: Evaluation) -> np.ndarray:
        return self.grad_g(ev) - self.grad_h(ev)


class Timer:
    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start
