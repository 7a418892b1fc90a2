"""Walk the likelihood toward the degenerate boundary ``alpha_i -> inf, noise -> 0``.

If ``K_i`` has rank ``p < n/2`` and ``y`` lies in its range, then along
``alpha_i = c``, ``noise_var = 1/c`` the data term stays bounded while
``log det C ~ (2p - n) log c``, so the likelihood has no lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gp import nll
from ..lowrank import FactorMatrix

__all__ = ["ProbeResult", "unboundedness_probe", "range_basis", "DEFAULT_LADDER"]

DEFAULT_LADDER = (10.0, 1e2, 1e3, 1e4)


@dataclass
class ProbeResult:
    c_values: np.ndarray
    trace: np.ndarray
    y: np.ndarray
    rank: int

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.trace) < 0))


def range_basis(L, rel_tol=1e-10):
    """Orthonormal basis for the column space of ``L`` (thin SVD)."""
    U, s, _ = np.linalg.svd(np.asarray(L, dtype=float), full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    return U[:, s > rel_tol * s[0]]


def unboundedness_probe(factors, z=None, index=0, ladder=DEFAULT_LADDER, y=None) -> ProbeResult:
    """Evaluate the likelihood along ``alpha_index = c``, ``noise_var = 1/c``.

    ``y`` defaults to ``V z`` with ``V`` an orthonormal basis of the range of
    ``K_index``; pass ``y`` explicitly for a control run.  All other weights
    are zero.
    """
    mats = [f.data if isinstance(f, FactorMatrix) else np.asarray(f, dtype=float) for f in factors]
    L = mats[index]
    n = L.shape[0]
    V = range_basis(L)
    p = V.shape[1]
    if p >= n:
        raise ValueError("sub-kernel is full rank; the probe does not apply")
    if y is None:
        if z is None:
            raise ValueError("give either z or y")
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != p:
            raise ValueError(f"z needs {p} coefficients, got {z.size}")
        y = V @ z
    y = np.asarray(y, dtype=float).reshape(-1)
    K = L @ L.T
    cs = np.asarray(ladder, dtype=float)
    trace = np.array([nll(y, c * K + np.eye(n) / c) for c in cs])
    return ProbeResult(c_values=cs, trace=trace, y=y, rank=p)
