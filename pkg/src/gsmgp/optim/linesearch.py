"""Armijo backtracking on a scalar restriction ``f(mu) = F(x + mu d)``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ArmijoResult", "armijo_step"]


@dataclass
class ArmijoResult:
    step: float
    n_evals: int
    value: float
    stalled: bool


def armijo_step(f, s=1.0, beta=0.2, h=1e-5, c=1e-4, max_backtracks=50, f0=None, slope=None):
    """Largest ``mu = s * beta**k`` with ``f(mu) <= f(0) + c * mu * f'(0)``.

    A trial must also strictly decrease ``f``.
    ``f'(0)`` is estimated by the forward difference ``(f(h) - f(0)) / h``
    unless ``slope`` is given.  After ``max_backtracks`` rejected trials the
    result is flagged ``stalled`` with ``step = 0``.
    """
    evals = 0
    if f0 is None:
        f0 = f(0.0)
        evals += 1
    if slope is None:
        slope = (f(h) - f0) / h
        evals += 1
    mu = s
    for _ in range(max_backtracks + 1):
        val = f(mu)
        evals += 1
        if np.isfinite(val) and val < f0 and val <= f0 + c * mu * slope:
            return ArmijoResult(step=mu, n_evals=evals, value=val, stalled=False)
        mu *= beta
    return ArmijoResult(step=0.0, n_evals=evals, value=f0, stalled=True)
