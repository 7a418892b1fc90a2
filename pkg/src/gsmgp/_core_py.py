"""Pure-numpy implementations of the numerical core.

These mirror the compiled routines in ``_core.pyx`` one-for-one and are used
whenever the extension is unavailable (or ``GSMGP_PURE_PYTHON=1`` is set).
"""
import numpy as np

TWO_PI_SQ = 2.0 * np.pi ** 2


def lag_table(mus, sigmas, n):
    """Sub-kernel values at lags ``0..n-1`` for every grid, shape ``(m, n)``."""
    mus = np.asarray(mus, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    tau = np.arange(n, dtype=float)
    envelope = np.exp(-TWO_PI_SQ * np.outer(sigmas ** 2, tau ** 2))
    return envelope * np.cos(2.0 * np.pi * np.outer(mus, tau))


def toeplitz_stack(lags):
    """Expand a lag table ``(m, n)`` into symmetric Toeplitz matrices ``(m, n, n)``."""
    lags = np.ascontiguousarray(lags, dtype=float)
    n = lags.shape[1]
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return lags[:, idx]


def gauss_seidel_sweep(P, Y, alpha):
    """Sequential coordinate sweep used by the ADMM weight update.

    For each ``i`` in order::

        step_i   = <Y, P_i> / <P_i, P_i>
        new_i    = max(alpha_i + step_i, 0)
        Y       -= (new_i - alpha_i) * P_i

    ``Y`` is updated in place and the new weights are returned.
    """
    m = P.shape[0]
    out = np.array(alpha, dtype=float, copy=True)
    flat = P.reshape(m, -1)
    yflat = Y.reshape(-1)
    for i in range(m):
        pi = flat[i]
        denom = pi @ pi
        if denom <= 0.0:
            continue
        new = out[i] + (yflat @ pi) / denom
        if new < 0.0:
            new = 0.0
        delta = new - out[i]
        if delta != 0.0:
            yflat -= delta * pi
        out[i] = new
    return out


def gram_sweep(K, L, ranks, S2, Z, den, alpha):
    """The same sweep with ``P_i = S K_i`` kept implicit.

    ``Z = S Y``, ``S2 = S S`` and ``den_i = <S2, K_i K_i>`` so that
    ``<Y, P_i> = <Z, K_i>``.  ``K_i = L_i L_i^T`` with ``L_i = L[i, :, :ranks[i]]``,
    so a move of ``alpha_i`` costs two thin products.  ``Z`` is updated in place.
    """
    m = K.shape[0]
    out = np.array(alpha, dtype=float, copy=True)
    flat = K.reshape(m, -1)
    zflat = Z.reshape(-1)
    for i in range(m):
        if den[i] <= 0.0:
            continue
        new = out[i] + (zflat @ flat[i]) / den[i]
        if new < 0.0:
            new = 0.0
        delta = new - out[i]
        if delta != 0.0:
            Li = L[i, :, :ranks[i]]
            Z -= delta * ((S2 @ Li) @ Li.T)
        out[i] = new
    return out


def segment_power(segments, freqs):
    """``|sum_t x_l(t) exp(-j 2 pi f t)|^2`` with ``t = 1..D``, shape ``(L, F)``."""
    segments = np.asarray(segments, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    t = np.arange(1, segments.shape[1] + 1, dtype=float)
    phase = 2.0 * np.pi * np.outer(t, freqs)
    re = segments @ np.cos(phase)
    im = segments @ np.sin(phase)
    return re * re + im * im
