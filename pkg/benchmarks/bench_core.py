"""Time the compiled core against the numpy fallback.

Usage: python benchmarks/bench_core.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from gsmgp._backend import get_backend


def cases(rng):
    mus = np.linspace(0.0005, 0.4995, 500)
    sig = np.full(500, 0.001)
    lags = get_backend("python").lag_table(mus, sig, 86)
    P = rng.standard_normal((500, 86, 86))
    Y = rng.standard_normal((86, 86))
    alpha = np.abs(rng.standard_normal(500))
    K = get_backend("python").toeplitz_stack(lags)
    w, V = np.linalg.eigh(K)
    L = V[:, :, -14:] * np.sqrt(np.maximum(w[:, -14:], 0.0))[:, None, :]
    ranks = np.full(500, 14, dtype=np.intp)
    A = rng.standard_normal((86, 86))
    S = A @ A.T / 86 + np.eye(86)
    S2 = S @ S
    den = np.matmul(K, K).reshape(500, -1) @ S2.ravel()
    segs = rng.standard_normal((11, 32))
    freqs = mus
    return {
        "lag_table m=500 n=680": lambda core: core.lag_table(mus, sig, 680),
        "toeplitz_stack m=500 n=86": lambda core: core.toeplitz_stack(lags),
        "gauss_seidel_sweep m=500 n=86": lambda core: core.gauss_seidel_sweep(P, Y.copy(), alpha),
        "gram_sweep m=500 n=86 r=14": lambda core: core.gram_sweep(K, L, ranks, S2, S @ Y, den, alpha),
        "segment_power L=11 D=32 F=500": lambda core: core.segment_power(segs, freqs),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        compiled = get_backend("cython")
    except ImportError:
        raise SystemExit("compiled core is not built; run `pip install -e . --no-build-isolation`")
    fallback = get_backend("python")
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        t_p = min(timeit.repeat(lambda: fn(fallback), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {t_c:10.3f} {t_p:10.3f} {t_p / t_c:8.2f}x")


if __name__ == "__main__":
    main()
