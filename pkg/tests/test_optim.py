import numpy as np
import pytest

from gsmgp.cli.experiment import synth_series
from gsmgp.gp import nll
from gsmgp.kernels import GridSpec, GsmModel, SubKernelGrid, generate_grids, sub_kernel_matrix
from gsmgp.lowrank import FactorMatrix, assemble_cov, exact_factor, exact_factors
from gsmgp._backend import core
from gsmgp.optim import (
    AdmmParams, AdmmState, GradProjParams, LmkProblem, MmParams, admm_grad_S, admm_solve, alpha_sweep,
    armijo_step, augmented_lagrangian, gradproj_solve, majorizer, mm_inner_solve, mm_solve, projected_step,
    unboundedness_probe,
)
from gsmgp.spectral_init import welch_l1_init

from conftest import random_grids


def small_problem(rng, n=12, m=4, noise=0.3):
    grids = random_grids(rng, m, sigma_max=0.05)
    factors = [exact_factor(sub_kernel_matrix(n, g)) for g in grids]
    y = rng.standard_normal(n)
    return grids, factors, y, LmkProblem(y, factors)


# -- MM ------------------------------------------------------------------

def test_majorizer_tangent():
    rng = np.random.default_rng(0)
    _, _, _, prob = small_problem(rng)
    for _ in range(20):
        theta = np.append(rng.uniform(0, 2, 4), rng.uniform(0.1, 1))
        assert majorizer(prob, theta, theta) == pytest.approx(prob.objective(theta[:-1], theta[-1]), abs=1e-10)


def test_majorizer_upper_bounds():
    rng = np.random.default_rng(1)
    _, _, _, prob = small_problem(rng)
    tk = np.append(rng.uniform(0, 2, 4), 0.5)
    for _ in range(20):
        theta = np.append(rng.uniform(0, 3, 4), rng.uniform(0.1, 1))
        assert majorizer(prob, theta, tk) >= prob.objective(theta[:-1], theta[-1]) - 1e-10


def test_scalar_mm_step():
    y, noise, a0 = 1.7, 0.2, 0.5
    prob = LmkProblem([y], [FactorMatrix(np.ones((1, 1)))])
    ev = prob.evaluate(np.array([a0]), noise)
    res = mm_inner_solve(prob, prob.grad_h(ev), np.array([a0, noise]), noise_fixed=True)
    # minimize y^2 / (a + s) + a / (a0 + s) over a >= 0
    expect = max(abs(y) * np.sqrt(a0 + noise) - noise, 0.0)
    assert res.theta[0] == pytest.approx(expect, abs=1e-6)
    assert res.theta[1] == noise
    model, _ = mm_solve([y], [FactorMatrix(np.ones((1, 1)))], GsmModel([SubKernelGrid(0.1, 0.0)], [a0], noise),
                        MmParams(max_outer_iters=1, estimate_noise=False))
    assert model.alpha[0] == pytest.approx(expect, abs=1e-6)


def test_inner_zero_data():
    rng = np.random.default_rng(2)
    grids, factors, _, _ = small_problem(rng)
    prob = LmkProblem(np.zeros(12), factors)
    res = mm_inner_solve(prob, np.zeros(5), np.ones(5))
    assert res.objective == 0.0


def test_inner_never_worse_than_start():
    rng = np.random.default_rng(3)
    for _ in range(20):
        _, _, _, prob = small_problem(rng, n=10, m=3)
        start = np.append(rng.uniform(0, 3, 3), rng.uniform(0.1, 1.0))
        ev = prob.evaluate(start[:-1], start[-1])
        gh = prob.grad_h(ev)
        res = mm_inner_solve(prob, gh, start, noise_lower=1e-6)
        assert np.all(res.theta >= 0)
        assert res.objective <= ev.g - gh @ start + 1e-12


def test_mm_descent_and_sparsity():
    n, m = 100, 500
    grids = generate_grids(GridSpec(m=m))
    factors = exact_factors(n, grids)
    y = synth_series((0.1, 0.3), (1.0, 1.0), 0.0, 0.1, n, 1, 3).y_train
    model0 = GsmModel(grids, np.maximum(np.random.default_rng(3).normal(0, np.sqrt(10), m), 0), 0.1)
    model, rep = mm_solve(y, factors, model0, MmParams(max_outer_iters=30, estimate_noise=False))
    trace = np.array(rep.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9)
    assert rep.termination == "converged"
    assert 2 <= rep.iterations <= 30
    assert rep.nnz_alpha <= 0.1 * m
    assert model.noise_var == 0.1


def test_mm_estimates_noise():
    rng = np.random.default_rng(17)
    grids, factors, y, _ = small_problem(rng, n=30, m=6)
    model, rep = mm_solve(y, factors, GsmModel(grids, np.ones(6), 1.0), MmParams())
    assert model.noise_var != 1.0 and model.noise_var > 0
    assert np.all(np.diff(rep.objective_trace) <= 1e-9)


# -- Armijo / gradient projection ------------------------------------------

def test_armijo_examples():
    r = armijo_step(lambda mu: (mu - 1.0) ** 2, s=1.0, beta=0.2)
    assert r.step == 1.0 and not r.stalled
    r = armijo_step(lambda mu: mu, s=1.0, beta=0.2)
    assert r.stalled and r.step == 0.0
    rng = np.random.default_rng(4)
    for _ in range(10):
        A = rng.standard_normal((4, 4))
        Q = A @ A.T + np.eye(4)
        x = rng.standard_normal(4)
        d = -(Q @ x)

        def f(mu):
            z = x + mu * d
            return 0.5 * z @ Q @ z

        r = armijo_step(f, s=1.0, beta=0.2, c=1e-4, slope=float((Q @ x) @ d))
        assert f(r.step) <= f(0) + 1e-4 * r.step * float((Q @ x) @ d)


def test_projected_step():
    assert projected_step(np.array([1.0, 0.2]), np.array([2.0, 1.0]), 0.5, np.zeros(2)).tolist() == [0.0, 0.0]


def test_gradproj_stationary_start():
    rng = np.random.default_rng(5)
    grids, factors, _, _ = small_problem(rng)
    model0 = GsmModel(grids, np.zeros(4), 0.5)
    model, rep = gradproj_solve(np.zeros(12), factors, model0, GradProjParams(estimate_noise=False))
    assert np.array_equal(model.theta, model0.theta)
    assert rep.termination == "converged"


def test_gradproj_single_step_matches_projection():
    rng = np.random.default_rng(6)
    grids, factors, y, prob = small_problem(rng)
    model0 = GsmModel(grids, rng.uniform(0, 1, 4), 0.4)
    params = GradProjParams(max_iters=1)
    model, rep = gradproj_solve(y, factors, model0, params)
    g = prob.grad(prob.evaluate(model0.alpha, model0.noise_var))
    mu = params.s / np.max(np.abs(g))
    lower = np.zeros(5)
    lower[-1] = params.noise_floor * np.var(y)
    candidates = [projected_step(model0.theta, g, mu * params.beta ** k, lower) for k in range(51)]
    assert any(np.allclose(model.theta, c, atol=1e-14) for c in candidates)
    assert rep.objective_trace[1] < rep.objective_trace[0]


def test_solver_agreement_small():
    rng = np.random.default_rng(7)
    n, m = 30, 10
    grids = generate_grids(GridSpec(m=m, fixed_sigma=0.01))
    factors = exact_factors(n, grids)
    y = synth_series((0.125, 0.325), (1.0, 1.0), 0.01, 0.1, n, 1, 7).y_train
    prob = LmkProblem(y, factors)
    a0 = np.full(m, 0.2)
    model0 = GsmModel(grids, a0, 0.1)
    mm, _ = mm_solve(y, factors, model0, MmParams(estimate_noise=False, obj_tol=1e-8, max_outer_iters=200), problem=prob)
    gp, _ = gradproj_solve(y, factors, model0, GradProjParams(estimate_noise=False, max_iters=2000), problem=prob)
    ad, _ = admm_solve(y, prob.K, 0.1, a0, params=AdmmParams(eps_admm=1e-7, max_outer_iters=2000))
    vals = [prob.objective(mm.alpha, 0.1), prob.objective(gp.alpha, 0.1), prob.objective(ad, 0.1)]
    best = min(vals)
    assert all(v - best <= 0.02 * abs(best) for v in vals), vals


# -- ADMM ------------------------------------------------------------------

def admm_instance(rng, n=5, m=2, noise=0.5):
    grids = random_grids(rng, m, sigma_max=0.1)
    K = np.stack([sub_kernel_matrix(n, g) for g in grids])
    alpha = rng.uniform(0.2, 1.5, m)
    C = np.tensordot(alpha, K, axes=1) + noise * np.eye(n)
    y = rng.standard_normal(n)
    return K, alpha, C, y


def _sym(rng, n, scale=0.1):
    A = rng.standard_normal((n, n)) * scale
    return 0.5 * (A + A.T)


def test_alpha_sweep_fixed_point():
    rng = np.random.default_rng(8)
    K, alpha, C, _ = admm_instance(rng)
    S = np.linalg.inv(C)
    assert np.allclose(alpha_sweep(S, K, alpha, C, np.zeros_like(C), 100.0), alpha, atol=1e-10)


def test_alpha_sweep_projection():
    # a single weight whose unconstrained update is alpha - 0.3 ends at 0
    P = np.eye(2)[None] * 1.0
    Y = -0.3 * np.eye(2)
    assert core.gauss_seidel_sweep(P, Y.copy(), np.array([0.0]))[0] == 0.0
    out = core.gauss_seidel_sweep(P, Y.copy(), np.array([0.2]))
    assert out[0] == 0.0


def test_gauss_seidel_running_cov_identity():
    rng = np.random.default_rng(9)
    K, alpha, C, _ = admm_instance(rng, n=6, m=4)
    S = np.linalg.inv(C) + _sym(rng, 6, 0.01)
    Lam = _sym(rng, 6)
    rho = 10.0
    P = np.ascontiguousarray(S @ K)
    Y = np.eye(6) - S @ C - Lam / rho
    new = core.gauss_seidel_sweep(P, Y, alpha.copy())
    C_new = np.tensordot(new, K, axes=1) + 0.5 * np.eye(6)
    assert np.allclose(Y, np.eye(6) - S @ C_new - Lam / rho, atol=1e-12)


def test_approximate_update_form():
    rng = np.random.default_rng(10)
    K, alpha, C, _ = admm_instance(rng, n=5, m=1)
    alpha[:] = 50.0
    C = alpha[0] * K[0] + 0.5 * np.eye(5)
    S = np.linalg.inv(C)
    Lam = _sym(rng, 5)
    rho = 100.0
    new = alpha_sweep(S, K, alpha, C, Lam, rho)
    SK = S @ K[0]
    simple = alpha[0] - (1 / rho) * np.trace(K[0] @ S @ Lam) / np.trace(K[0] @ S @ S @ K[0])
    assert new[0] == pytest.approx(simple, rel=1e-10)


def test_grad_symmetry_and_reduced_form():
    rng = np.random.default_rng(11)
    K, alpha, C, y = admm_instance(rng)
    S = np.linalg.inv(C)
    S = 0.5 * (S + S.T)
    G = admm_grad_S(AdmmState(S, alpha, np.zeros_like(C), C), y, 100.0)
    assert np.array_equal(G, 0.5 * (G + G.T))
    yy = np.outer(y, y)
    reduced = 2 * yy - np.diag(np.diag(yy)) - 2 * C + np.diag(np.diag(C))
    assert np.allclose(G, reduced, atol=1e-8)


def fd_grad_S(S, C, Lam, y, rho, h=1e-5):
    n = S.shape[0]
    G = np.zeros_like(S)
    for i in range(n):
        for j in range(i, n):
            E = np.zeros_like(S)
            E[i, j] = E[j, i] = h
            G[i, j] = G[j, i] = (augmented_lagrangian(S + E, C, Lam, y, rho)
                                 - augmented_lagrangian(S - E, C, Lam, y, rho)) / (2 * h)
    return G


def test_grad_S_finite_differences():
    rng = np.random.default_rng(12)
    K, alpha, C, y = admm_instance(rng)
    S = np.linalg.inv(C) + _sym(rng, 5, 0.02)
    Lam = _sym(rng, 5)
    G = admm_grad_S(AdmmState(S, alpha, Lam, C), y, 1.0)
    num = fd_grad_S(S, C, Lam, y, 1.0)
    assert np.linalg.norm(G - num) / np.linalg.norm(num) < 1e-5


def test_admm_rejects_bad_inputs():
    rng = np.random.default_rng(13)
    K, alpha, C, y = admm_instance(rng)
    with pytest.raises(ValueError):
        admm_solve(y, K, 0.0, alpha)
    with pytest.raises(ValueError):
        admm_solve(y, K, 0.5, alpha[:1])
    with pytest.raises(ValueError):
        AdmmParams(rho=10, rho_prime=20).validate()


def test_admm_feasibility_trend():
    n = 86
    grids = generate_grids(GridSpec(m=500))
    K = np.stack([f.gram() for f in exact_factors(n, grids)])
    y = synth_series((0.1, 0.3), (1.0, 1.0), 0.0, 0.1, n, 1, 0).y_train
    a0 = welch_l1_init(y, grids)
    _, rep = admm_solve(y, K, 0.1, a0, params=AdmmParams(eps_admm=1e-300, max_outer_iters=200))
    gap = rep.extra["gap"]
    assert len(gap) == 200
    assert gap[199] <= gap[9]
    assert np.all(np.isfinite(rep.objective_trace))


def test_admm_steepest_mode_runs():
    rng = np.random.default_rng(14)
    K, alpha, C, y = admm_instance(rng, n=6, m=3)
    a, rep = admm_solve(y, K, 0.5, alpha, params=AdmmParams(s_solver="steepest", it_S=50, max_outer_iters=5))
    assert np.all(a >= 0)
    assert rep.termination in ("converged", "max_iters", "numerical_failure")
    assert np.all(np.isfinite(rep.objective_trace))


# -- unboundedness probe -----------------------------------------------------

def probe_factors():
    return [exact_factor(sub_kernel_matrix(20, SubKernelGrid(0.2, 0.0)))]


def test_probe_decreases_in_range():
    res = unboundedness_probe(probe_factors(), z=np.random.default_rng(15).standard_normal(2))
    assert res.rank == 2
    assert res.strictly_decreasing


def test_probe_control():
    y = np.random.default_rng(16).standard_normal(20)
    assert not unboundedness_probe(probe_factors(), y=y).strictly_decreasing


def test_probe_zero_data():
    res = unboundedness_probe(probe_factors(), z=np.zeros(2))
    assert res.strictly_decreasing
    # with alpha = 0 the likelihood is log det(I / c) = -n log c
    for c in res.c_values:
        assert nll(np.zeros(20), np.eye(20) / c) == pytest.approx(-20 * np.log(c))


def test_probe_full_rank_rejected():
    with pytest.raises(ValueError):
        unboundedness_probe([FactorMatrix(np.eye(4))], z=np.ones(4))
