import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from helpers import make_instance
from slnreg import (
    Dataset,
    FitOptions,
    FitWarning,
    NumericError,
    SlnParams,
    StructuralError,
    Theta,
    cond_eu1,
    cond_eu2,
    cond_ev2,
    default_init,
    e_step,
    fit,
    gen_dataset,
    hessian,
    m_step,
    observed_loglik,
    q_value,
    score,
    solve_sym,
)
from slnreg.simulate import CASE_I, CASE_II

SQRT_2_OVER_PI = 0.7978845608028654


# ---------------------------------------------------------------------------
# E-step
# ---------------------------------------------------------------------------

def test_e_step_zero_kappa_row():
    # alpha = 0 makes every kappa zero
    d, _, _ = make_instance(1, n=10)
    t = Theta([0.3, -0.2], [0.1, 0.4], [0.0, 0.0])
    c = e_step(d, t)
    assert np.allclose(c.kappa_hat, 0.0)
    assert np.allclose(c.u1_hat, SQRT_2_OVER_PI, atol=1e-14)
    assert np.allclose(c.u2_hat, 1.0, atol=1e-14)


def test_e_step_unit_weight_when_residual_equals_scale():
    # one row, residual exactly sigma: v_hat = sigma/sigma = 1
    sigma = np.exp(0.35)
    d = Dataset([sigma], [[0.0]], [[1.0]], [[1.0]])
    c = e_step(d, Theta([1.0], [0.7], [0.5]))
    assert c.v_hat[0] == pytest.approx(1.0, abs=1e-13)


def test_e_step_matches_pointwise_moments():
    d, t, _ = make_instance(6, n=25)
    c = e_step(d, t)
    mu = d.X @ t.beta
    sigma = np.exp(0.5 * (d.Z @ t.gamma))
    lam = d.W @ t.alpha
    for i in range(d.n):
        p = SlnParams(mu[i], sigma[i], lam[i])
        assert c.v_hat[i] == pytest.approx(cond_ev2(d.y[i], p), rel=1e-12)
        assert c.u1_hat[i] == pytest.approx(cond_eu1(d.y[i], p), rel=1e-12)
        assert c.u2_hat[i] == pytest.approx(cond_eu2(d.y[i], p), rel=1e-12)


@given(coefs=st.lists(st.floats(-3.0, 3.0), min_size=6, max_size=6))
def test_e_step_cache_invariants(coefs):
    d, _, _ = make_instance(40, n=20)
    t = Theta(coefs[:2], coefs[2:4], coefs[4:])
    c = e_step(d, t)
    assert np.all(c.v_hat > 0.0)
    assert np.all(c.u1_hat > 0.0)
    assert np.all(c.u2_hat > 0.0)
    assert np.all(c.u2_hat >= 1.0 + np.minimum(0.0, c.kappa_hat * c.u1_hat) - 1e-12)
    assert np.all(np.isfinite(c.v_hat) & np.isfinite(c.u1_hat) & np.isfinite(c.u2_hat))


# ---------------------------------------------------------------------------
# Q function
# ---------------------------------------------------------------------------

def test_q_value_hand_computed():
    # one row, unit covariates, theta = 0, y = 1: v=1, u1=sqrt(2/pi), u2=1
    d = Dataset([1.0], [[1.0]], [[1.0]], [[1.0]])
    t = Theta([0.0], [0.0], [0.0])
    c = e_step(d, t)
    assert q_value(d, t, c) == pytest.approx(-np.log(np.pi) - 1.0, abs=1e-13)


@pytest.mark.parametrize("seed", [0, 4, 7, 9])
def test_m_step_increases_q(seed):
    rng = np.random.default_rng(seed)
    d = gen_dataset(CASE_II, 60, np.random.SeedSequence((1, seed)))
    t = Theta(
        rng.standard_normal(3) * 0.3,
        rng.standard_normal(3) * 0.3,
        rng.standard_normal(3) * 0.3,
    )
    c = e_step(d, t)
    t_new = m_step(d, t, c)
    assert q_value(d, t_new, c) >= q_value(d, t, c) - 1e-12
    assert observed_loglik(d, t_new) >= observed_loglik(d, t) - 1e-12


# ---------------------------------------------------------------------------
# derivatives
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_score_matches_finite_differences(seed):
    d, t_cache, t_eval = make_instance(seed)
    c = e_step(d, t_cache)
    dims = t_eval.dims
    v0 = t_eval.as_vector()
    fd = oracles.central_grad(
        lambda v: q_value(d, Theta.from_vector(v, dims), c), v0
    )
    an = score(d, t_eval, c)
    assert np.max(np.abs(an - fd)) <= 1e-5 * max(1.0, np.max(np.abs(an)))


@pytest.mark.parametrize("seed", range(5))
def test_hessian_matches_finite_differences(seed):
    d, t_cache, t_eval = make_instance(seed + 100)
    c = e_step(d, t_cache)
    dims = t_eval.dims
    v0 = t_eval.as_vector()
    fd = oracles.central_jac(
        lambda v: score(d, Theta.from_vector(v, dims), c), v0
    )
    an = hessian(d, t_eval, c)
    assert np.max(np.abs(an - (fd + fd.T) / 2)) <= 1e-4 * max(1.0, np.max(np.abs(an)))


def test_score_is_observed_gradient_at_cache_point():
    # with the cache computed at t, the surrogate gradient equals the
    # gradient of the observed log-likelihood
    d, t, _ = make_instance(3)
    c = e_step(d, t)
    v0 = t.as_vector()
    fd = oracles.central_grad(
        lambda v: observed_loglik(d, Theta.from_vector(v, t.dims)), v0
    )
    an = score(d, t, c)
    assert np.max(np.abs(an - fd)) <= 1e-5 * max(1.0, np.max(np.abs(an)))


def test_score_small_at_tightly_converged_fit():
    d = gen_dataset(CASE_I, 200, np.random.SeedSequence((9, 200, 1)))
    res = fit(d, None, FitOptions(tol=1e-8, grad_tol=1e-6, max_iter=8000))
    assert res.converged
    g = score(d, res.theta_hat, e_step(d, res.theta_hat))
    assert np.max(np.abs(g)) < 1e-5


def test_alpha_score_vanishes_on_mirrored_data():
    # responses mirrored about the location, constant skew column, alpha = 0:
    # the alpha block reduces to a constant times the residual sum, exactly 0
    vals = np.array([0.3, 1.1, 2.4])
    y = np.concatenate([vals, -vals])
    n = y.size
    d = Dataset(y, np.ones((n, 1)), np.ones((n, 1)), np.ones((n, 1)))
    t = Theta([0.0], [0.0], [0.0])
    g = score(d, t, e_step(d, t))
    assert abs(g[-1]) < 1e-12


def test_hessian_symmetry_and_alpha_block():
    d, t_cache, t_eval = make_instance(13)
    c = e_step(d, t_cache)
    H = hessian(d, t_eval, c)
    assert np.max(np.abs(H - H.T)) == 0.0
    # alpha-alpha block: minus weighted Gram matrix of W, negative semidefinite
    r = d.y - d.X @ t_eval.beta
    e2 = np.exp(-(d.Z @ t_eval.gamma))
    expected = -d.W.T @ ((r * r * e2)[:, None] * d.W)
    got = H[4:, 4:]
    assert np.allclose(got, expected, rtol=1e-12, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(got) <= 1e-10)


# ---------------------------------------------------------------------------
# linear solver
# ---------------------------------------------------------------------------

def test_solve_sym_identity():
    x, tau = solve_sym(np.eye(3), np.array([1.0, 0.0, 0.0]))
    assert np.allclose(x, [1.0, 0.0, 0.0])
    assert tau == 0.0


def test_solve_sym_near_singular_repair():
    A = np.diag([1.0, -1e-14])
    x, tau = solve_sym(A, np.array([1.0, 0.0]), ridge0=1e-8)
    assert tau > 0.0
    assert x[0] == pytest.approx(1.0, rel=1e-6)
    assert abs(x[1]) < 1e-6


def test_solve_sym_matches_reference_solver():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((6, 6))
    A = M @ M.T + 6 * np.eye(6)
    b = rng.standard_normal(6)
    x, tau = solve_sym(A, b)
    assert tau == 0.0
    ref = np.linalg.solve(A, b)
    assert np.max(np.abs(x - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_solve_sym_indefinite_gets_large_ridge():
    # strongly indefinite input: escalation succeeds once tau clears |lambda_min|
    x, tau = solve_sym(np.diag([1.0, -1e4]), np.array([1.0, 1.0]), ridge0=1e-8)
    assert tau > 1e4
    assert np.all(np.isfinite(x))


def test_solve_sym_without_ridge_raises():
    with pytest.raises(NumericError):
        solve_sym(np.diag([1.0, -1.0]), np.array([1.0, 1.0]), ridge0=0.0)


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------

def test_m_step_stationary_point_is_fixed():
    # two mirrored rows, location-only model: gradient is exactly zero
    d = Dataset([-1.0, 1.0], [[1.0], [1.0]], np.empty((2, 0)), np.empty((2, 0)))
    t = Theta([0.0], [], [])
    out = m_step(d, t, e_step(d, t))
    assert np.array_equal(out.beta, t.beta)


def test_m_step_one_shot_on_quadratic_surrogate():
    # location-only model: Q is an exact quadratic in beta, so the Newton
    # step lands on the weighted least-squares maximizer
    rng = np.random.default_rng(8)
    n = 12
    X = rng.uniform(-1, 1, (n, 1)) + 1.5
    y = 2.0 * X[:, 0] + rng.standard_normal(n)
    d = Dataset(y, X, np.empty((n, 0)), np.empty((n, 0)))
    t = Theta([0.5], [], [])
    c = e_step(d, t)
    out = m_step(d, t, c)
    b_star = np.sum(c.v_hat * X[:, 0] * y) / np.sum(c.v_hat * X[:, 0] ** 2)
    assert out.beta[0] == pytest.approx(b_star, rel=1e-12)
    again = m_step(d, out, c)
    assert again.beta[0] == pytest.approx(b_star, rel=1e-12)


def test_m_step_stall_warns_and_keeps_theta():
    d = gen_dataset(CASE_II, 60, np.random.SeedSequence((1, 4)))
    rng = np.random.default_rng(4)
    t = Theta(
        rng.standard_normal(3) * 0.3,
        rng.standard_normal(3) * 0.3,
        rng.standard_normal(3) * 0.3,
    )
    c = e_step(d, t)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = m_step(d, t, c, FitOptions(max_halvings=0))
    assert any(issubclass(w.category, FitWarning) for w in caught)
    assert np.array_equal(out.as_vector(), t.as_vector())


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def test_default_init_recovers_exact_linear_fit():
    rng = np.random.default_rng(5)
    n = 40
    X = np.column_stack([np.ones(n), rng.uniform(-1, 1, n)])
    beta = np.array([1.5, -2.0])
    d = Dataset(X @ beta, X, np.ones((n, 1)), np.ones((n, 1)))
    t0 = default_init(d)
    assert np.allclose(t0.beta, beta, atol=1e-10)
    assert np.array_equal(t0.alpha, np.zeros(1))
    # exact fit leaves only the clamp floor for the scale regression
    assert t0.gamma[0] == pytest.approx(np.log(1e-10), rel=1e-6)


def test_default_init_rank_deficient():
    n = 10
    col = np.linspace(0, 1, n)
    d = Dataset(col, np.column_stack([col, col]), np.ones((n, 1)), np.ones((n, 1)))
    with pytest.raises(StructuralError):
        default_init(d)


def test_two_starts_reach_same_optimum():
    d = gen_dataset(CASE_II, 500, np.random.SeedSequence((3, 500, 0)))
    r_default = fit(d)
    r_truth = fit(d, init=CASE_II.truth)
    assert abs(r_default.loglik - r_truth.loglik) < 1e-4


# ---------------------------------------------------------------------------
# full fit
# ---------------------------------------------------------------------------

def test_fit_case_one_estimates_near_truth():
    d = gen_dataset(CASE_I, 200, np.random.SeedSequence((12, 200, 0)))
    res = fit(d)
    assert res.converged
    # single replication: allow three Monte Carlo standard deviations
    assert abs(res.theta_hat.beta[1] - (-1.0)) < 3 * np.sqrt(0.0109) + 0.02
    trace = np.array(res.loglik_trace)
    assert np.all(np.diff(trace) >= -1e-10)
    assert res.loglik == pytest.approx(observed_loglik(d, res.theta_hat), abs=1e-9)


def test_fit_zero_skew_constant_column_consistency():
    rng = np.random.default_rng(42)
    n = 1000
    X = np.column_stack([np.ones(n), rng.uniform(-1, 1, n)])
    Z = np.column_stack([np.ones(n), rng.uniform(-1, 1, n)])
    W = np.ones((n, 1))
    mu = X @ np.array([0.5, 1.0])
    sigma = np.exp(0.5 * (Z @ np.array([0.2, -0.5])))
    from slnreg import sample_standard

    y = mu + sigma * sample_standard(np.zeros(n), rng)
    res = fit(Dataset(y, X, Z, W))
    assert res.converged
    assert abs(res.theta_hat.alpha[0]) < 0.2


def test_fit_underdetermined_raises():
    d = Dataset(
        [1.0, 2.0],
        np.array([[1.0, 0.2, 0.3], [1.0, -0.1, 0.6]]),
        np.ones((2, 1)),
        np.ones((2, 1)),
    )
    with pytest.raises(StructuralError):
        fit(d)


def test_fit_permutation_invariance():
    opts = FitOptions(tol=1e-9, grad_tol=1e-5, max_iter=5000)
    d = gen_dataset(CASE_II, 100, np.random.SeedSequence((2, 100, 0)))
    perm = np.random.default_rng(3).permutation(d.n)
    d_perm = Dataset(d.y[perm], d.X[perm], d.Z[perm], d.W[perm])
    res_a = fit(d, None, opts)
    res_b = fit(d_perm, None, opts)
    assert res_a.converged and res_b.converged
    diff = np.max(np.abs(res_a.theta_hat.as_vector() - res_b.theta_hat.as_vector()))
    assert diff < 1e-7
    assert abs(res_a.loglik - res_b.loglik) < 1e-8


def test_fit_self_consistency_after_convergence():
    opts = FitOptions()
    d = gen_dataset(CASE_I, 200, np.random.SeedSequence((9, 200, 1)))
    res = fit(d, None, opts)
    assert res.converged
    c = e_step(d, res.theta_hat, opts.clamp_eps)
    moved = m_step(d, res.theta_hat, c, opts)
    assert np.max(np.abs(moved.as_vector() - res.theta_hat.as_vector())) < 10 * opts.tol
    assert np.max(np.abs(score(d, res.theta_hat, c))) < opts.grad_tol


def test_fit_non_convergence_is_flagged():
    d = gen_dataset(CASE_I, 50, np.random.SeedSequence((77, 50, 0)))
    res = fit(d, None, FitOptions(max_iter=3))
    assert not res.converged
    assert any("did not converge" in w for w in res.warnings)


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(tol=0.0)
    with pytest.raises(ValueError):
        FitOptions(max_iter=0)
    with pytest.raises(ValueError):
        FitOptions(ridge0=-1.0)
