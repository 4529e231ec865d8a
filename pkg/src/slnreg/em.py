"""EM fitting of the joint location-scale-skewness SLN model.

The E-step evaluates the closed-form conditional expectations of the latent
mixing and half-normal variables; the M-step takes one ridge-safeguarded
Newton step on the resulting surrogate objective Q, with step halving against
the observed log-likelihood so the overall map is monotone ascent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import FitWarning, NumericError, StructuralError
from .model import Dataset, Theta, observed_loglik, validate
from .sln import RESIDUAL_CLAMP, inv_mills

#: Per-step tolerance for accepting a candidate in the halving safeguard.
ASCENT_SLACK = 1e-12


@dataclass(frozen=True)
class EStepCache:
    """Per-observation conditional expectations at the current estimate.

    ``v_hat`` is E(V^2 | y) (the reweighting factor for absolute residuals),
    ``u1_hat``/``u2_hat`` the first two moments of the truncated-normal
    latent, and ``kappa_hat`` the standardized skew residual
    (w'alpha)(y - x'beta) exp(-z'gamma/2).
    """

    v_hat: np.ndarray
    u1_hat: np.ndarray
    u2_hat: np.ndarray
    kappa_hat: np.ndarray


@dataclass(frozen=True)
class FitOptions:
    """Knobs of the EM loop; defaults match the reference protocol."""

    tol: float = 1e-6
    max_iter: int = 1000
    max_halvings: int = 30
    ridge0: float = 1e-8
    clamp_eps: float = RESIDUAL_CLAMP
    #: Extra stationarity gate: iteration also continues until the observed
    #: score is this small, so converged fits are genuine fixed points.
    grad_tol: float = 1e-4

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.ridge0 < 0:
            raise ValueError("ridge0 must be nonnegative")


@dataclass
class FitResult:
    """Converged estimates plus the fitting trace."""

    theta_hat: Theta
    loglik: float
    n_iter: int
    converged: bool
    loglik_trace: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _predict_parts(d: Dataset, t: Theta):
    """Shared per-row quantities: residual, exp(-z'g/2), exp(-z'g), w'a."""
    r = d.y - d.X @ t.beta
    e1 = np.exp(-0.5 * (d.Z @ t.gamma))
    a = d.W @ t.alpha
    return r, e1, e1 * e1, a


def e_step(d: Dataset, t: Theta, clamp_eps: float = RESIDUAL_CLAMP) -> EStepCache:
    """Conditional expectations of the latent variables given the data.

    v_hat_i = exp(z'gamma/2) / max(|y - x'beta|, clamp_eps * exp(z'gamma/2)),
    kappa_hat_i = (w'alpha)(y - x'beta) exp(-z'gamma/2),
    u1_hat_i = kappa_hat + inv_mills(kappa_hat),  u2_hat_i = 1 + kappa*u1.
    """
    r, e1, _, a = _predict_parts(d, t)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(e1)) and np.all(np.isfinite(a))):
        raise NumericError("non-finite linear predictors in E-step")
    sigma = 1.0 / e1
    v_hat = sigma / np.maximum(np.abs(r), clamp_eps * sigma)
    kappa = a * r * e1
    u1 = kappa + inv_mills(kappa)
    u2 = 1.0 + kappa * u1
    return EStepCache(v_hat=v_hat, u1_hat=u1, u2_hat=u2, kappa_hat=kappa)


def q_value(d: Dataset, t: Theta, c: EStepCache) -> float:
    """Surrogate objective Q(theta; theta_hat) for a fixed E-step cache.

    Includes the -log(pi) constant so values are comparable across calls.
    """
    r, e1, e2, a = _predict_parts(d, t)
    quad = (
        r * r * e2 * c.v_hat
        + c.u2_hat
        - 2.0 * a * r * e1 * c.u1_hat
        + a * a * r * r * e2
    )
    return float(np.sum(-np.log(np.pi) - 0.5 * (d.Z @ t.gamma) - 0.5 * quad))


def score(d: Dataset, t: Theta, c: EStepCache) -> np.ndarray:
    """Gradient of Q with respect to (beta, gamma, alpha), stacked.

    When the cache was computed at ``t`` itself this equals the gradient of
    the observed log-likelihood (with the clamped residual weight), which is
    what the convergence gate monitors.
    """
    r, e1, e2, a = _predict_parts(d, t)
    va = c.v_hat + a * a
    g_beta = d.X.T @ (r * e2 * va - a * e1 * c.u1_hat)
    g_gamma = d.Z.T @ (-0.5 + 0.5 * r * r * e2 * va - 0.5 * a * r * e1 * c.u1_hat)
    g_alpha = d.W.T @ (r * e1 * c.u1_hat - a * r * r * e2)
    return np.concatenate([g_beta, g_gamma, g_alpha])


def hessian(d: Dataset, t: Theta, c: EStepCache) -> np.ndarray:
    """Second-derivative matrix of Q, symmetric by construction."""
    r, e1, e2, a = _predict_parts(d, t)
    va = c.v_hat + a * a
    r2 = r * r
    X, Z, W = d.X, d.Z, d.W

    h_bb = X.T @ ((-e2 * va)[:, None] * X)
    h_bg = X.T @ ((-r * e2 * va + 0.5 * a * e1 * c.u1_hat)[:, None] * Z)
    h_ba = X.T @ ((-e1 * c.u1_hat + 2.0 * a * r * e2)[:, None] * W)
    h_gg = Z.T @ ((-0.5 * r2 * e2 * va + 0.25 * a * r * e1 * c.u1_hat)[:, None] * Z)
    h_ga = Z.T @ ((-0.5 * r * e1 * c.u1_hat + a * r2 * e2)[:, None] * W)
    h_aa = W.T @ ((-r2 * e2)[:, None] * W)

    H = np.block(
        [
            [h_bb, h_bg, h_ba],
            [h_bg.T, h_gg, h_ga],
            [h_ba.T, h_ga.T, h_aa],
        ]
    )
    return (H + H.T) / 2.0


def solve_sym(A: np.ndarray, b: np.ndarray, ridge0: float = 1e-8):
    """Solve (A + tau*I) x = b with the smallest ridge tau that factors.

    tau starts at 0 and escalates through ridge0, 10*ridge0, ... until the
    Cholesky factorization succeeds (all pivots positive).  Returns
    ``(x, tau)``; raises NumericError once tau exceeds 1e6 * ||A||.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    norm = float(np.linalg.norm(A, np.inf))
    tau = 0.0
    eye = np.eye(A.shape[0])
    while True:
        try:
            cf = scipy.linalg.cho_factor(A + tau * eye, lower=True)
            return scipy.linalg.cho_solve(cf, b), tau
        except scipy.linalg.LinAlgError:
            tau = ridge0 if tau == 0.0 else 10.0 * tau
            if tau == 0.0 or tau > 1e6 * max(norm, 1.0):
                raise NumericError(
                    f"symmetric solve failed even with ridge {tau:g}"
                ) from None


def m_step(d: Dataset, t: Theta, c: EStepCache, opts: FitOptions = FitOptions()) -> Theta:
    """One safeguarded Newton update of the surrogate objective.

    The candidate is t + (-H)^{-1} G with the ridge-protected solve; the
    step is halved (up to ``opts.max_halvings`` times) until both the
    surrogate Q and the observed log-likelihood are non-decreasing up to the
    accepted slack.  With the cache computed at ``t`` the ridge direction
    ascends Q for a small enough step, and Q-ascent carries over to the
    observed log-likelihood, so halving terminates away from stationarity.
    If every candidate fails, the current estimate is kept (FitWarning).
    """
    G = score(d, t, c)
    H = hessian(d, t, c)
    step, _ = solve_sym(-H, G, opts.ridge0)
    ll_old = observed_loglik(d, t)
    q_old = q_value(d, t, c)
    base = t.as_vector()
    for k in range(opts.max_halvings + 1):
        cand = Theta.from_vector(base + step * 0.5**k, t.dims)
        if (
            q_value(d, cand, c) >= q_old - ASCENT_SLACK
            and observed_loglik(d, cand) >= ll_old - ASCENT_SLACK
        ):
            return cand
    warnings.warn(
        "step halving exhausted without improving the log-likelihood; "
        "keeping current estimates",
        FitWarning,
        stacklevel=2,
    )
    return t


def default_init(d: Dataset) -> Theta:
    """Data-driven starting point.

    beta from least squares of y on X; gamma from least squares of
    log(max(residual^2, 1e-10)) on Z; alpha at zero.
    """
    p, q, r = d.dims
    beta, _, rank_x, _ = np.linalg.lstsq(d.X, d.y, rcond=None)
    if rank_x < p:
        raise StructuralError("X rank-deficient; cannot initialize location")
    resid = d.y - d.X @ beta
    log_r2 = np.log(np.maximum(resid * resid, 1e-10))
    gamma, _, rank_z, _ = np.linalg.lstsq(d.Z, log_r2, rcond=None)
    if rank_z < q:
        raise StructuralError("Z rank-deficient; cannot initialize scale")
    return Theta(beta, gamma, np.zeros(r))


def fit(
    d: Dataset,
    init: Theta | None = None,
    opts: FitOptions = FitOptions(),
) -> FitResult:
    """Maximum-likelihood fit by alternating E and M steps.

    Iterates until both the log-likelihood and coefficient changes fall
    below ``opts.tol`` and the observed score is below ``opts.grad_tol``,
    or ``opts.max_iter`` is reached.  The trace of observed log-likelihoods
    is nondecreasing up to the safeguard slack.
    """
    violations = validate(d)
    if violations:
        raise StructuralError("; ".join(violations))
    theta = default_init(d) if init is None else init
    if theta.dims != d.dims:
        raise StructuralError(
            f"initial coefficients {theta.dims} do not match design {d.dims}"
        )

    ll = observed_loglik(d, theta)
    if not np.isfinite(ll):
        raise NumericError("log-likelihood not finite at the starting point")
    trace = [ll]
    notes: list[str] = []
    converged = False
    n_steps = 0
    d_ll = np.inf
    d_theta = np.inf
    for it in range(1, opts.max_iter + 1):
        try:
            cache = e_step(d, theta, opts.clamp_eps)
            grad = score(d, theta, cache)
            if (
                max(d_ll, d_theta) < opts.tol
                and np.max(np.abs(grad)) < opts.grad_tol
            ):
                converged = True
                break
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", FitWarning)
                theta_new = m_step(d, theta, cache, opts)
            notes.extend(str(w.message) for w in caught)
            ll_new = observed_loglik(d, theta_new)
        except NumericError as err:
            raise NumericError(f"iteration {it}: {err}") from err
        d_ll = abs(ll_new - ll)
        d_theta = float(np.max(np.abs(theta_new.as_vector() - theta.as_vector())))
        theta, ll = theta_new, ll_new
        trace.append(ll)
        n_steps = it
    if not converged:
        notes.append(f"did not converge in {opts.max_iter} iterations")
    return FitResult(
        theta_hat=theta,
        loglik=ll,
        n_iter=n_steps,
        converged=converged,
        loglik_trace=trace,
        warnings=notes,
    )
