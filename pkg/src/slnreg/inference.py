"""Model-selection criteria and bootstrap standard errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .em import FitOptions, fit
from .exceptions import InferenceError, NumericError, StructuralError
from .model import Dataset


@dataclass(frozen=True)
class CriteriaReport:
    """Penalized-likelihood criteria, all of the form -2*loglik + m*c_n."""

    loglik: float
    m: int
    n: int
    aic: float
    bic: float
    edc: float


@dataclass(frozen=True)
class BootstrapReport:
    """Componentwise standard deviations over converged resample fits."""

    B: int
    se: np.ndarray
    n_failed: int


def info_criteria(loglik: float, m: int, n: int) -> CriteriaReport:
    """AIC, BIC, and EDC with penalties 2, log(n), and 0.2*sqrt(n)."""
    if n < 1 or m < 1:
        raise ValueError("m and n must be at least 1")
    neg2 = -2.0 * loglik
    return CriteriaReport(
        loglik=loglik,
        m=m,
        n=n,
        aic=neg2 + 2.0 * m,
        bic=neg2 + m * np.log(n),
        edc=neg2 + m * 0.2 * np.sqrt(n),
    )


def bootstrap_se(
    d: Dataset,
    opts: FitOptions = FitOptions(),
    B: int = 500,
    seed: int = 0,
) -> BootstrapReport:
    """Nonparametric (paired) bootstrap standard errors of the coefficients.

    Draws B resamples of whole rows with replacement, refits each starting
    from the full-data estimate, and returns the coefficientwise standard
    deviation over the converged resamples.  Resample i uses the stream
    seeded by SeedSequence((seed, i)), so results are independent of
    evaluation order.  Raises InferenceError if fewer than two resamples
    produce a converged fit.
    """
    if B < 2:
        raise ValueError("B must be at least 2")
    full = fit(d, None, opts)
    n = d.n
    estimates = []
    n_failed = 0
    for i in range(B):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        idx = rng.integers(0, n, size=n)
        d_i = Dataset(d.y[idx], d.X[idx], d.Z[idx], d.W[idx])
        try:
            res = fit(d_i, init=full.theta_hat, opts=opts)
        except (StructuralError, NumericError):
            n_failed += 1
            continue
        if res.converged:
            estimates.append(res.theta_hat.as_vector())
        else:
            n_failed += 1
    if len(estimates) < 2:
        raise InferenceError(
            f"only {len(estimates)} of {B} bootstrap resamples converged"
        )
    se = np.std(np.vstack(estimates), axis=0, ddof=1)
    return BootstrapReport(B=B, se=se, n_failed=n_failed)
