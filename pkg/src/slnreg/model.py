"""Joint location-scale-skewness regression model and its log-likelihood.

Each response y_i follows SLN(mu_i, sigma_i^2, lam_i) with three linear
predictors over separate (possibly shared) design matrices:

    mu_i        = x_i' beta
    log sigma_i^2 = z_i' gamma
    lam_i       = w_i' alpha
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

from .exceptions import NumericError, StructuralError

#: Relative singular-value cutoff for the numerical rank of a design matrix.
RANK_RTOL = 1e-10


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise StructuralError(f"design matrix must be 2-D, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Dataset:
    """Responses plus the three design matrices.

    ``X`` drives location, ``Z`` the log scale, ``W`` the skewness.  The
    matrices may share or duplicate columns; intercepts are ordinary columns
    of ones supplied by the caller.
    """

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    W: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        object.__setattr__(self, "X", _as_matrix(self.X))
        object.__setattr__(self, "Z", _as_matrix(self.Z))
        object.__setattr__(self, "W", _as_matrix(self.W))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.X.shape[1], self.Z.shape[1], self.W.shape[1]


@dataclass(frozen=True)
class Theta:
    """Stacked coefficient vectors of the three linear predictors."""

    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).ravel())
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).ravel())
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float).ravel())
        if not all(
            np.all(np.isfinite(v)) for v in (self.beta, self.gamma, self.alpha)
        ):
            raise ValueError("coefficients must be finite")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.beta.size, self.gamma.size, self.alpha.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma, self.alpha])

    @classmethod
    def from_vector(cls, v, dims: tuple[int, int, int]) -> "Theta":
        v = np.asarray(v, dtype=float).ravel()
        p, q, r = dims
        if v.size != p + q + r:
            raise StructuralError(f"expected {p + q + r} coefficients, got {v.size}")
        return cls(v[:p], v[p : p + q], v[p + q :])


@dataclass(frozen=True)
class LinPreds:
    """Per-observation linear predictors: mu_i, log sigma_i^2, lam_i."""

    mu: np.ndarray
    log_sigma2: np.ndarray
    lam: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(0.5 * self.log_sigma2)


def _check_dims(d: Dataset, t: Theta) -> None:
    if d.dims != t.dims:
        raise StructuralError(
            f"coefficient dimensions {t.dims} do not match design {d.dims}"
        )


def linear_predictors(d: Dataset, t: Theta) -> LinPreds:
    """Evaluate the three linear predictors for every observation."""
    _check_dims(d, t)
    return LinPreds(d.X @ t.beta, d.Z @ t.gamma, d.W @ t.alpha)


def observed_loglik(d: Dataset, t: Theta) -> float:
    """Observed-data log-likelihood of the joint model.

    Computed as -(1/2) sum z'gamma - sum |y - x'beta| exp(-z'gamma/2)
    + sum log Phi(kappa) with kappa = (w'alpha)(y - x'beta) exp(-z'gamma/2);
    equals the rowwise sum of SLN log densities.  Overflowing candidates
    (absurd gamma during line searches) evaluate to -inf rather than raising;
    a NaN from finite inputs raises NumericError naming the first bad row.
    """
    _check_dims(d, t)
    lp = linear_predictors(d, t)
    resid = d.y - lp.mu
    with np.errstate(over="ignore", invalid="ignore"):
        e1 = np.exp(-0.5 * lp.log_sigma2)
        # 0 * inf guards: a zero residual contributes 0 and kappa = 0
        # regardless of the scale factor.
        abs_term = np.where(resid == 0.0, 0.0, np.abs(resid) * e1)
        kappa = np.where(resid == 0.0, 0.0, lp.lam * resid * e1)
        rows = -0.5 * lp.log_sigma2 - abs_term + log_ndtr(kappa)
    if np.isnan(rows).any():
        i = int(np.flatnonzero(np.isnan(rows))[0])
        raise NumericError(f"log-likelihood is NaN at row {i}")
    return float(np.sum(rows))


def validate(d: Dataset) -> list[str]:
    """Diagnostic check of a dataset; returns a list of violations (empty = ok).

    Reports non-finite entries (with the offending row), row-count
    mismatches, too few rows, and numerical rank deficiency of any design
    matrix at relative tolerance RANK_RTOL.
    """
    violations: list[str] = []
    n = d.n
    for name, arr in (("y", d.y), ("X", d.X), ("Z", d.Z), ("W", d.W)):
        bad = ~np.isfinite(arr)
        if bad.any():
            row = int(np.argwhere(bad)[0][0])
            violations.append(f"{name} contains a non-finite value at row {row}")
    for name, arr in (("X", d.X), ("Z", d.Z), ("W", d.W)):
        if arr.shape[0] != n:
            violations.append(
                f"{name} has {arr.shape[0]} rows but y has {n}"
            )
            continue
        k = arr.shape[1]
        if n < k:
            violations.append(f"{name} has more columns ({k}) than rows ({n})")
            continue
        if not np.all(np.isfinite(arr)):
            continue  # rank is meaningless with non-finite entries
        sv = np.linalg.svd(arr, compute_uv=False)
        if sv.size == 0 or sv[0] == 0.0 or np.sum(sv > RANK_RTOL * sv[0]) < k:
            violations.append(f"{name} rank-deficient")
    return violations
