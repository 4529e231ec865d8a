"""Shared builders for synthetic model instances."""

from __future__ import annotations

import numpy as np

from slnreg import Dataset, Theta, sample_standard


def random_design(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Intercept column plus U(-1, 1) covariates."""
    return np.column_stack([np.ones(n), rng.uniform(-1.0, 1.0, size=(n, k - 1))])


def make_instance(seed: int, n: int = 30, p: int = 2, q: int = 2, r: int = 2):
    """Dataset with SLN responses plus two independent coefficient draws.

    Returns (dataset, theta_cache, theta_eval): the first coefficient draw
    generates the data, ``theta_cache`` is where an E-step cache would be
    computed, and ``theta_eval`` is a separate point for derivative checks.
    All coordinates are standard normal draws.
    """
    rng = np.random.default_rng(seed)
    X = random_design(rng, n, p)
    Z = random_design(rng, n, q)
    W = random_design(rng, n, r)
    t_data = Theta(
        rng.standard_normal(p), rng.standard_normal(q), rng.standard_normal(r)
    )
    mu = X @ t_data.beta
    sigma = np.exp(0.5 * (Z @ t_data.gamma))
    lam = W @ t_data.alpha
    y = mu + sigma * sample_standard(lam, rng)
    d = Dataset(y, X, Z, W)
    t_cache = Theta(
        rng.standard_normal(p), rng.standard_normal(q), rng.standard_normal(r)
    )
    t_eval = Theta(
        rng.standard_normal(p), rng.standard_normal(q), rng.standard_normal(r)
    )
    return d, t_cache, t_eval
