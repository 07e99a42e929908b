"""Random model generation for cross-validation sweeps and tests."""

from __future__ import annotations

import numpy as np

from .core import BDModel, validate

__all__ = ["random_model", "random_rates"]

# Excursion caps for the stationary log-weight walk of generated
# models. An upward excursion of u means first-passage times (and the
# explicit inverse entries) reach e^u, whose float rounding then
# swamps identity checks at the 1e-9 scale, so generated chains may
# climb at most e^5.5 above their running minimum and fall at most e^30
# below their running maximum. Within those caps, rates remain
# log-uniform over the feasible part of the requested range.
_BAND_UP = 5.5
_BAND_DOWN = 30.0


def random_rates(rng: np.random.Generator, J: int, low: float = 0.1,
                 high: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Log-uniform interior rates whose stationary skew stays bounded.

    Death rates are drawn log-uniformly from [low, high]; each birth
    rate is drawn log-uniformly from the subinterval that keeps the
    stationary log-weight walk within the module band (the subinterval
    is never empty because it always brackets the paired death rate).
    """
    log_low, log_high = np.log(low), np.log(high)
    mu = np.exp(rng.uniform(log_low, log_high, J + 1))
    mu[0] = 0.0
    lam = np.zeros(J + 1)
    walk = 0.0
    walk_min = 0.0
    walk_max = 0.0
    for i in range(1, J + 1):
        log_mu = np.log(mu[i])
        lo = max(log_low, log_mu + (walk_max - _BAND_DOWN) - walk)
        hi = min(log_high, log_mu + (walk_min + _BAND_UP) - walk)
        log_lam = rng.uniform(lo, hi)
        lam[i - 1] = np.exp(log_lam)
        walk += log_lam - log_mu
        walk_min = min(walk_min, walk)
        walk_max = max(walk_max, walk)
    lam[J] = 0.0
    return lam, mu


def random_model(rng: np.random.Generator, J: int | None = None, low: float = 0.1,
                 high: float = 10.0, max_J: int = 50) -> BDModel:
    """A random valid model with a mix of zero, one, and interior thinning."""
    if J is None:
        J = int(rng.integers(1, max_J + 1))
    lam, mu = random_rates(rng, J, low, high)

    def thinning():
        q = rng.uniform(0.0, 1.0, J + 1)
        kind = rng.random(J + 1)
        q[kind < 0.3] = 0.0
        q[kind > 0.8] = 1.0
        return q

    qp, qm = thinning(), thinning()
    qp[J] = 0.0
    qm[0] = 0.0
    if not (np.any(qp > 0.0) or np.any(qm > 0.0)):
        qm[J] = 1.0
    model = BDModel(J=J, lam=lam, mu=mu, q_plus=qp, q_minus=qm)
    validate(model)
    return model
