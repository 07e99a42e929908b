"""Finite birth-death models with state-dependent Bernoulli thinning.

A model lives on states {0, ..., J}. Births occur at rate lambda_i and
deaths at rate mu_i, with the boundary conventions lambda_J = 0 and
mu_0 = 0 stored explicitly so every formula can index the full range
uniformly. Each transition out of pre-jump state i is retained in the
counted stream with probability q_plus[i] (births) or q_minus[i]
(deaths). This module owns model validation, the stationary
distribution, and the long-run event rates that everything else
consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    AllThinningZero,
    BoundaryRateNonzero,
    InternalIdentityViolated,
    NonPositiveInteriorRate,
    NumericOverflow,
    ProbabilityOutOfRange,
)

__all__ = [
    "BDModel",
    "StationarySummary",
    "validate",
    "stationary_distribution",
    "rates_and_cdfs",
    "model_from_dict",
    "model_from_json",
    "model_to_dict",
    "model_to_json",
    "with_thinning",
]

_RESCALE_LIMIT = 1e280


def _vector(x, J: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (J + 1,):
        raise ValueError(f"{name} must have length J+1 = {J + 1}, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BDModel:
    """Birth-death rates plus per-state, per-direction thinning probabilities.

    All four vectors have length J+1 and are stored read-only.
    """

    J: int
    lam: np.ndarray
    mu: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray

    def __post_init__(self):
        if not isinstance(self.J, (int, np.integer)) or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        object.__setattr__(self, "J", int(self.J))
        for name in ("lam", "mu", "q_plus", "q_minus"):
            object.__setattr__(self, name, _vector(getattr(self, name), self.J, name))

    def scaled(self, c: float) -> "BDModel":
        """Model with all rates multiplied by c (thinning unchanged)."""
        return replace(self, lam=self.lam * c, mu=self.mu * c)


@dataclass(frozen=True)
class StationarySummary:
    """Stationary distribution and long-run rates of a validated model.

    pi                stationary probabilities, length J+1
    P                 cumulative distribution of pi
    raw_rate          long-run rate of all births plus deaths
    thinned_rate      long-run rate of retained events
    partial_rates     retained-event rate restricted to pre-jump states <= k
    Lambda            partial_rates / thinned_rate (a CDF like P)
    counted_fraction  thinned_rate / raw_rate
    """

    pi: np.ndarray
    P: np.ndarray
    raw_rate: float
    thinned_rate: float
    partial_rates: np.ndarray
    Lambda: np.ndarray
    counted_fraction: float


def validate(model: BDModel) -> None:
    """Raise a ModelValidationError subclass if any model invariant fails."""
    J, lam, mu = model.J, model.lam, model.mu
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
        raise NonPositiveInteriorRate("rates must be finite")
    if lam[J] != 0.0:
        raise BoundaryRateNonzero(f"lambda[{J}] must be 0, got {lam[J]}")
    if mu[0] != 0.0:
        raise BoundaryRateNonzero(f"mu[0] must be 0, got {mu[0]}")
    if np.any(lam[:J] <= 0.0):
        bad = int(np.argmax(lam[:J] <= 0.0))
        raise NonPositiveInteriorRate(f"lambda[{bad}] = {lam[bad]} must be > 0 for i < J")
    if np.any(mu[1:] <= 0.0):
        bad = 1 + int(np.argmax(mu[1:] <= 0.0))
        raise NonPositiveInteriorRate(f"mu[{bad}] = {mu[bad]} must be > 0 for i >= 1")
    for name, q in (("q_plus", model.q_plus), ("q_minus", model.q_minus)):
        if not np.all(np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
            raise ProbabilityOutOfRange(f"{name} entries must lie in [0, 1]")
    if model.q_minus[0] != 0.0:
        raise ProbabilityOutOfRange(f"q_minus[0] must be 0, got {model.q_minus[0]}")
    if model.q_plus[J] != 0.0:
        raise ProbabilityOutOfRange(f"q_plus[{J}] must be 0, got {model.q_plus[J]}")
    if not (np.any(model.q_plus > 0.0) or np.any(model.q_minus > 0.0)):
        raise AllThinningZero("at least one thinning probability must be positive")


def stationary_distribution(model: BDModel) -> tuple[np.ndarray, np.ndarray]:
    """Stationary probabilities pi and their cumulative sums P.

    Uses the forward recurrence rho_0 = 1, rho_i = rho_{i-1} * lambda_{i-1}/mu_i,
    renormalizing by the running maximum whenever the values leave the
    comfortable double range, so products over long, skewed chains never
    overflow or underflow before the final normalization.
    """
    validate(model)
    J, lam, mu = model.J, model.lam, model.mu
    rho = np.empty(J + 1)
    rho[0] = 1.0
    running_max = 1.0
    for i in range(1, J + 1):
        rho[i] = rho[i - 1] * (lam[i - 1] / mu[i])
        if not np.isfinite(rho[i]):
            raise NumericOverflow(f"rate ratio at state {i} is not representable")
        if rho[i] > running_max:
            running_max = rho[i]
            if running_max > _RESCALE_LIMIT:
                rho[: i + 1] /= running_max
                running_max = 1.0
    total = rho.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericOverflow("normalizing constant is not representable")
    pi = rho / total
    P = np.cumsum(pi)
    P[J] = 1.0
    return pi, P


def rates_and_cdfs(model: BDModel) -> StationarySummary:
    """All long-run rate quantities of a validated model.

    The retained-event rate is computed from both of its equivalent
    expressions (summing over retained births and deaths directly, and
    folding deaths onto births via the balance relation); the two must
    agree to 1e-12 relative or an internal error is raised.
    """
    pi, P = stationary_distribution(model)
    J, lam, mu = model.J, model.lam, model.mu
    qp, qm = model.q_plus, model.q_minus

    raw_rate = 2.0 * float(np.sum(pi * lam))
    increments = pi * lam * qp + pi * mu * qm
    partial_rates = np.cumsum(increments)
    thinned_rate = float(partial_rates[J])
    folded = float(np.sum(pi[:J] * lam[:J] * (qp[:J] + qm[1:])))
    if abs(folded - thinned_rate) > 1e-12 * max(thinned_rate, folded):
        raise InternalIdentityViolated(
            f"retained-rate forms disagree: {thinned_rate!r} vs {folded!r}"
        )
    Lambda = partial_rates / thinned_rate
    return StationarySummary(
        pi=pi,
        P=P,
        raw_rate=raw_rate,
        thinned_rate=thinned_rate,
        partial_rates=partial_rates,
        Lambda=Lambda,
        counted_fraction=thinned_rate / raw_rate,
    )


def with_thinning(model: BDModel, q_plus, q_minus) -> BDModel:
    """Copy of model with replaced thinning vectors (revalidated by use)."""
    return replace(
        model,
        q_plus=np.asarray(q_plus, dtype=float),
        q_minus=np.asarray(q_minus, dtype=float),
    )


def model_from_dict(obj: dict) -> BDModel:
    """Build and validate a model from its JSON object form.

    Expected keys: integer "J" and arrays "lambda", "mu", "q_plus",
    "q_minus", each of length J+1.
    """
    try:
        J = obj["J"]
        model = BDModel(
            J=J,
            lam=obj["lambda"],
            mu=obj["mu"],
            q_plus=obj["q_plus"],
            q_minus=obj["q_minus"],
        )
    except KeyError as exc:
        raise ValueError(f"model object is missing required key {exc}") from exc
    validate(model)
    return model


def model_from_json(text: str) -> BDModel:
    return model_from_dict(json.loads(text))


def model_to_dict(model: BDModel) -> dict:
    return {
        "J": model.J,
        "lambda": model.lam.tolist(),
        "mu": model.mu.tolist(),
        "q_plus": model.q_plus.tolist(),
        "q_minus": model.q_minus.tolist(),
    }


def model_to_json(model: BDModel) -> str:
    return json.dumps(model_to_dict(model))
