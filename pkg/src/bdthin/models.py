"""Named example systems, finite and countable-state.

Each constructor validates its parameters and returns a ready model;
the registry at the bottom makes every system addressable by name from
the command line (`--model NAME --param k=v ...`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import BDModel, validate
from .dispersion import InfiniteBDModel
from .errors import ParamOutOfRange

__all__ = [
    "mmsk_reneging",
    "billabong",
    "mm1k",
    "mm1_busy_cycle",
    "mms_output",
    "mm1_two_sided",
    "ModelSpec",
    "MODEL_REGISTRY",
    "build_named_model",
]

AnyModel = Union[BDModel, InfiniteBDModel]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParamOutOfRange(message)


def mmsk_reneging(K: int, s: int, lam: float, mu: float, gamma: float) -> BDModel:
    """Many-server queue with a finite buffer and impatient customers.

    States count customers present. Service completions (rate
    mu*min(i,s)) are the retained deaths; abandonments (rate
    gamma*max(i-s,0)) are deaths that go uncounted, giving
    q_i- = mu*min(i,s) / mu_i. Arrivals are never counted.
    """
    _require(K >= 1 and int(K) == K, f"K must be a positive integer, got {K}")
    _require(1 <= s <= K and int(s) == s, f"s must satisfy 1 <= s <= K, got {s}")
    _require(lam > 0, f"lambda must be positive, got {lam}")
    _require(mu > 0, f"mu must be positive, got {mu}")
    _require(gamma >= 0, f"gamma must be nonnegative, got {gamma}")
    K, s = int(K), int(s)
    i = np.arange(K + 1)
    lam_vec = np.where(i < K, float(lam), 0.0)
    served = mu * np.minimum(i, s)
    mu_vec = served + gamma * np.maximum(i - s, 0)
    with np.errstate(invalid="ignore"):
        qm = np.where(i >= 1, served / np.where(mu_vec > 0, mu_vec, 1.0), 0.0)
    model = BDModel(J=K, lam=lam_vec, mu=mu_vec, q_plus=np.zeros(K + 1), q_minus=qm)
    validate(model)
    return model


def billabong(J: int, lam: float, mu: float) -> BDModel:
    """Finite population visiting an unlimited-service meeting point.

    State i of J individuals are present; the rest arrive at rate
    (J-i)*lam each epoch and leave independently at rate i*mu. An
    arrival finding i others present triggers a counted interaction
    with probability i/(i+1); departures are never counted.
    """
    _require(J >= 1 and int(J) == J, f"J must be a positive integer, got {J}")
    _require(lam > 0, f"lambda must be positive, got {lam}")
    _require(mu > 0, f"mu must be positive, got {mu}")
    J = int(J)
    i = np.arange(J + 1)
    qp = i / (i + 1.0)
    qp[J] = 0.0
    model = BDModel(
        J=J,
        lam=(J - i) * float(lam),
        mu=i * float(mu),
        q_plus=qp,
        q_minus=np.zeros(J + 1),
    )
    validate(model)
    return model


def mm1k(K: int, lam: float, mu: float) -> BDModel:
    """Single-server queue with buffer K, counting every departure."""
    _require(K >= 1 and int(K) == K, f"K must be a positive integer, got {K}")
    _require(lam > 0, f"lambda must be positive, got {lam}")
    _require(mu > 0, f"mu must be positive, got {mu}")
    K = int(K)
    i = np.arange(K + 1)
    qm = np.where(i >= 1, 1.0, 0.0)
    model = BDModel(
        J=K,
        lam=np.where(i < K, float(lam), 0.0),
        mu=np.where(i >= 1, float(mu), 0.0),
        q_plus=np.zeros(K + 1),
        q_minus=qm,
    )
    validate(model)
    return model


def mm1_busy_cycle(rho: float) -> InfiniteBDModel:
    """Single-server queue counting only the transitions 1 -> 0.

    The retained stream is then the renewal process of busy-cycle
    completions. Time is scaled so the service rate is 1.
    """
    _require(0 < rho < 1, f"rho must lie in (0, 1), got {rho}")
    rho = float(rho)

    def rate_fn(i: int):
        return (rho, 0.0 if i == 0 else 1.0, 0.0, 1.0 if i == 1 else 0.0)

    return InfiniteBDModel(rate_fn=rate_fn, tail_ratio_hint=rho)


def mms_output(s: int, rho: float, q: float) -> InfiniteBDModel:
    """Stable many-server queue counting each departure with probability q.

    Time is scaled so the per-server service rate is 1; arrivals run at
    rho*s. The retained stream is a (thinned) Poisson process, so the
    dispersion index is exactly 1 for any q.
    """
    _require(int(s) == s and s >= 1, f"s must be a positive integer, got {s}")
    _require(0 < rho < 1, f"rho must lie in (0, 1), got {rho}")
    _require(0 < q <= 1, f"q must lie in (0, 1], got {q}")
    s, rho, q = int(s), float(rho), float(q)

    def rate_fn(i: int):
        return (rho * s, float(min(i, s)), 0.0, q if i >= 1 else 0.0)

    return InfiniteBDModel(rate_fn=rate_fn, tail_ratio_hint=rho)


def mm1_two_sided(rho: float, q_plus: float, q_minus: float) -> InfiniteBDModel:
    """Single-server queue counting arrivals and departures at constant rates.

    Every arrival is retained with probability q_plus and every
    departure with probability q_minus; the dispersion index is one
    plus the harmonic mean of the two probabilities.
    """
    _require(0 < rho < 1, f"rho must lie in (0, 1), got {rho}")
    _require(0 < q_plus <= 1, f"q_plus must lie in (0, 1], got {q_plus}")
    _require(0 < q_minus <= 1, f"q_minus must lie in (0, 1], got {q_minus}")
    rho, qp, qm = float(rho), float(q_plus), float(q_minus)

    def rate_fn(i: int):
        return (rho, 0.0 if i == 0 else 1.0, qp, qm if i >= 1 else 0.0)

    return InfiniteBDModel(rate_fn=rate_fn, tail_ratio_hint=rho)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # "int" | "float"
    default: float | None = None  # None means required

    def convert(self, raw) -> float | int:
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise ParamOutOfRange(f"parameter {self.name}={raw!r} is not a number")
        if self.kind == "int":
            if value != int(value):
                raise ParamOutOfRange(f"parameter {self.name}={raw!r} must be an integer")
            return int(value)
        return value


@dataclass(frozen=True)
class ModelSpec:
    """A named, parameterized model usable from the command line."""

    name: str
    kind: str  # "finite" | "infinite"
    params: tuple[ParamSpec, ...]
    build: Callable[..., AnyModel]
    doc: str


MODEL_REGISTRY: dict[str, ModelSpec] = {
    spec.name: spec
    for spec in (
        ModelSpec(
            "mmsk_reneging",
            "finite",
            (
                ParamSpec("K", "int"),
                ParamSpec("s", "int"),
                ParamSpec("lambda", "float"),
                ParamSpec("mu", "float"),
                ParamSpec("gamma", "float", 0.0),
            ),
            lambda K, s, **kw: mmsk_reneging(K, s, kw["lambda"], kw["mu"], kw["gamma"]),
            "finite-buffer many-server queue with reneging, counting departures",
        ),
        ModelSpec(
            "billabong",
            "finite",
            (
                ParamSpec("J", "int"),
                ParamSpec("lambda", "float"),
                ParamSpec("mu", "float", 1.0),
            ),
            lambda J, **kw: billabong(J, kw["lambda"], kw["mu"]),
            "finite-population meeting point, counting interactions on arrival",
        ),
        ModelSpec(
            "mm1k",
            "finite",
            (
                ParamSpec("K", "int"),
                ParamSpec("lambda", "float"),
                ParamSpec("mu", "float", 1.0),
            ),
            lambda K, **kw: mm1k(K, kw["lambda"], kw["mu"]),
            "single-server finite-buffer queue, counting every departure",
        ),
        ModelSpec(
            "mm1_busy_cycle",
            "infinite",
            (ParamSpec("rho", "float"),),
            lambda rho: mm1_busy_cycle(rho),
            "single-server queue, counting busy-cycle completions",
        ),
        ModelSpec(
            "mms_output",
            "infinite",
            (
                ParamSpec("s", "int"),
                ParamSpec("rho", "float"),
                ParamSpec("q", "float", 1.0),
            ),
            lambda s, rho, q: mms_output(s, rho, q),
            "stable many-server queue, departures thinned at a constant rate",
        ),
        ModelSpec(
            "mm1_two_sided",
            "infinite",
            (
                ParamSpec("rho", "float"),
                ParamSpec("q_plus", "float"),
                ParamSpec("q_minus", "float"),
            ),
            lambda rho, q_plus, q_minus: mm1_two_sided(rho, q_plus, q_minus),
            "single-server queue counting both arrivals and departures",
        ),
    )
}


def build_named_model(name: str, params: dict) -> AnyModel:
    """Instantiate a registry model from raw (string or numeric) parameters."""
    spec = MODEL_REGISTRY.get(name)
    if spec is None:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ParamOutOfRange(f"unknown model {name!r}; known models: {known}")
    known_names = {p.name for p in spec.params}
    for key in params:
        if key not in known_names:
            raise ParamOutOfRange(
                f"model {name!r} has no parameter {key!r}; expected one of "
                f"{sorted(known_names)}"
            )
    kwargs = {}
    for p in spec.params:
        if p.name in params:
            kwargs[p.name] = p.convert(params[p.name])
        elif p.default is not None:
            kwargs[p.name] = p.convert(p.default)
        else:
            raise ParamOutOfRange(f"model {name!r} requires parameter {p.name!r}")
    return spec.build(**kwargs)
