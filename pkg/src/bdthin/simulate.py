"""Monte Carlo estimation of the dispersion index.

Two estimators over the same jump-chain construction (exponential
holding time at rate lambda_i + mu_i, then a birth with probability
lambda_i / (lambda_i + mu_i)), with each transition retained by a
Bernoulli draw on the pre-jump state:

* regenerative: accumulate (X, Y) = (duration, retained count) per
  regeneration cycle, delimited by exits from state 0, and plug the
  sample moments into the renewal-reward variance expression;
* batch means: one long path, count retained events in equal windows
  after a warmup, and take variance over mean of the window counts.

Every transition consumes exactly three uniforms (holding time,
direction, thinning) even when the thinning probability is 0 or 1, so
runs with different thinning vectors but the same seed share a common
random-number stream. Streams come from counter-based Philox
generators keyed on (seed, stream index), so repeated runs are
bit-identical and parallel replications never overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import BDModel, rates_and_cdfs, validate
from .errors import InvalidConfig

__all__ = ["SimConfig", "SimEstimate", "RawMoments", "simulate_cycles", "simulate_batches"]

_JACKKNIFE_GROUPS = 50


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    method is "regenerative" (uses cycles) or "batch_means" (uses
    horizon and batch_count). initial_state applies to batch means
    only: "zero", "stationary", or a fixed state index.
    """

    seed: int
    method: str = "regenerative"
    cycles: int = 1_000_000
    horizon: float = 1e6
    batch_count: int = 100
    initial_state: "str | int" = "zero"


@dataclass(frozen=True)
class RawMoments:
    """Sample means of X, Y, X^2, XY, Y^2 over regeneration cycles."""

    mean_x: float
    mean_y: float
    mean_x2: float
    mean_xy: float
    mean_y2: float


@dataclass(frozen=True)
class SimEstimate:
    """Point estimate with a jackknife standard error.

    identity_violations counts cycles whose per-state birth counts
    failed to match the neighboring death counts (always 0 for a
    correct simulator; reported rather than asserted).
    """

    D_hat: float
    std_err: float
    mean_rate_hat: float
    cycles_or_batches: int
    raw_moments: RawMoments | None
    method: str
    seed: int
    identity_violations: int = 0
    total_jumps: int = 0


def _rng(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) % (1 << 64), spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


@njit(nogil=True)
def _regen_kernel(rng, lam, mu, qp, qm, n_cycles, n_groups):
    J = lam.shape[0] - 1
    group_sums = np.zeros((n_groups, 5))
    group_cycles = np.zeros(n_groups, np.int64)
    base = n_cycles // n_groups
    extra = n_cycles % n_groups
    births = np.zeros(J + 1, np.int64)
    deaths = np.zeros(J + 1, np.int64)
    violations = 0
    total_jumps = 0
    g = 0
    in_group = 0
    limit = base + 1 if extra > 0 else base
    for _ in range(n_cycles):
        # A cycle opens just after a 0 -> 1 jump; the closing 0 -> 1
        # jump (and its thinning draw) belongs to this cycle.
        state = 1
        x = 0.0
        y = 0.0
        for j in range(J + 1):
            births[j] = 0
            deaths[j] = 0
        while state != 0:
            r = lam[state] + mu[state]
            u_hold = rng.random()
            u_dir = rng.random()
            u_thin = rng.random()
            x += -np.log1p(-u_hold) / r
            total_jumps += 1
            if u_dir * r < lam[state]:
                births[state] += 1
                if u_thin < qp[state]:
                    y += 1.0
                state += 1
            else:
                deaths[state] += 1
                if u_thin < qm[state]:
                    y += 1.0
                state -= 1
        u_hold = rng.random()
        rng.random()  # direction draw, kept for stream alignment
        u_thin = rng.random()
        x += -np.log1p(-u_hold) / lam[0]
        total_jumps += 1
        births[0] += 1
        if u_thin < qp[0]:
            y += 1.0
        for j in range(J):
            if births[j] != deaths[j + 1]:
                violations += 1
                break
        group_sums[g, 0] += x
        group_sums[g, 1] += y
        group_sums[g, 2] += x * x
        group_sums[g, 3] += x * y
        group_sums[g, 4] += y * y
        group_cycles[g] += 1
        in_group += 1
        if in_group == limit and g < n_groups - 1:
            g += 1
            in_group = 0
            limit = base + 1 if g < extra else base
    return group_sums, group_cycles, violations, total_jumps


@njit(nogil=True)
def _batch_kernel(rng, lam, mu, qp, qm, init_state, P, warmup, horizon, n_batches):
    J = lam.shape[0] - 1
    counts = np.zeros(n_batches, np.int64)
    occupancy = np.zeros(J + 1)
    width = (horizon - warmup) / n_batches
    state = init_state
    if init_state < 0:  # stationary start: inverse-CDF draw
        u = rng.random()
        state = 0
        while P[state] < u and state < J:
            state += 1
    t = 0.0
    total_jumps = 0
    while True:
        r = lam[state] + mu[state]
        u_hold = rng.random()
        u_dir = rng.random()
        u_thin = rng.random()
        dt = -np.log1p(-u_hold) / r
        lo = t if t > warmup else warmup
        hi = t + dt if t + dt < horizon else horizon
        if hi > lo:
            occupancy[state] += hi - lo
        t += dt
        if t >= horizon:
            break
        total_jumps += 1
        if u_dir * r < lam[state]:
            counted = u_thin < qp[state]
            state += 1
        else:
            counted = u_thin < qm[state]
            state -= 1
        if counted and t >= warmup:
            b = int((t - warmup) / width)
            if b >= n_batches:
                b = n_batches - 1
            counts[b] += 1
    return counts, occupancy, total_jumps


def _plugin_dispersion(mx, my, mx2, mxy, my2):
    R = my / mx
    return (my2 - 2.0 * R * mxy + R * R * mx2) / my


def simulate_cycles(model: BDModel, config: SimConfig) -> SimEstimate:
    """Regenerative estimate of the dispersion index.

    The standard error of the plug-in estimate is a delete-one-group
    jackknife over 50 contiguous groups of cycles.
    """
    validate(model)
    if config.method != "regenerative":
        raise InvalidConfig(f"method must be 'regenerative', got {config.method!r}")
    if config.cycles < 100:
        raise InvalidConfig(f"need at least 100 cycles, got {config.cycles}")
    rng = _rng(config.seed, 0)
    group_sums, group_cycles, violations, jumps = _regen_kernel(
        rng, model.lam, model.mu, model.q_plus, model.q_minus,
        config.cycles, _JACKKNIFE_GROUPS,
    )
    totals = group_sums.sum(axis=0)
    n = float(config.cycles)
    means = totals / n
    d_hat = _plugin_dispersion(*means)

    loo = (totals[np.newaxis, :] - group_sums) / (n - group_cycles)[:, np.newaxis]
    d_loo = np.array([_plugin_dispersion(*row) for row in loo])
    G = _JACKKNIFE_GROUPS
    std_err = float(np.sqrt((G - 1) / G * np.sum((d_loo - d_loo.mean()) ** 2)))

    return SimEstimate(
        D_hat=float(d_hat),
        std_err=std_err,
        mean_rate_hat=float(totals[1] / totals[0]),
        cycles_or_batches=config.cycles,
        raw_moments=RawMoments(*(float(m) for m in means)),
        method="regenerative",
        seed=config.seed,
        identity_violations=int(violations),
        total_jumps=int(jumps),
    )


def simulate_batches(model: BDModel, config: SimConfig) -> SimEstimate:
    """Batch-means estimate of the dispersion index.

    The warmup discards 5% of the horizon or 10 expected regeneration
    cycles, whichever is longer; counting starts only after it. The
    standard error is a delete-one-batch jackknife.
    """
    validate(model)
    if config.method != "batch_means":
        raise InvalidConfig(f"method must be 'batch_means', got {config.method!r}")
    if config.batch_count < 10:
        raise InvalidConfig(f"need at least 10 batches, got {config.batch_count}")
    if config.horizon <= 0.0:
        raise InvalidConfig(f"horizon must be positive, got {config.horizon}")
    s = rates_and_cdfs(model)
    expected_cycle = 1.0 / (s.pi[0] * model.lam[0])
    warmup = max(0.05 * config.horizon, 10.0 * expected_cycle)
    if warmup >= config.horizon:
        raise InvalidConfig(
            f"horizon {config.horizon} leaves no room after warmup {warmup:.3g}"
        )
    if config.initial_state == "zero":
        init = 0
    elif config.initial_state == "stationary":
        init = -1
    elif isinstance(config.initial_state, (int, np.integer)):
        init = int(config.initial_state)
        if not 0 <= init <= model.J:
            raise InvalidConfig(f"fixed initial state {init} outside 0..{model.J}")
    else:
        raise InvalidConfig(f"bad initial_state {config.initial_state!r}")

    rng = _rng(config.seed, 1)
    counts, occupancy, jumps = _batch_kernel(
        rng, model.lam, model.mu, model.q_plus, model.q_minus,
        init, s.P, warmup, float(config.horizon), config.batch_count,
    )
    counts = counts.astype(float)
    B = config.batch_count
    mean = counts.mean()
    var = counts.var(ddof=1)
    d_hat = var / mean

    total = counts.sum()
    total_sq = np.sum(counts**2)
    loo_mean = (total - counts) / (B - 1)
    loo_var = (total_sq - counts**2 - (B - 1) * loo_mean**2) / (B - 2)
    d_loo = loo_var / loo_mean
    std_err = float(np.sqrt((B - 1) / B * np.sum((d_loo - d_loo.mean()) ** 2)))

    return SimEstimate(
        D_hat=float(d_hat),
        std_err=std_err,
        mean_rate_hat=float(total / (config.horizon - warmup)),
        cycles_or_batches=B,
        raw_moments=None,
        method="batch_means",
        seed=config.seed,
        identity_violations=0,
        total_jumps=int(jumps),
    )


def occupancy_fractions(model: BDModel, config: SimConfig) -> np.ndarray:
    """Fraction of post-warmup time spent in each state (diagnostic)."""
    validate(model)
    s = rates_and_cdfs(model)
    expected_cycle = 1.0 / (s.pi[0] * model.lam[0])
    warmup = max(0.05 * config.horizon, 10.0 * expected_cycle)
    rng = _rng(config.seed, 1)
    _, occupancy, _ = _batch_kernel(
        rng, model.lam, model.mu, model.q_plus, model.q_minus,
        0, s.P, warmup, float(config.horizon), max(config.batch_count, 10),
    )
    return occupancy / occupancy.sum()
