"""Dispersion of thinned counting processes on birth-death chains.

Three mutually verifying routes to the asymptotic index of dispersion
of a state-dependently thinned birth/death event stream: a closed-form
summation, an exact renewal-reward moment oracle, and Monte Carlo
simulation.
"""

__version__ = "0.1.0"

from .core import (
    BDModel,
    StationarySummary,
    model_from_dict,
    model_from_json,
    model_to_dict,
    model_to_json,
    rates_and_cdfs,
    stationary_distribution,
    validate,
    with_thinning,
)
from .dispersion import (
    InfiniteBDModel,
    RTermBreakdown,
    TruncatedDispersion,
    TruncationPolicy,
    dispersion_closed_form,
    dispersion_complete_counting,
    dispersion_infinite,
    finite_truncation,
)
from .models import (
    billabong,
    build_named_model,
    mm1_busy_cycle,
    mm1_two_sided,
    mm1k,
    mms_output,
    mmsk_reneging,
)
from .oracle import (
    MomentSet,
    VMatrix,
    WMatrix,
    build_v,
    build_w,
    dispersion_renewal_reward,
    dispersion_via_moment_identity,
    explicit_inverse,
    solve_moments,
    solve_tridiagonal,
)
from .simulate import RawMoments, SimConfig, SimEstimate, simulate_batches, simulate_cycles

__all__ = [
    "__version__",
    "BDModel",
    "StationarySummary",
    "validate",
    "stationary_distribution",
    "rates_and_cdfs",
    "with_thinning",
    "model_from_dict",
    "model_from_json",
    "model_to_dict",
    "model_to_json",
    "RTermBreakdown",
    "TruncationPolicy",
    "InfiniteBDModel",
    "TruncatedDispersion",
    "dispersion_closed_form",
    "dispersion_complete_counting",
    "dispersion_infinite",
    "finite_truncation",
    "WMatrix",
    "VMatrix",
    "MomentSet",
    "build_w",
    "build_v",
    "explicit_inverse",
    "solve_tridiagonal",
    "solve_moments",
    "dispersion_renewal_reward",
    "dispersion_via_moment_identity",
    "SimConfig",
    "SimEstimate",
    "RawMoments",
    "simulate_cycles",
    "simulate_batches",
    "mmsk_reneging",
    "billabong",
    "mm1k",
    "mm1_busy_cycle",
    "mms_output",
    "mm1_two_sided",
    "build_named_model",
]
