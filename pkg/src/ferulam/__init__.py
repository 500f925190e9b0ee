"""Fermi-Ulam ping-pong with quasi-periodic forcing on the N-torus."""

from .collision import SolveResult, solve_impact_time, solve_tau
from .exceptions import BelowThreshold, ConfigError, ConstructionFailed, DomainError, NoConvergence
from .forcing import (
    ForcingSpec,
    constant_spec,
    eval_dpsi2_P,
    eval_dpsi_P,
    eval_P,
    eval_p_omega,
    flow_advance,
    single_mode_spec,
    standard_spec,
    v_star,
)
from .pingpong import (
    OrbitTrace,
    PhaseStateTE,
    PhaseStateTV,
    SkewState,
    build_noninjectivity_example,
    iterate,
    jacobian_det_estimate,
    step_skew,
    step_te,
    step_tv,
)
from .rng import haar_sample

__version__ = "0.1.0"
