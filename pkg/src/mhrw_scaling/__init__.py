"""Optimal scaling of random-walk Metropolis on product targets.

The chain, its acceptance-ratio asymptotics, Dirichlet-form estimators, the
Langevin limit and the capacity nest, with Monte Carlo checks of each.
"""
from .capacity import NestBound, NestLevel, TruncationError, capacity_bound, nest_level, nest_levels, u_n_eval, u_n_grad
from .clt import (
    CltReport,
    acceptance_clt,
    c_of_tau,
    drift_term,
    hoeffding_envelope,
    mean_acceptance,
    remainder_bound_check,
)
from .diffusion import (
    SdeConfig,
    autocorrelation_compare,
    invariance_check,
    rescaled_first_coordinate,
    semigroup_distance,
    simulate_sde,
    simulate_sde_ensemble,
)
from .estimates import BoundReport, Estimate, FormEstimate
from .forms import (
    chi2_chernoff_bound,
    chi2_chernoff_check,
    discrete_form,
    domination_check,
    domination_constant,
    l2_norm,
    limit_form,
    mosco_m2_curve,
    sobolev_norm,
)
from .observables import CylinderFunction, bump, catalogue, coordinate, parse_observable, sin_bump
from .potential import (
    Potential,
    check_regularity,
    fisher_information,
    gaussian,
    hyperbolic_secant,
    logistic,
    parse_target,
    spline_potential,
    tabulated_potential,
)
from .sampler import ChainConfig, run_chain, step
from .scaling import OptimalScale, empirical_speed_curve, optimize_tau, speed

__version__ = "0.1.0"
