"""Exclusion process with slow reservoirs: simulation, exact oracles and limiting PDEs."""

from .lattice import (
    Configuration,
    MartingaleSeries,
    ModelParams,
    RateTable,
    apply_event,
    drift_coefficients,
    dynkin_martingale,
    empirical_pairing,
    init_config,
    quadratic_variation_bound,
    rates,
    sample_event,
    simulate_until,
    step,
    trajectory,
)
from .hydrostatics import (
    CovarianceField,
    MeanProfile,
    WalkNotAbsorbed,
    conductance_laplacian,
    coupling_walk,
    covariance_solve,
    covariance_theta0,
    mean_profile_closed_form,
    mean_profile_recurrence,
    occupation_time_mc,
    occupation_times,
    stationary_mc_estimate,
    stationary_profile,
)
from .pde import (
    GreenOperator,
    GridField,
    TestFunction,
    check_H_membership,
    green_kernel,
    robin_inverse_laplacian,
    solve_heat,
    stationary_solution,
    uniqueness_identity_check,
    weak_residual,
)
from .experiments import (
    ExperimentReport,
    association_statistic,
    coarse_grain_boundary,
    emit_report,
    hydrodynamic_experiment,
    hydrostatic_experiment,
    load_report,
)

__version__ = "0.1.0"
