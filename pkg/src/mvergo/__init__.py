"""Desk-scale lab for invariant measures and ergodicity of interacting-particle
SDE systems: simulation engines, transport/entropy metrology, invariant-measure
fixed points, and functional-inequality checks."""

__version__ = "0.1.0"

from .coefficients import (
    BUILTIN_MODELS,
    CoefficientModel,
    ConditionReport,
    DissipativityConstants,
    KineticConstants,
    builtin_model,
    check_kinetic,
    check_monotonicity,
    check_partial_dissipativity,
)
from .inequalities_lab import (
    CouplingResult,
    DecayFit,
    LsiGapReport,
    decay_fit,
    entropy_decay_experiment,
    harnack_coupling,
    linear_moment_oracle,
    semigroup_lsi_gap,
    talagrand_check,
    w2_decay_experiment,
)
from .invariant import (
    FixedPointResult,
    InvariantRunResult,
    contraction_estimate,
    frozen_invariant,
    mc_floor,
    picard_fixed_point,
)
from .kinetic import (
    GridDensity,
    GridSpec,
    KineticState,
    explicit_invariant_density,
    grid_entropy,
    norm_equivalence_constant,
    simulate_kinetic,
    weighted_gap_norm,
)
from .measures import (
    EmpiricalMeasure,
    ExpMomentReport,
    GaussianLaw,
    exp_quadratic_moment,
    gaussian_kl,
    gaussian_w2,
    load_cloud,
    moment_match,
    point_cloud,
    save_cloud,
    standard_normal_cloud,
    subsample,
    w2_exact,
    w2_sliced,
)
from .simulator import (
    Mollifier,
    QuadratureSpec,
    SimConfig,
    SyncGapSeries,
    TrajectoryEnsemble,
    auto_scheme,
    box_mollifier,
    mollify_drift,
    regularization_convergence,
    simulate_frozen,
    simulate_mean_field,
    smooth_bump_mollifier,
    synchronous_pair,
    yosida_drift,
)
