"""Gradient descent with randomly weighted data points on linear least squares.

The library simulates the weighted iterates, propagates their first and
second moments exactly, evaluates every closed-form bound on convergence and
long-run behavior, and checks theory against Monte Carlo ensembles and an
exhaustive enumeration oracle.
"""
from .dynamics import (
    TrajectoryRecord,
    full_batch_step,
    run_coupled_pair,
    run_trajectory,
    weighted_step,
)
from .linalg import (
    Dataset,
    SpectralDecomposition,
    WeightedProblem,
    build_weighted_problem,
    kernel_projector,
    min_norm_least_squares,
    pseudo_inverse,
    sigma_min_plus,
    spectral_norm,
    svd,
)
from .moments import (
    MomentContext,
    MomentState,
    apply_S,
    first_moment_step,
    propagate,
    remainder_rho,
    s_lin_contraction_factor,
    stationary_second_moment,
)
from .montecarlo import (
    CoupledSummary,
    EnsembleSummary,
    OracleBudget,
    ensemble_moments,
    enumeration_oracle,
    gmc_contraction_estimate,
    risk_curve,
    risk_limit_estimate,
    w2_to_point_mass,
)
from .schedules import Constant, Explicit, Harmonic, StepSchedule, schedule_value
from .weighting import (
    BernoulliIndependent,
    CategoricalSingle,
    ContinuousIID,
    FixedDiagonal,
    Identity,
    WeightingMoments,
    WeightingScheme,
    analytic_moments,
    cov_of_squares_apply,
    estimated_moments,
    sample_weights,
    support_bound,
    weight_stream,
)

__version__ = "0.1.0"
