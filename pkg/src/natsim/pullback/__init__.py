"""Reduced-dimension quantum trajectories on pulled-back Kahler state-spaces."""

from .metric import (
    DENSE_LIMIT,
    Immersion,
    MusicalSolution,
    ReducedMetric,
    complexify,
    identity_immersion,
    musical_solve,
    realify,
    reduced_metric,
)
from .mps import (
    DiagonalMPS,
    MultiplicationCounter,
    assemble,
    bloch_vectors,
    complex_jacobian,
    factored_matvec,
    kahler_derivative_contraction,
    mps_immersion,
    real_jacobian,
    rebalance,
    canonical_gauge,
    spinors_to_xi,
    xi_to_spinors,
)
from .dynamics import (
    CORRECTIONS,
    PullbackModel,
    batched_pinv,
    directional_derivative_contraction,
    integrate_pullback_ensemble,
    metric_derivative_contraction,
    projected_ito_increment,
    projected_stratonovich_step,
    stratonovich_drift_forms,
)
