"""Pullback geometry and classical symplectic flow on simulation state-spaces."""

from .core import (
    DEFAULT_RANK_TOL,
    FNaturalMetric,
    NativeMetric,
    PullbackMap,
    SubbundleSplit,
    default_gauge_mass,
    idempotence_residual,
    natural_metric,
    pullback_metric,
    split_subbundles,
    verification_projector,
)
from .maps import (
    identity_map,
    inertia_tensor,
    pauli_rotation,
    quaternion_rotation,
    rigid_body_map,
    torus_angles,
    torus_map,
    torus_point,
    water_geometry,
)
from .symplectic import (
    METHODS,
    FunctionHamiltonian,
    GeodesicHamiltonian,
    PhaseState,
    gauss_legendre_tableau,
    geodesic_hamiltonian,
    hamiltonian_flow,
    integrate_symplectic,
    native_phase_projector,
    phase_lift_jacobian,
    pushforward_trajectory,
    symplectic_step,
)
