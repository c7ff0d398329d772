"""Configured scenarios with their analytic or dense-numerics oracles."""

from .dnp import (
    COUPLINGS,
    DNPOracle,
    DNPScenario,
    PolarizationSummary,
    calibrate_coupling,
    dnp_channels,
    dnp_hamiltonian,
    dnp_oracle,
    run_dnp,
    summarize,
)
from .torus import (
    TorusScenario,
    divergence_time,
    initial_phase_state,
    run_torus,
    run_twins,
    separatrix_direction,
    twin_scenarios,
)
from .water import (
    AXES,
    WaterScenario,
    body_observables,
    build_water,
    com_oracle,
    run_water,
    sign_flips,
    water_projector,
)
