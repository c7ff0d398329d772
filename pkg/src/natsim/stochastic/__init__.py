"""Seeded noise streams and Ito/Stratonovich stepping."""

from .noise import MODES, EnsembleNoise, NoisePath, channel_generator
from .sde import (
    SDEProblem,
    integrate_sde,
    ito_step,
    ito_to_stratonovich,
    stratonovich_step,
    stratonovich_to_ito,
)

