"""First-order low-pass filtering of measurement records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class FilterSpec:
    """Single-pole (6 dB/octave) low-pass with pole frequency ``omega_c`` in 1/time."""

    omega_c: float
    order: int = 1

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError("omega_c must be positive")
        if self.order != 1:
            raise ValueError("only first-order filters are supported")


def lowpass(series, spec: FilterSpec, dt: float) -> np.ndarray:
    """y_i = y_{i-1} + dt omega_c (x_i - y_{i-1}) along axis 0, starting from y_0 = x_0."""
    a = dt * spec.omega_c
    if not 0 < a < 0.5:
        raise ValueError(f"filter step dt * omega_c = {a:g} must lie in (0, 0.5)")
    x = np.asarray(series, dtype=float)
    if x.shape[0] == 0:
        return x.copy()
    zi = ((1 - a) * x[0])[None]
    y, _ = lfilter([a], [1.0, -(1.0 - a)], x, axis=0, zi=zi)
    return y
