"""Trajectory containers shared by the classical and quantum integrators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryRecord:
    """Time series produced by an integrator.

    Attributes
    ----------
    t : (n,) array of sample times.
    coords : (n, dim) array of state coordinates (``q`` or ``xi``).
    momenta : optional (n, dim) array of conjugate momenta.
    observables : mapping name -> (n,) or (n, k) array, in registration order.
    records : mapping channel name -> (n,) array of measurement-record samples
        (record increment divided by the time step, i.e. a rate).
    meta : free-form run metadata (parameters, summaries, abort info).
    """

    t: np.ndarray
    coords: np.ndarray
    momenta: np.ndarray | None = None
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    records: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]


class IntegrationError(RuntimeError):
    """Raised when a trajectory leaves the finite domain.

    ``step`` is the index of the step that produced the non-finite state.
    """

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step
