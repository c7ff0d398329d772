"""Batched full-Hilbert-space trajectory ensembles: Ito SSE and the Kraus-pair jump chain."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..records import IntegrationError, TrajectoryRecord
from .channels import LindbladChannel, kraus_pair
from .sse import normalize, sse_increment


def _expect(op, psi):
    return np.real(np.einsum("...a,ab,...b->...", psi.conj(), op, psi))


def _run(step, psi0, n_steps, dt, record_every, observables, names):
    psi = normalize(np.array(psi0, dtype=complex))
    if psi.ndim != 2:
        raise ValueError("psi0 must have shape (paths, dim)")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    observables = dict(observables or {})
    n_samples = n_steps // record_every + 1
    P = psi.shape[0]
    obs = {k: np.empty((n_samples, P)) for k in observables}
    recs = {name: np.zeros((n_samples, P)) for name in names}
    acc = np.zeros((P, len(names)))

    def sample(idx):
        for k, op in observables.items():
            obs[k][idx] = _expect(op, psi)

    sample(0)
    for n in range(n_steps):
        psi, rec = step(psi)
        if not np.all(np.isfinite(psi)):
            raise IntegrationError("trajectory left the finite domain", n)
        acc += rec
        if (n + 1) % record_every == 0:
            idx = (n + 1) // record_every
            sample(idx)
            for k, name in enumerate(names):
                recs[name][idx] = acc[:, k] / (record_every * dt)
            acc[:] = 0.0
    t = dt * record_every * np.arange(n_samples)
    return TrajectoryRecord(t, coords=psi[None], observables=obs, records=recs)


def integrate_sse_ensemble(psi0, H, channels: Sequence[LindbladChannel], dt: float, n_steps: int,
                           noise, record_every: int = 1,
                           observables: Mapping[str, np.ndarray] | None = None) -> TrajectoryRecord:
    """Euler-Maruyama paths of the normalized SSE, renormalized after every step.

    ``noise.next()`` supplies (paths, channels) Wiener increments. Observables
    are expectations (samples, paths); records are interval-averaged rates.
    ``coords`` holds only the final states.
    """
    names = [ch.name or f"ch{k}" for k, ch in enumerate(channels)]

    def step(psi):
        dpsi, rec = sse_increment(psi, H, channels, dt, noise.next())
        return normalize(psi + dpsi), rec

    return _run(step, psi0, n_steps, dt, record_every, observables, names)


def integrate_jump_ensemble(psi0, H, channels: Sequence[LindbladChannel], dt: float, n_steps: int,
                            noise, record_every: int = 1,
                            observables: Mapping[str, np.ndarray] | None = None) -> TrajectoryRecord:
    """Kraus-pair chain: each step measures the channels in turn, then applies exp(-iH dt).

    ``noise`` must be a binary-mode EnsembleNoise; its raw uniforms pick the
    outcomes. Records are the binary increments +-sqrt(S/2) sqrt(dt) per
    outcome, mapped to the same rate convention as the SSE records.
    """
    names = [ch.name or f"ch{k}" for k, ch in enumerate(channels)]
    pairs = [kraus_pair(ch, dt) for ch in channels]
    scales = np.array([np.sqrt(ch.S / 2) for ch in channels])
    U = None
    if H is not None:
        w, V = np.linalg.eigh(np.asarray(H))
        U = (V * np.exp(-1j * w * dt)) @ V.conj().T

    def step(psi):
        u = noise.next_uniforms()
        rec = np.empty((psi.shape[0], len(channels)))
        for k, (mp, mm) in enumerate(pairs):
            a = psi @ mp.T
            p_plus = np.sum(np.abs(a) ** 2, axis=-1)
            plus = u[:, k] < p_plus
            b = psi @ mm.T
            psi = np.where(plus[:, None], a, b)
            psi = normalize(psi)
            rec[:, k] = np.where(plus, 1.0, -1.0) * scales[k] * np.sqrt(dt)
        if U is not None:
            psi = psi @ U.T
        return psi, rec

    return _run(step, psi0, n_steps, dt, record_every, observables, names)
