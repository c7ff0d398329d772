"""Dense master-equation oracle: Lindblad superoperator, steady states and evolution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .channels import LindbladChannel, lindblad_apply

MAX_DENSE_DIM = 64


def lindblad_superoperator(H, channels: Sequence[LindbladChannel], dim: int | None = None):
    """Matrix of rho -> L(rho) acting on row-major vec(rho)."""
    if dim is None:
        dim = (np.asarray(H).shape[0] if H is not None else channels[0].A.shape[0])
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"dense oracle limited to dimension {MAX_DENSE_DIM}")
    eye = np.eye(dim)
    # vec(X rho Y) = kron(X, Y^T) vec(rho) for row-major vec
    sup = np.zeros((dim * dim, dim * dim), dtype=complex)
    if H is not None:
        H = np.asarray(H, dtype=complex)
        sup += -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for ch in channels:
        L = ch.L
        LdL = L.conj().T @ L
        sup += ch.rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return sup


@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    degenerate: bool
    null_basis: np.ndarray  # columns span the numerically null space (vec form)


def master_steady_state(H, channels: Sequence[LindbladChannel], dim: int | None = None,
                        tol: float = 1e-10) -> SteadyState:
    """Unit-trace null vector of the Lindblad superoperator.

    ``degenerate`` flags a steady space of dimension > 1; ``rho`` is then the
    trace-normalized projection of the maximally mixed state onto that space.
    """
    sup = lindblad_superoperator(H, channels, dim)
    d = int(round(np.sqrt(sup.shape[0])))
    _, s, Vh = np.linalg.svd(sup)
    scale = max(s[0], 1e-300)
    null = Vh[s <= tol * scale].conj().T
    if null.shape[1] == 0:
        null = Vh[-1:].conj().T
    degenerate = null.shape[1] > 1
    if degenerate:
        target = np.eye(d).ravel() / d
        vec = null @ (null.conj().T @ target)
    else:
        vec = null[:, 0]
    rho = vec.reshape(d, d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    return SteadyState(rho, degenerate, null)


def evolve_master(rho0, H, channels: Sequence[LindbladChannel], times) -> np.ndarray:
    """rho(t) at each requested time (exact exponential of the superoperator)."""
    rho0 = np.asarray(rho0, dtype=complex)
    sup = lindblad_superoperator(H, channels, rho0.shape[0])
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size,) + rho0.shape, dtype=complex)
    vec = rho0.ravel()
    t_prev = 0.0
    for i, t in enumerate(times):
        vec = expm(sup * (t - t_prev)) @ vec
        t_prev = t
        out[i] = vec.reshape(rho0.shape)
    return out


def lindblad_residual(rho, H, channels: Sequence[LindbladChannel]) -> float:
    return float(np.linalg.norm(lindblad_apply(rho, H, channels)))
