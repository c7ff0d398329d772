"""Normalized Ito stochastic Schrodinger equation with measurement records.

States may carry leading path axes: psi has shape (..., d) and the Wiener
increments dW have shape (..., n_channels).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .channels import LindbladChannel


def _apply(op, psi):
    return psi @ op.T


def _expect(op, psi):
    return np.real(np.sum(psi.conj() * _apply(op, psi), axis=-1)) / np.sum(np.abs(psi) ** 2, axis=-1)


def sse_drift(psi, H, channels: Sequence[LindbladChannel]):
    """Ito drift -i H psi + sum_k (-1/2 L^H L + a L - a^2/2) psi / (2 S_k), a = <A_k>."""
    psi = np.asarray(psi, dtype=complex)
    out = np.zeros_like(psi) if H is None else -1j * _apply(np.asarray(H), psi)
    for ch in channels:
        L = ch.L
        a = _expect(ch.A, psi)[..., None]
        Lpsi = _apply(L, psi)
        out = out + ch.rate * (-0.5 * _apply(L.conj().T, Lpsi) + a * Lpsi - 0.5 * a * a * psi)
    return out


def sse_diffusion(psi, channels: Sequence[LindbladChannel]) -> list[np.ndarray]:
    """Per-channel noise vectors (L_k - <A_k>) psi / sqrt(2 S_k)."""
    psi = np.asarray(psi, dtype=complex)
    out = []
    for ch in channels:
        a = _expect(ch.A, psi)[..., None]
        out.append((_apply(ch.L, psi) - a * psi) / np.sqrt(2 * ch.S))
    return out


def record_increments(psi, channels: Sequence[LindbladChannel], dt: float, dW):
    """Measurement-record increments <A_k> dt + sqrt(S_k / 2) dW_k, shape (..., n_channels)."""
    psi = np.asarray(psi, dtype=complex)
    dW = np.asarray(dW, dtype=float)
    means = np.stack([_expect(ch.A, psi) for ch in channels], axis=-1)
    noise_scale = np.sqrt(np.array([ch.S for ch in channels]) / 2)
    return means * dt + noise_scale * dW


def sse_increment(psi, H, channels: Sequence[LindbladChannel], dt: float, dW):
    """One Ito step of the normalized SSE.

    Returns (dpsi, record increments). The expected change of <psi|psi> is
    O(dt^2) for a normalized input.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    psi = np.asarray(psi, dtype=complex)
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-1] != len(channels):
        raise ValueError("one Wiener increment per channel is required")
    dpsi = sse_drift(psi, H, channels) * dt
    for k, sigma in enumerate(sse_diffusion(psi, channels)):
        dpsi = dpsi + sigma * dW[..., k, None]
    if not np.all(np.isfinite(dpsi)):
        raise FloatingPointError("SSE increment is not finite")
    return dpsi, record_increments(psi, channels, dt, dW)


def _expect_derivative(op, psi, v):
    """Directional derivative of the normalized symbol <op> at psi along v (real coordinates)."""
    n2 = np.sum(np.abs(psi) ** 2, axis=-1)
    a = np.real(np.sum(psi.conj() * _apply(op, psi), axis=-1)) / n2
    return (2 * np.real(np.sum(psi.conj() * _apply(op, v), axis=-1))
            - 2 * a * np.real(np.sum(psi.conj() * v, axis=-1))) / n2


def stratonovich_sse_drift(psi, H, channels: Sequence[LindbladChannel]):
    """Stratonovich drift mu - 1/2 sum_k (D sigma_k)[sigma_k], evaluated in closed form.

    With sigma = (L - a) psi / sqrt(2S), the derivative along v is
    ((L - a) v - (Da[v]) psi) / sqrt(2S).
    """
    psi = np.asarray(psi, dtype=complex)
    out = sse_drift(psi, H, channels)
    for ch, sigma in zip(channels, sse_diffusion(psi, channels)):
        a = _expect(ch.A, psi)[..., None]
        da = _expect_derivative(ch.A, psi, sigma)[..., None]
        dsig = (_apply(ch.L, sigma) - a * sigma - da * psi) / np.sqrt(2 * ch.S)
        out = out - 0.5 * dsig
    return out


def normalize(psi):
    psi = np.asarray(psi)
    return psi / np.linalg.norm(psi, axis=-1, keepdims=True)
