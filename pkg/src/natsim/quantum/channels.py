"""Lindblad channels, their Kraus-pair unravelling and Bloch thermalization channels."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spin import SpinOperatorSet, is_hermitian


@dataclass(frozen=True)
class LindbladChannel:
    """Measured operator A, feedback operator B and one-sided spectral density S.

    The channel generator is L = A + iB with rate 1/(2S).
    """

    A: np.ndarray
    B: np.ndarray
    S: float
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A and B must be square matrices of equal shape")
        if not (is_hermitian(A) and is_hermitian(B)):
            raise ValueError("A and B must be Hermitian")
        if not self.S > 0:
            raise ValueError("spectral density S must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "S", float(self.S))

    @property
    def L(self) -> np.ndarray:
        return self.A + 1j * self.B

    @property
    def rate(self) -> float:
        return 1.0 / (2.0 * self.S)

    @classmethod
    def from_generator(cls, L: np.ndarray, S: float, name: str = "") -> "LindbladChannel":
        L = np.asarray(L, dtype=complex)
        return cls(0.5 * (L + L.conj().T), -0.5j * (L - L.conj().T), S, name)

    def with_phase(self, theta: float) -> "LindbladChannel":
        """Channel with generator exp(i theta) L; theta = pi/2 gives L -> iL."""
        return LindbladChannel.from_generator(np.exp(1j * theta) * self.L, self.S, self.name)


def _herm_function(H: np.ndarray, fn) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    return (V * fn(w)) @ V.conj().T


def kraus_pair(ch: LindbladChannel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Two-outcome measurement operations M+ and M- for one time step.

    M+- = exp(-i (AB + BA) dt / (4S)) exp(+-i B eps) [cos(A eps) +- sin(A eps)] / sqrt(2),
    eps = sqrt(dt / (2S)). Matrix functions use Hermitian eigendecompositions, so
    M+^H M+ + M-^H M- = I holds to rounding.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    eps = np.sqrt(dt / (2.0 * ch.S))
    if np.linalg.norm(ch.A, 2) * eps >= 0.5:
        warnings.warn("dt is large for this channel: |A| sqrt(dt/2S) >= 0.5", stacklevel=2)
    stark = _herm_function(ch.A @ ch.B + ch.B @ ch.A, lambda w: np.exp(-1j * w * dt / (4 * ch.S)))
    wA, VA = np.linalg.eigh(ch.A)
    cos_a = (VA * np.cos(wA * eps)) @ VA.conj().T
    sin_a = (VA * np.sin(wA * eps)) @ VA.conj().T
    wB, VB = np.linalg.eigh(ch.B)
    fb_plus = (VB * np.exp(1j * wB * eps)) @ VB.conj().T
    fb_minus = (VB * np.exp(-1j * wB * eps)) @ VB.conj().T
    m_plus = stark @ fb_plus @ (cos_a + sin_a) / np.sqrt(2.0)
    m_minus = stark @ fb_minus @ (cos_a - sin_a) / np.sqrt(2.0)
    return m_plus, m_minus


def jump_update(psi: np.ndarray, pair, u: float, tol: float = 1e-12):
    """Apply one outcome of a Kraus pair; '+' occurs when u < p+ = |M+ psi|^2.

    Returns (normalized psi', outcome +1 or -1).
    """
    m_plus, m_minus = pair
    psi = np.asarray(psi, dtype=complex)
    a = m_plus @ psi
    p_plus = float(np.vdot(a, a).real)
    if p_plus < -tol or p_plus > 1 + tol:
        raise ValueError(f"outcome probability {p_plus} outside [0, 1]; reduce dt")
    if u < p_plus:
        return a / np.sqrt(p_plus), 1
    b = m_minus @ psi
    return b / np.linalg.norm(b), -1


def lindblad_apply(rho: np.ndarray, H: np.ndarray | None,
                   channels: Sequence[LindbladChannel]) -> np.ndarray:
    """-i[H, rho] + sum_k (1/2S_k) (L rho L^H - 1/2 {L^H L, rho})."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    if H is not None:
        H = np.asarray(H)
        if H.shape != rho.shape:
            raise ValueError("Hamiltonian and density matrix dimensions differ")
        out += -1j * (H @ rho - rho @ H)
    for ch in channels:
        if ch.A.shape != rho.shape:
            raise ValueError("channel and density matrix dimensions differ")
        L = ch.L
        LdL = L.conj().T @ L
        out += ch.rate * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def kraus_lindblad_residual(rho: np.ndarray, ch: LindbladChannel, dt: float) -> float:
    """Frobenius norm of (M+ rho M+^H + M- rho M-^H - rho)/dt - L(rho)."""
    m_plus, m_minus = kraus_pair(ch, dt)
    rho = np.asarray(rho, dtype=complex)
    kraus = m_plus @ rho @ m_plus.conj().T + m_minus @ rho @ m_minus.conj().T
    return float(np.linalg.norm((kraus - rho) / dt - lindblad_apply(rho, None, [ch])))


@dataclass(frozen=True)
class BlochParameters:
    """Thermalizing channel parameters: inverse temperature and spectral densities.

    ``alpha = tanh(beta / 4)`` is the feedback gain that fixes the temperature.
    """

    beta: float
    S_perp: float
    S_z: float

    def __post_init__(self):
        if not (self.S_perp > 0 and self.S_z > 0):
            raise ValueError("spectral densities S_perp and S_z must be positive")

    @property
    def alpha(self) -> float:
        return float(np.tanh(self.beta / 4.0))

    @property
    def equilibrium_polarization(self) -> float:
        """Spin-1/2 polarization 2<s_z> = 2 alpha / (1 + alpha^2) = tanh(beta / 2)."""
        a = self.alpha
        return 2 * a / (1 + a * a)

    def relaxation_times(self) -> tuple[float, float]:
        """Spin-1/2 (T1, T2) implied by the channels."""
        a = self.alpha
        rate1 = (1 + a * a) / (2 * self.S_perp)
        return 1 / rate1, 1 / (0.5 * rate1 + 1 / (4 * self.S_z))

    @classmethod
    def from_relaxation_times(cls, T1: float, T2: float, beta: float) -> "BlochParameters":
        """Spin-1/2 channel densities giving longitudinal time T1 and transverse time T2 < 2 T1."""
        if not (T1 > 0 and 0 < T2 < 2 * T1):
            raise ValueError("need T1 > 0 and 0 < T2 < 2 T1")
        a = np.tanh(beta / 4.0)
        S_perp = (1 + a * a) * T1 / 2
        S_z = 1 / (4 * (1 / T2 - 1 / (2 * T1)))
        return cls(beta, S_perp, S_z)


def bloch_channels(params: BlochParameters, ops: SpinOperatorSet, sign: int = 1,
                   label: str = "") -> list[LindbladChannel]:
    """Three measurement-and-feedback channels that thermalize a spin.

    With sign = +1 the fixed point is exp(+beta s_z) (positive polarization for
    beta > 0); sign = -1 gives exp(-beta s_z).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a = sign * params.alpha
    return [
        LindbladChannel(ops.sx, a * ops.sy, params.S_perp, f"{label}x"),
        LindbladChannel(ops.sy, -a * ops.sx, params.S_perp, f"{label}y"),
        LindbladChannel(ops.sz, np.zeros_like(ops.sz), params.S_z, f"{label}z"),
    ]
