"""Spin operators and Berezin symbols."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class SpinOperatorSet:
    j: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    splus: np.ndarray
    sminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.sz.shape[0]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def spin_operators(j) -> SpinOperatorSet:
    """Angular-momentum matrices for spin j in the s_z basis m = j, j-1, ..., -j (hbar = 1)."""
    two_j = Fraction(j).limit_denominator(4) * 2
    if two_j.denominator != 1 or two_j <= 0 or abs(float(two_j) - 2 * float(j)) > 1e-12:
        raise ValueError(f"spin must be a positive half-integer, got {j!r}")
    jf = float(j)
    m = jf - np.arange(int(two_j) + 1)
    # <m+1| s+ |m> = sqrt(j(j+1) - m(m+1)), placed above the diagonal
    ladder = np.sqrt(jf * (jf + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(ladder, 1).astype(complex)
    sminus = splus.conj().T
    sx = 0.5 * (splus + sminus)
    sy = -0.5j * (splus - sminus)
    sz = np.diag(m).astype(complex)
    return SpinOperatorSet(jf, sx, sy, sz, splus, sminus)


def is_hermitian(op: np.ndarray, tol: float = 1e-14) -> bool:
    op = np.asarray(op)
    scale = max(1.0, float(np.abs(op).max())) if op.size else 1.0
    return bool(np.abs(op - op.conj().T).max() <= tol * scale) if op.size else True


def berezin_symbol(op: np.ndarray, psi: np.ndarray, on_nonhermitian: str = "reject"):
    """Normalized expectation <psi|op|psi> / <psi|psi>; psi may carry leading batch axes.

    ``on_nonhermitian`` is ``"reject"`` (raise) or ``"symmetrize"`` (use (op + op^H)/2).
    """
    op = np.asarray(op)
    if not is_hermitian(op):
        if on_nonhermitian == "symmetrize":
            op = 0.5 * (op + op.conj().T)
        else:
            raise ValueError("operator is not Hermitian")
    psi = np.asarray(psi)
    norm = np.sum(np.abs(psi) ** 2, axis=-1)
    if np.any(norm == 0):
        raise ValueError("psi must be nonzero")
    return np.real(np.sum(psi.conj() * (psi @ op.T), axis=-1)) / norm
