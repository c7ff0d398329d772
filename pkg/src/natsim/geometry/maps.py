"""Concrete simulation maps: the over-complete torus chart and quaternionic rigid bodies."""

from __future__ import annotations

import numpy as np

from .core import PullbackMap

_PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)


def torus_map(r1: float = 2.0, r2: float = 1.0) -> PullbackMap:
    """Torus embedding on four coordinates, phi = arg(q0 + i q1), theta = arg(q2 + i q3).

    The map is invariant under independent rescaling of (q0, q1) and (q2, q3),
    so the pulled-back metric has a two-dimensional kernel.
    """
    if not r1 > r2 > 0:
        raise ValueError("torus radii must satisfy r1 > r2 > 0")

    def trig(q):
        q0, q1, q2, q3 = (q[..., i] for i in range(4))
        rho1 = np.sqrt(q0 * q0 + q1 * q1)
        rho2 = np.sqrt(q2 * q2 + q3 * q3)
        return q0, q1, q2, q3, rho1, rho2

    def evaluate(q):
        q0, q1, q2, q3, rho1, rho2 = trig(q)
        ring = r1 + r2 * q2 / rho2
        return np.stack([ring * q0 / rho1, ring * q1 / rho1, r2 * q3 / rho2], axis=-1)

    def jacobian(q):
        q0, q1, q2, q3, rho1, rho2 = trig(q)
        cphi, sphi = q0 / rho1, q1 / rho1
        ring = r1 + r2 * q2 / rho2
        a3, b3 = rho1 ** 3, rho2 ** 3
        dcphi = (q1 * q1 / a3, -q0 * q1 / a3)
        dsphi = (-q0 * q1 / a3, q0 * q0 / a3)
        dcth = (q3 * q3 / b3, -q2 * q3 / b3)
        dsth = (-q2 * q3 / b3, q2 * q2 / b3)
        zero = np.zeros_like(ring)
        rows = [
            [ring * dcphi[0], ring * dcphi[1], r2 * cphi * dcth[0], r2 * cphi * dcth[1]],
            [ring * dsphi[0], ring * dsphi[1], r2 * sphi * dcth[0], r2 * sphi * dcth[1]],
            [zero, zero, r2 * dsth[0], r2 * dsth[1]],
        ]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    return PullbackMap(4, 3, evaluate, jacobian, name=f"torus(r1={r1}, r2={r2})")


def torus_point(theta: float, phi: float) -> np.ndarray:
    """Unit-radius chart point with the given poloidal (theta) and toroidal (phi) angles."""
    return np.array([np.cos(phi), np.sin(phi), np.cos(theta), np.sin(theta)])


def torus_angles(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) of chart points; last axis indexes the four coordinates."""
    q = np.asarray(q)
    return np.arctan2(q[..., 3], q[..., 2]), np.arctan2(q[..., 1], q[..., 0])


def _quat_matrix(q):
    """Unnormalized rotation matrix |q|^2 R(q), quadratic in q; batch-friendly."""
    w, x, y, z = (q[..., i] for i in range(4))
    rows = [
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def quaternion_rotation(q) -> np.ndarray:
    """Rotation matrix of a (not necessarily unit) quaternion q = (q0, q1, q2, q3).

    Invariant under q -> s q for s != 0. (cos a/2, 0, 0, sin a/2) rotates by a
    about the 3-axis.
    """
    q = np.asarray(q)
    norm2 = np.sum(q * q, axis=-1)
    if np.any(norm2 == 0):
        raise ValueError("quaternion must be nonzero")
    return _quat_matrix(q) / norm2[..., None, None]


def pauli_rotation(q) -> np.ndarray:
    """Rotation matrix from SU(2) conjugation, R_ab = Tr(sigma_a U sigma_b U^H) / 2.

    U = (q0 - i q.sigma) / |q|; independent of the closed-form quaternion matrix
    and used to cross-check it.
    """
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("quaternion must be nonzero")
    U = (q[0] * np.eye(2) - 1j * np.einsum("a,aij->ij", q[1:], _PAULI)) / n
    R = np.einsum("aij,jk,bkl,li->ab", _PAULI, U, _PAULI, U.conj().T) / 2
    return R.real


def rigid_body_map(reference_positions) -> PullbackMap:
    """Rigid-body chart x_i = Q + R(q) x0_i on coordinates (Q1, Q2, Q3, q0, q1, q2, q3).

    ``reference_positions`` is (n_atom, 3) in the body frame.
    """
    x0 = np.asarray(reference_positions, dtype=float)
    n_atom = x0.shape[0]
    n_out = 3 * n_atom
    eye4 = np.eye(4)
    # |q|^2 R(q) x0 = sum_ab q_a q_b coeff[a, b]; coeff by polarization of the quadratic form
    coeff = np.empty((4, 4, n_out))
    for a in range(4):
        for b in range(4):
            sym = (_quat_matrix(eye4[a] + eye4[b]) - _quat_matrix(eye4[a] - eye4[b])) / 4
            coeff[a, b] = (x0 @ sym.T).ravel()
    translate = np.tile(np.eye(3), (n_atom, 1))
    coeff_flat = coeff.transpose(1, 0, 2).reshape(4, 4 * n_out)

    def evaluate(s):
        Q, q = s[..., :3], s[..., 3:]
        rotated = np.einsum("...a,...b,abn->...n", q, q, coeff)
        rotated = rotated / np.sum(q * q, axis=-1)[..., None]
        return np.tile(Q, n_atom) + rotated

    def jacobian(s):
        q = s[..., 3:]
        norm2 = np.sum(q * q, axis=-1)[..., None, None]
        half = (q @ coeff_flat).reshape(q.shape[:-1] + (4, n_out))
        quad = q[..., None, :] @ half
        dq = 2 * half / norm2 - 2 * q[..., :, None] * quad / norm2 ** 2
        dQ = np.broadcast_to(translate, s.shape[:-1] + translate.shape).astype(dq.dtype)
        return np.concatenate([dQ, np.swapaxes(dq, -1, -2)], axis=-1)

    return PullbackMap(7, n_out, evaluate, jacobian, name=f"rigid_body({n_atom} atoms)")


def identity_map(dim: int) -> PullbackMap:
    eye = np.eye(dim)

    def jacobian(q):
        q = np.asarray(q)
        return eye * np.ones_like(q)[..., None]

    return PullbackMap(dim, dim, lambda q: np.array(q), jacobian, name=f"identity({dim})")


def water_geometry(bond: float = 0.9572, angle_deg: float = 104.52,
                   m_oxygen: float = 16.0, m_hydrogen: float = 1.0):
    """Body-frame water molecule in its principal-axis frame.

    Returns (positions (3, 3), masses (3,), principal moments ascending). Atom
    order is O, H, H; the centre of mass is at the origin and the body axes are
    the principal axes sorted by increasing moment of inertia.
    """
    half = np.deg2rad(angle_deg) / 2
    pos = np.array([
        [0.0, 0.0, 0.0],
        [bond * np.sin(half), bond * np.cos(half), 0.0],
        [-bond * np.sin(half), bond * np.cos(half), 0.0],
    ])
    masses = np.array([m_oxygen, m_hydrogen, m_hydrogen])
    pos = pos - masses @ pos / masses.sum()
    inertia = inertia_tensor(pos, masses)
    moments, axes = np.linalg.eigh(inertia)
    if np.linalg.det(axes) < 0:
        axes[:, 0] = -axes[:, 0]
    return pos @ axes, masses, moments


def inertia_tensor(positions, masses) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    m = np.asarray(masses, dtype=float)
    r2 = np.sum(pos * pos, axis=1)
    return np.einsum("i,ab->ab", m * r2, np.eye(3)) - np.einsum("i,ia,ib->ab", m, pos, pos)
