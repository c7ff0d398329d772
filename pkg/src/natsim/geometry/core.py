"""Pullback metrics, SVD subbundles, F-natural metrics and verification projectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class PullbackMap:
    """Smooth map F from simulation coordinates q to native coordinates x.

    ``eval`` and ``jacobian`` must accept a trailing coordinate axis with
    arbitrary leading batch axes, and must be written with analytic numpy
    operations only (no ``abs``/``conj``) so that complex-step differentiation
    of the Jacobian is exact.
    """

    dim_sim: int
    dim_native: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    name: str = "map"

    def __call__(self, q):
        return self.eval(q)

    def jacobian_derivatives(self, q: np.ndarray, h: float = 1e-30) -> np.ndarray:
        """Return dJ[i] = d(jacobian)/dq_i at q, shape (dim_sim, dim_native, dim_sim).

        Complex-step differentiation: exact to rounding for analytic maps.
        """
        q = np.asarray(q, dtype=float)
        jc = self.jacobian(q[..., None, :] + 1j * h * np.eye(self.dim_sim))
        return jc.imag / h

    def jacobian_and_derivatives(self, q: np.ndarray):
        """(J, dJ) at q (leading batch axes allowed) from one batched complex-step
        evaluation; its real part is J itself.
        """
        q = np.asarray(q, dtype=float)
        jc = self.jacobian(q[..., None, :] + 1j * 1e-30 * np.eye(self.dim_sim))
        return jc[..., 0, :, :].real, jc.imag / 1e-30

    def check_jacobian(self, q: np.ndarray, step: float = 1e-6) -> float:
        """Max relative deviation between the analytic Jacobian and central differences."""
        q = np.asarray(q, dtype=float)
        jac = self.jacobian(q)
        fd = np.empty_like(jac)
        for i in range(self.dim_sim):
            e = np.zeros(self.dim_sim)
            e[i] = step
            fd[:, i] = (self.eval(q + e) - self.eval(q - e)) / (2 * step)
        scale = max(np.abs(jac).max(), 1e-300)
        return float(np.abs(jac - fd).max() / scale)


@dataclass(frozen=True)
class NativeMetric:
    """Constant positive-definite metric on the native coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("native metric must be a square matrix")
        if not np.allclose(m, m.T, rtol=0, atol=1e-14 * np.abs(m).max()):
            raise ValueError("native metric must be symmetric")
        if np.linalg.eigvalsh(m).min() <= 0:
            raise ValueError("native metric must be positive definite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_masses(cls, masses, dim_per_particle: int = 3) -> "NativeMetric":
        """Kinetic metric with 2*m_i on the diagonal, so that H = p^T g^-1 p = sum p^2/(2m)."""
        diag = np.repeat(2.0 * np.asarray(masses, dtype=float), dim_per_particle)
        return cls(np.diag(diag))


@dataclass(frozen=True)
class SubbundleSplit:
    """Range covectors (rows) and kernel vectors (columns) of a pulled-back metric."""

    range_covectors: np.ndarray
    kernel_vectors: np.ndarray
    singular_values: np.ndarray
    rank: int

    def annihilation_residual(self) -> float:
        """max |eps(E)| over range covectors eps and kernel vectors E, norm-scaled."""
        if self.range_covectors.size == 0 or self.kernel_vectors.size == 0:
            return 0.0
        prod = self.range_covectors @ self.kernel_vectors
        norms = np.outer(np.linalg.norm(self.range_covectors, axis=1),
                         np.linalg.norm(self.kernel_vectors, axis=0))
        return float(np.abs(prod / norms).max())


def pullback_metric(F: PullbackMap, gN: NativeMetric, q) -> np.ndarray:
    """Return the pulled-back native metric J^T g_N J at q."""
    if gN.dim != F.dim_native:
        raise ValueError(
            f"native metric has dimension {gN.dim}, map has {F.dim_native} native coordinates")
    jac = F.jacobian(np.asarray(q, dtype=float))
    P = jac.T @ gN.matrix @ jac
    return 0.5 * (P + P.T)


def split_subbundles(P: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> SubbundleSplit:
    """Split the coordinate space by the eigenbasis of a symmetric PSD matrix.

    Eigenvectors whose eigenvalue exceeds ``tol * max`` span the range (returned
    as covector rows); the remaining eigenvectors span the kernel (columns).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = np.asarray(P, dtype=float)
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    top = max(w[0], 0.0) if w.size else 0.0
    keep = w > tol * top if top > 0 else np.zeros(w.shape, dtype=bool)
    rank = int(keep.sum())
    return SubbundleSplit(
        range_covectors=V[:, :rank].T.copy(),
        kernel_vectors=V[:, rank:].copy(),
        singular_values=np.clip(w, 0.0, None),
        rank=rank,
    )


def natural_metric(P: np.ndarray, split: SubbundleSplit, lam: float) -> np.ndarray:
    """F-natural metric g_M = P + lam * sum_k kappa_k (x) kappa_k.

    kappa_k are the coordinate duals of the kernel vectors; with an orthonormal
    kernel basis the kernel directions become g_M-orthogonal to the range.
    """
    if lam <= 0:
        raise ValueError("gauge mass lam must be positive")
    K = split.kernel_vectors
    if K.size == 0:
        return np.array(P, dtype=float)
    # coordinate duals of a (possibly non-orthonormal) kernel basis
    duals = np.linalg.pinv(K)
    g = P + lam * duals.T @ duals
    return 0.5 * (g + g.T)


def default_gauge_mass(P: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> float:
    """Largest singular value of P; keeps the null sector at the scale of the range."""
    split = split_subbundles(P, tol)
    if split.rank == 0:
        return 1.0
    return float(split.singular_values[0])


def verification_projector(form: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Form-orthogonal projector onto span(basis columns).

    pi = B (B^T W B)^-1 B^T W. With a metric W, W pi is symmetric; with a
    symplectic form W the subspace must be symplectic and W pi is antisymmetric.
    """
    B = np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    W = np.asarray(form, dtype=float)
    if np.linalg.matrix_rank(B) < B.shape[1]:
        raise ValueError("verification basis is rank deficient")
    gram = B.T @ W @ B
    if np.linalg.matrix_rank(gram) < B.shape[1]:
        raise ValueError("form is degenerate on the spanned subspace")
    return B @ np.linalg.solve(gram, B.T @ W)


def idempotence_residual(pi: np.ndarray) -> float:
    """max |(pi pi - pi)_ij| over all entries."""
    return float(np.abs(pi @ pi - pi).max())


class FNaturalMetric:
    """Position-dependent F-natural metric with a fixed gauge mass.

    The kernel dimension is frozen at construction (constant-rank maps), which
    keeps the range/kernel split smooth along trajectories.
    """

    def __init__(self, F: PullbackMap, gN: NativeMetric, q_ref, lam: float | None = None,
                 tol: float = DEFAULT_RANK_TOL):
        if gN.dim != F.dim_native:
            raise ValueError("native metric and map dimensions differ")
        self.F = F
        self.gN = gN
        P0 = pullback_metric(F, gN, q_ref)
        split = split_subbundles(P0, tol)
        self.rank = split.rank
        self.lam = float(split.singular_values[0]) if lam is None else float(lam)
        if self.lam <= 0:
            raise ValueError("gauge mass lam must be positive")

    @property
    def dim(self) -> int:
        return self.F.dim_sim

    def pullback(self, q) -> np.ndarray:
        """J^T g_N J at q; q may carry leading batch axes."""
        jac = self.F.jacobian(np.asarray(q, dtype=float))
        P = np.swapaxes(jac, -1, -2) @ self.gN.matrix @ jac
        return 0.5 * (P + np.swapaxes(P, -1, -2))

    def _eig(self, P):
        w, V = np.linalg.eigh(P)
        n_ker = self.dim - self.rank
        return w[..., n_ker:], V[..., n_ker:], V[..., :n_ker]

    def split(self, q) -> SubbundleSplit:
        P = self.pullback(q)
        w, Vr, Vk = self._eig(P)
        return SubbundleSplit(Vr.T[::-1].copy(), Vk.copy(),
                              np.concatenate([w[::-1], np.zeros(Vk.shape[1])]), self.rank)

    def matrix(self, q) -> np.ndarray:
        P = self.pullback(q)
        _, _, Vk = self._eig(P)
        return P + self.lam * Vk @ np.swapaxes(Vk, -1, -2)

    def __call__(self, q) -> np.ndarray:
        return self.matrix(q)

    def kernel_vectors(self, q) -> np.ndarray:
        return self._eig(self.pullback(q))[2]

    def with_derivatives(self, q):
        """Return (g, dg, Vk) with dg[..., i, :, :] = d g_M / d q_i (analytic, no finite differences).

        The kernel projector derivative uses the constant-rank identity
        dPi_R = (1 - Pi_R) dP P^+ + P^+ dP (1 - Pi_R). Leading batch axes of q
        are carried through.
        """
        q = np.asarray(q, dtype=float)
        jac, djac = self.F.jacobian_and_derivatives(q)
        Gjac = self.gN.matrix @ jac
        P = np.swapaxes(jac, -1, -2) @ Gjac
        P = 0.5 * (P + np.swapaxes(P, -1, -2))
        half = np.swapaxes(djac, -1, -2) @ Gjac[..., None, :, :]
        dP = half + np.swapaxes(half, -1, -2)
        w, Vr, Vk = self._eig(P)
        PiN = Vk @ np.swapaxes(Vk, -1, -2)
        g = P + self.lam * PiN
        if Vk.shape[-1] == 0:
            return g, dP, Vk
        Pplus = (Vr / w[..., None, :]) @ np.swapaxes(Vr, -1, -2)
        cross = PiN[..., None, :, :] @ dP @ Pplus[..., None, :, :]
        dg = dP - self.lam * (cross + np.swapaxes(cross, -1, -2))
        return g, dg, Vk
