"""Diagonal tensor-network states: rank-r sums of spinor products.

psi = sum_k phi_1^(k) (x) phi_2^(k) (x) ... (x) phi_n^(k), site 1 most significant.
Spinor arrays have shape (..., n, r, d) and the real coordinates are
xi = [Re z; Im z] with z the spinors flattened over (site, branch, component).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metric import Immersion, complexify, realify

_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


class MultiplicationCounter:
    """Tally of scalar multiplications performed by :func:`factored_matvec`."""

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += int(n)


def spinors_to_xi(spinors) -> np.ndarray:
    spinors = np.asarray(spinors, dtype=complex)
    batch = spinors.shape[:-3]
    return realify(spinors.reshape(batch + (-1,)))


def xi_to_spinors(xi, n: int, r: int, d: int) -> np.ndarray:
    z = complexify(xi)
    return z.reshape(z.shape[:-1] + (n, r, d))


def _partial_products(spinors):
    """left[j]: (..., r, d^j) product of sites < j (j = 0..n); right[j]: sites > j (j < n)."""
    n, r, d = spinors.shape[-3:]
    batch = spinors.shape[:-3]
    left = [np.ones(batch + (r, 1), dtype=complex)]
    for j in range(n):
        nxt = left[-1][..., :, None] * spinors[..., j, :, None, :]
        left.append(nxt.reshape(batch + (r, -1)))
    suffix = [np.ones(batch + (r, 1), dtype=complex)]  # suffix[0] = sites >= n
    for j in range(n - 1, 0, -1):
        nxt = spinors[..., j, :, :, None] * suffix[-1][..., :, None, :]
        suffix.append(nxt.reshape(batch + (r, -1)))
    return left, suffix[::-1]


def assemble(spinors) -> np.ndarray:
    """Dense psi of dimension d^n (keep n small)."""
    spinors = np.asarray(spinors, dtype=complex)
    left, _ = _partial_products(spinors)
    return left[-1].sum(axis=-2)


def complex_jacobian(spinors) -> np.ndarray:
    """Dense d psi / d z, shape (..., d^n, n r d); psi is holomorphic in z."""
    spinors = np.asarray(spinors, dtype=complex)
    n, r, d = spinors.shape[-3:]
    batch = spinors.shape[:-3]
    left, right = _partial_products(spinors)
    eye = np.eye(d)
    cols = []
    for j in range(n):
        # T[..., a, s', b, k, s] = left[k, a] delta(s', s) right[k, b]
        t = np.einsum("...ka,ps,...kb->...apbks", left[j], eye, right[j])
        cols.append(t.reshape(batch + (d ** n, r * d)))
    return np.concatenate(cols, axis=-1)


def real_jacobian(C) -> np.ndarray:
    """Real Jacobian of [Re psi; Im psi] in [Re z; Im z] for a holomorphic Jacobian C."""
    top = np.concatenate([C.real, -C.imag], axis=-1)
    bottom = np.concatenate([C.imag, C.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def _overlaps(a, b):
    """o[..., i, k, m] = <a_i^(k) | b_i^(m)> over the spinor component."""
    return np.einsum("...iks,...ims->...ikm", a.conj(), b)


def factored_matvec(spinors, v, counter: MultiplicationCounter | None = None) -> np.ndarray:
    """g v for the pulled-back metric of a diagonal tensor-network state, without dense psi.

    ``spinors`` (..., n, r, d); ``v`` real (..., 2 n r d). Cost is linear in n:
    per-site pair overlaps, division-free prefix/suffix products and their
    first-order (one tangent factor) companions.
    """
    spinors = np.asarray(spinors, dtype=complex)
    n, r, d = spinors.shape[-3:]
    batch = spinors.shape[:-3]
    s = xi_to_spinors(v, n, r, d)
    o = _overlaps(spinors, spinors)
    w = _overlaps(spinors, s)
    shape = batch + (r, r)
    A = np.empty(batch + (n, r, r), dtype=complex)
    dA = np.empty_like(A)
    B = np.empty_like(A)
    dB = np.empty_like(A)
    a, da = np.ones(shape, dtype=complex), np.zeros(shape, dtype=complex)
    for j in range(n):
        A[..., j, :, :], dA[..., j, :, :] = a, da
        a, da = a * o[..., j, :, :], da * o[..., j, :, :] + a * w[..., j, :, :]
    b, db = np.ones(shape, dtype=complex), np.zeros(shape, dtype=complex)
    for j in range(n - 1, -1, -1):
        B[..., j, :, :], dB[..., j, :, :] = b, db
        b, db = b * o[..., j, :, :], db * o[..., j, :, :] + b * w[..., j, :, :]
    diag = A * B
    cross = dA * B + A * dB
    out = (np.einsum("...jkm,...jms->...jks", diag, s)
           + np.einsum("...jkm,...jms->...jks", cross, spinors))
    if counter is not None:
        per = n * r * r
        counter.add(int(np.prod(batch, dtype=int)) * (2 * per * d + 6 * per + 3 * per + 2 * per * d))
    return realify(out.reshape(batch + (-1,)))


def kahler_derivative_contraction(matvec, xi, v, h: float | None = None) -> np.ndarray:
    """J^T d2psi(v, v) for a holomorphic family, from finite differences of g.

    With s the complex tangent of v, (D_s G) s - i (D_{is} G) s = 2 C^H psi''(s, s),
    so the two directional central differences of ``matvec`` isolate the
    second-derivative term; the extra J-contracted piece of D_s G cancels.
    Leading batch axes of xi and v are carried through; h defaults to
    1e-5 |xi| / |v| per batch member.
    """
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    half = v.shape[-1] // 2
    iv = np.concatenate([-v[..., half:], v[..., :half]], axis=-1)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    if h is None:
        h = 1e-5 * np.linalg.norm(xi, axis=-1, keepdims=True) / np.where(nv > 0, nv, 1.0)
    h = np.asarray(h, dtype=float)
    if h.ndim < xi.ndim:
        h = h.reshape(h.shape + (1,) * (xi.ndim - h.ndim))
    pts = np.stack([xi + h * v, xi - h * v, xi + h * iv, xi - h * iv], axis=0)
    gv = matvec(pts, np.broadcast_to(v, pts.shape))
    real_dir = (gv[0] - gv[1]) / (2 * h)
    imag_dir = (gv[2] - gv[3]) / (2 * h)
    # realify(-i (a + ib)) = [b; -a]
    rot = np.concatenate([imag_dir[..., half:], -imag_dir[..., :half]], axis=-1)
    return np.where(nv > 0, 0.5 * (real_dir + rot), 0.0)


@dataclass(frozen=True)
class DiagonalMPS:
    """Rank-r diagonal tensor-network state of n spins of size d = 2j + 1."""

    spinors: np.ndarray

    def __post_init__(self):
        sp = np.asarray(self.spinors, dtype=complex)
        if sp.ndim != 3:
            raise ValueError("spinors must have shape (n, r, d)")
        object.__setattr__(self, "spinors", sp)

    @property
    def n(self) -> int:
        return self.spinors.shape[0]

    @property
    def r(self) -> int:
        return self.spinors.shape[1]

    @property
    def d(self) -> int:
        return self.spinors.shape[2]

    @property
    def j(self) -> float:
        return (self.d - 1) / 2

    @property
    def dim_xi(self) -> int:
        return 2 * self.spinors.size

    @classmethod
    def random(cls, n: int, r: int, rng: np.random.Generator, d: int = 2) -> "DiagonalMPS":
        sp = rng.standard_normal((n, r, d)) + 1j * rng.standard_normal((n, r, d))
        return cls(sp / np.sqrt(2 * d))

    @classmethod
    def from_xi(cls, xi, n: int, r: int, d: int = 2) -> "DiagonalMPS":
        return cls(xi_to_spinors(xi, n, r, d))

    @property
    def xi(self) -> np.ndarray:
        return spinors_to_xi(self.spinors)

    def assemble(self) -> np.ndarray:
        if self.n > 20:
            raise ValueError("dense assembly limited to 20 sites")
        return assemble(self.spinors)

    def complex_jacobian(self) -> np.ndarray:
        return complex_jacobian(self.spinors)

    def jacobian(self) -> np.ndarray:
        return real_jacobian(self.complex_jacobian())

    def matvec(self, v, counter: MultiplicationCounter | None = None) -> np.ndarray:
        return factored_matvec(self.spinors, v, counter)

    def norm2(self) -> float:
        """<psi|psi> from overlaps, no dense assembly."""
        o = _overlaps(self.spinors, self.spinors)
        return float(np.real(np.prod(o, axis=0).sum()))

    def normalized(self) -> "DiagonalMPS":
        return DiagonalMPS(self.spinors * self.norm2() ** (-0.5 / self.n))

    def rebalanced(self) -> "DiagonalMPS":
        """Equalize site norms within each branch (same psi)."""
        return DiagonalMPS(rebalance(self.spinors))

    def immersion(self) -> Immersion:
        return mps_immersion(self.n, self.r, self.d)

    def bipartition_ranks(self, tol: float = 1e-10) -> list[int]:
        """Schmidt rank across each cut (first c sites | rest), c = 1..n-1."""
        psi = self.assemble()
        ranks = []
        for c in range(1, self.n):
            sv = np.linalg.svd(psi.reshape(self.d ** c, -1), compute_uv=False)
            ranks.append(int(np.sum(sv > tol * sv[0])))
        return ranks

    def bloch_vectors(self) -> np.ndarray:
        return bloch_vectors(self)


def rebalance(spinors) -> np.ndarray:
    """Rescale each branch's site spinors to a common norm, leaving psi unchanged."""
    spinors = np.asarray(spinors, dtype=complex)
    norms = np.linalg.norm(spinors, axis=-1)  # (..., n, r)
    safe = np.where(norms > 0, norms, 1.0)
    target = np.exp(np.mean(np.log(safe), axis=-2, keepdims=True))
    return spinors * (target / safe)[..., None]


def canonical_gauge(spinors) -> np.ndarray:
    """Two-site re-gauge to left-canonical form: phi_1^(k) = u_k, phi_2^(k) = s_k v_k.

    psi = sum_k s_k u_k (x) v_k is the Schmidt decomposition, so psi is
    unchanged (its Schmidt rank is at most r). The first-site spinors are
    orthonormal, which bounds the nonzero metric eigenvalues below by 1 even
    at product states, where an orthogonal split with a vanishing branch would
    make the chart singular.
    """
    spinors = np.asarray(spinors, dtype=complex)
    n, r, d = spinors.shape[-3:]
    if n != 2:
        raise ValueError("the canonical gauge is defined for two-site states")
    mat = np.einsum("...ka,...kb->...ab", spinors[..., 0, :, :], spinors[..., 1, :, :])
    U, sv, Vh = np.linalg.svd(mat)
    k = min(r, d)
    out = np.zeros_like(spinors)
    out[..., 0, :k, :] = np.swapaxes(U[..., :, :k], -1, -2)
    out[..., 1, :k, :] = Vh[..., :k, :] * sv[..., :k, None]
    return out


def mps_immersion(n: int, r: int, d: int = 2) -> Immersion:
    """Immersion xi -> psi for diagonal states with fixed (n, r, d); holomorphic in z."""
    dim_xi = 2 * n * r * d

    def evaluate(xi):
        return assemble(xi_to_spinors(xi, n, r, d))

    def jacobian(xi):
        return real_jacobian(complex_jacobian(xi_to_spinors(xi, n, r, d)))

    def matvec(xi, v):
        return factored_matvec(xi_to_spinors(xi, n, r, d), v)

    return Immersion(dim_xi, 2 * d ** n, evaluate, jacobian, f"diagonal_mps(n={n}, r={r}, d={d})",
                     metric_matvec=matvec)


def bloch_vectors(state: DiagonalMPS) -> np.ndarray:
    """Unit Bloch vectors <phi|sigma|phi> / <phi|phi> of a rank-1 spin-1/2 product state."""
    if state.r != 1:
        raise ValueError("Bloch vectors are defined for rank-1 (product) states only")
    if state.d != 2:
        raise ValueError("Bloch vectors require spin-1/2 sites")
    phi = state.spinors[:, 0, :]
    num = np.einsum("is,ast,it->ia", phi.conj(), _PAULI, phi).real
    return num / np.sum(np.abs(phi) ** 2, axis=-1)[:, None]
