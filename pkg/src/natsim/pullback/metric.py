"""Immersions into real Hilbert coordinates, their pulled-back metric and musical solves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

DENSE_LIMIT = 512


def realify(psi: np.ndarray) -> np.ndarray:
    """Complex (..., d) -> real (..., 2d) as [Re; Im]."""
    psi = np.asarray(psi)
    return np.concatenate([psi.real, psi.imag], axis=-1)


def complexify(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`realify`."""
    x = np.asarray(x, dtype=float)
    half = x.shape[-1] // 2
    return x[..., :half] + 1j * x[..., half:]


@dataclass(frozen=True)
class Immersion:
    """Parametrized family psi(xi) of Hilbert vectors.

    ``eval`` returns complex psi; ``jacobian`` returns the real matrix of
    d[Re psi; Im psi] / d xi, shape (dim_hilbert, dim_xi), where dim_hilbert
    counts real coordinates. Holomorphic families (psi depends on complex
    coordinates z with xi = [Re z; Im z]) may supply ``metric_matvec``
    (xi, v) -> g v, which the drift correction then differentiates.
    """

    dim_xi: int
    dim_hilbert: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    name: str = "immersion"
    metric_matvec: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def eval_real(self, xi):
        return realify(self.eval(xi))

    def check_jacobian(self, xi, step: float = 1e-6) -> float:
        xi = np.asarray(xi, dtype=float)
        jac = self.jacobian(xi)
        fd = np.stack([(self.eval_real(xi + e) - self.eval_real(xi - e)) / (2 * step)
                       for e in np.eye(self.dim_xi) * step], axis=-1)
        return float(np.abs(jac - fd).max() / max(np.abs(jac).max(), 1e-300))

    def second_derivative_contraction(self, xi, v, h: float | None = None) -> np.ndarray:
        """J^T d2psi(v, v) from a central second difference of ``eval``."""
        xi = np.asarray(xi, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.zeros(self.dim_xi)
        if h is None:
            h = 1e-4 * max(np.linalg.norm(xi), 1.0) / nv
        d2 = (self.eval_real(xi + h * v) - 2 * self.eval_real(xi) + self.eval_real(xi - h * v)) / h ** 2
        return self.jacobian(xi).T @ d2


def identity_immersion(dim: int) -> Immersion:
    """xi = [Re psi; Im psi] for a dim-dimensional Hilbert space; g is the identity."""
    eye = np.eye(2 * dim)
    return Immersion(2 * dim, 2 * dim, complexify, lambda xi: eye.copy(), f"identity({dim})",
                     metric_matvec=lambda xi, v: np.array(v, dtype=float))


@dataclass
class ReducedMetric:
    """Pulled-back metric g = J^T J at a point, with its pseudo-inverse.

    Eigenvalues at or below ``tol * max`` count as null directions.
    """

    g: np.ndarray
    tol: float = 1e-10
    _eig: tuple = field(init=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        self.g = 0.5 * (g + g.T)
        w, V = np.linalg.eigh(self.g)
        self._eig = (w, V)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def rank(self) -> int:
        w = self._eig[0]
        return int(np.sum(w > self.tol * max(w.max(), 0.0))) if w.size and w.max() > 0 else 0

    @property
    def pinv(self) -> np.ndarray:
        w, V = self._eig
        keep = w > self.tol * max(w.max(), 0.0) if w.max() > 0 else np.zeros(w.shape, bool)
        inv = np.zeros_like(w)
        inv[keep] = 1.0 / w[keep]
        return (V * inv) @ V.T

    @property
    def null_space(self) -> np.ndarray:
        return self._eig[1][:, : self.dim - self.rank]

    def matvec(self, v):
        return self.g @ v

    def solve(self, covector):
        return self.pinv @ covector


def reduced_metric(imm: Immersion, xi, tol: float = 1e-10) -> ReducedMetric:
    """g_K = J^T J (the Hilbert metric is the identity in [Re; Im] coordinates)."""
    jac = imm.jacobian(np.asarray(xi, dtype=float))
    return ReducedMetric(jac.T @ jac, tol)


@dataclass(frozen=True)
class MusicalSolution:
    vector: np.ndarray
    residual: float  # |g v - covector| / |covector|
    converged: bool
    in_range: bool
    method: str
    iterations: int = 0


def musical_solve(metric, covector, rtol: float = 1e-10, dim: int | None = None,
                  trace: float | None = None, method: str = "auto") -> MusicalSolution:
    """Minimal-norm v with g v = covector (raising an index).

    ``metric`` is a :class:`ReducedMetric` or a matvec callable (then ``dim`` is
    required). Dense pseudo-inverse up to 512 coordinates, otherwise conjugate
    gradients on g + shift, shift = 1e-12 trace(g) / dim, capped at 10 dim
    iterations. A covector outside the range of g gets the least-squares
    answer and ``in_range=False``.
    """
    b = np.asarray(covector, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if isinstance(metric, ReducedMetric):
        matvec, n = metric.matvec, metric.dim
    else:
        if dim is None:
            raise ValueError("dim is required for a matrix-free metric")
        matvec, n = metric, dim
    if bnorm == 0:
        return MusicalSolution(np.zeros(n), 0.0, True, True, "trivial")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "cg"
    if method == "dense":
        if not isinstance(metric, ReducedMetric):
            metric = ReducedMetric(np.stack([matvec(e) for e in np.eye(n)], axis=1))
        v = metric.solve(b)
        res = float(np.linalg.norm(metric.matvec(v) - b)) / bnorm
        return MusicalSolution(v, res, True, res <= max(rtol, 1e-8), "dense")
    if trace is None:
        # Hutchinson estimate with fixed Rademacher probes
        probes = np.random.default_rng(0).choice([-1.0, 1.0], size=(8, n))
        trace = float(np.mean([z @ matvec(z) for z in probes]))
    shift = 1e-12 * trace / n
    op = LinearOperator((n, n), matvec=lambda x: matvec(x) + shift * x, dtype=float)
    count = [0]
    v, info = cg(op, b, rtol=rtol, atol=0.0, maxiter=10 * n,
                 callback=lambda _: count.__setitem__(0, count[0] + 1))
    res = float(np.linalg.norm(matvec(v) - b)) / bnorm
    return MusicalSolution(v, res, info == 0, res <= max(10 * rtol, 1e-8), "cg", count[0])
