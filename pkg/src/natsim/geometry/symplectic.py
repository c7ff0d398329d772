"""Canonical Hamiltonian flow and symplectic trajectory integration on F-natural phase spaces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
import numpy.polynomial.polynomial as P

from ..records import IntegrationError, TrajectoryRecord
from .core import FNaturalMetric, PullbackMap, verification_projector

# Yoshida triple-jump coefficients for the fourth-order midpoint composition
_CBRT2 = 2.0 ** (1.0 / 3.0)
_YOSHIDA = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))

_GAUSS_STAGES = {"midpoint": 1, "gauss4": 2, "gauss6": 3, "gauss8": 4}
METHODS = ("midpoint", "gauss4", "gauss6", "gauss8", "midpoint4", "rk4")


@lru_cache(maxsize=None)
def gauss_legendre_tableau(stages: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Butcher tableau (A, b, c) of the s-stage Gauss-Legendre collocation method (order 2s)."""
    x, _ = np.polynomial.legendre.leggauss(stages)
    c = 0.5 * (x + 1.0)
    A = np.empty((stages, stages))
    b = np.empty(stages)
    for j in range(stages):
        others = np.delete(c, j)
        basis = P.Polynomial.fromroots(others) if others.size else P.Polynomial([1.0])
        basis = basis / np.prod(c[j] - others)
        integral = basis.integ()
        A[:, j] = integral(c) - integral(0.0)
        b[j] = integral(1.0) - integral(0.0)
    return A, b, c


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0


class GeodesicHamiltonian:
    """H(q, p) = p^T g_M(q)^-1 p + V(q) on an F-natural metric.

    With g_N = 2m (the kinetic metric read off from H = p^2/(2m)) this is the
    native kinetic energy pulled back; ``potential`` and ``potential_grad``
    add an optional configuration-space potential.
    """

    def __init__(self, metric: FNaturalMetric,
                 potential: Callable[[np.ndarray], float] | None = None,
                 potential_grad: Callable[[np.ndarray], np.ndarray] | None = None):
        if (potential is None) != (potential_grad is None):
            raise ValueError("potential and potential_grad must be given together")
        self.metric = metric
        self.potential = potential
        self.potential_grad = potential_grad

    def kinetic(self, q, p) -> float:
        g = self.metric.matrix(q)
        return float(p @ np.linalg.solve(g, p))

    def energy(self, q, p) -> float:
        e = self.kinetic(q, p)
        if self.potential is not None:
            e += float(self.potential(q))
        return e

    def gradient(self, q, p):
        """Return (dH/dq, dH/dp); q and p may share leading batch axes."""
        g, dg, _ = self.metric.with_derivatives(q)
        u = np.linalg.solve(g, np.asarray(p, dtype=float)[..., None])[..., 0]
        dHdp = 2.0 * u
        dHdq = -np.einsum("...iab,...a,...b->...i", dg, u, u)
        if self.potential_grad is not None:
            dHdq = dHdq + self.potential_grad(q)
        return dHdq, dHdp

    def gauge_momenta(self, q, p) -> np.ndarray:
        """Components of p along the (orthonormal) kernel vectors at q."""
        return self.metric.kernel_vectors(q).T @ p


class FunctionHamiltonian:
    """Hamiltonian given directly by an energy function and its gradient.

    Unless ``batched`` is set, the gradient is called once per point when the
    integrator evaluates several stages at a time.
    """

    def __init__(self, energy: Callable, gradient: Callable, batched: bool = False):
        self._energy = energy
        self._gradient = gradient
        self.batched = batched

    def energy(self, q, p) -> float:
        return float(self._energy(q, p))

    def gradient(self, q, p):
        q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
        if self.batched or q.ndim == 1:
            return self._gradient(q, p)
        parts = [self._gradient(qi, pi) for qi, pi in zip(q, p)]
        return np.array([a for a, _ in parts]), np.array([b for _, b in parts])


def geodesic_hamiltonian(g: np.ndarray, q, p) -> float:
    """Kinetic energy p^T g^-1 p for a metric matrix already evaluated at q."""
    g = np.asarray(g, dtype=float)
    if np.linalg.cond(g) > 1e14:
        raise np.linalg.LinAlgError("metric is singular")
    return float(p @ np.linalg.solve(g, p))


def hamiltonian_flow(H, state: PhaseState) -> tuple[np.ndarray, np.ndarray]:
    """Canonical flow (qdot, pdot) = (dH/dp, -dH/dq)."""
    dHdq, dHdp = H.gradient(np.asarray(state.q, float), np.asarray(state.p, float))
    return np.asarray(dHdp, float), -np.asarray(dHdq, float)


@lru_cache(maxsize=None)
def _stage_extrapolation(stages: int, depth: int) -> np.ndarray:
    """Lagrange weights carrying the stage slopes of the last ``depth`` steps to the next stages.

    Rows index the new stages; columns run over the stored slopes, most recent
    step first.
    """
    _, _, c = gauss_legendre_tableau(stages)
    nodes = np.concatenate([c - m for m in range(depth)])
    E = np.empty((stages, nodes.size))
    for j in range(nodes.size):
        others = np.delete(nodes, j)
        E[:, j] = np.prod((1.0 + c[:, None] - others[None, :]) / (nodes[j] - others), axis=1)
    return E


def _gauss_step(H, q, p, dt, stages, tol, max_iter, guess=None, rate=1.0):
    """One collocation step by fixed-point iteration on the stage slopes.

    Iteration stops once the estimated remaining error, err * rate / (1 - rate)
    with ``rate`` the contraction factor, drops below ``tol``. Returns
    (q1, p1, stage slopes, iterations, measured contraction or None).
    """
    A, b, _ = gauss_legendre_tableau(stages)
    if guess is None:
        dHdq, dHdp = H.gradient(q, p)
        kq = np.repeat(dHdp[None, :], stages, axis=0)
        kp = np.repeat(-dHdq[None, :], stages, axis=0)
    else:
        kq, kp = guess
    scale = tol * (1.0 + max(np.abs(q).max(), np.abs(p).max()))
    prev_err, measured = None, None
    for it in range(1, max_iter + 1):
        dHdq, dHdp = H.gradient(q + dt * (A @ kq), p + dt * (A @ kp))
        err = abs(dt) * max(np.abs(dHdp - kq).max(), np.abs(dHdq + kp).max())
        kq, kp = dHdp, -dHdq
        if prev_err is not None and prev_err > 0:
            measured = max(measured or 0.0, err / prev_err)
            rate = measured
        prev_err = err
        if err * min(1.0, rate / max(1.0 - rate, 1e-300)) <= scale:
            break
    else:
        raise IntegrationError("collocation iteration did not converge", 0)
    return q + dt * (b @ kq), p + dt * (b @ kp), (kq, kp), it, measured


class _GaussStepper:
    """Collocation stepper seeded by extrapolating the slopes of recent steps.

    The contraction factor measured on earlier steps lets well-predicted steps
    finish after a single gradient evaluation.
    """

    def __init__(self, stages, tol, max_iter, depth=2):
        self.stages, self.tol, self.max_iter, self.depth = stages, tol, max_iter, depth
        self.history = []  # (kq, kp) per step, most recent first
        self.rate = 1.0
        self.iterations = 0

    def __call__(self, H, q, p, dt):
        guess = None
        if self.history:
            E = _stage_extrapolation(self.stages, len(self.history))
            guess = (E @ np.concatenate([h[0] for h in self.history]),
                     E @ np.concatenate([h[1] for h in self.history]))
        q, p, slopes, it, measured = _gauss_step(H, q, p, dt, self.stages, self.tol,
                                                 self.max_iter, guess, self.rate)
        if measured is not None:
            self.rate = min(measured, 1.0)
        self.history = [slopes] + self.history[:self.depth - 1]
        self.iterations += it
        return q, p


def _rk4_step(H, q, p, dt):
    def f(q, p):
        dHdq, dHdp = H.gradient(q, p)
        return dHdp, -dHdq

    k1 = f(q, p)
    k2 = f(q + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1])
    k3 = f(q + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1])
    k4 = f(q + dt * k3[0], p + dt * k3[1])
    return (q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def symplectic_step(H, q, p, dt: float, method: str = "midpoint",
                    tol: float = 1e-13, max_iter: int = 100):
    """Advance (q, p) by one step.

    ``midpoint`` is the implicit midpoint rule and ``gauss4``/``gauss6``/``gauss8``
    are the higher-order Gauss-Legendre collocation methods; all of them are
    symplectic and conserve quadratic invariants exactly. ``midpoint4`` composes
    three midpoint steps (Yoshida); ``rk4`` is a non-symplectic diagnostic.
    """
    if method in _GAUSS_STAGES:
        return _gauss_step(H, q, p, dt, _GAUSS_STAGES[method], tol, max_iter)[:2]
    if method == "midpoint4":
        for c in _YOSHIDA:
            q, p = _gauss_step(H, q, p, c * dt, 1, tol, max_iter)[:2]
        return q, p
    if method == "rk4":
        return _rk4_step(H, q, p, dt)
    raise ValueError(f"unknown integrator {method!r}")


def integrate_symplectic(H, state0: PhaseState, dt: float, n_steps: int,
                         observables: Mapping[str, Callable] | None = None,
                         method: str = "midpoint", tol: float = 1e-13,
                         record_every: int = 1,
                         stop: Callable[[np.ndarray, np.ndarray, float], bool] | None = None,
                         ) -> TrajectoryRecord:
    """Integrate Hamilton's equations and record energy, gauge momenta and observables.

    ``stop(q, p, t)`` may end the run early (checked after every step).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q = np.array(state0.q, dtype=float)
    p = np.array(state0.p, dtype=float)
    t = float(state0.t)
    observables = dict(observables or {})
    has_gauge = hasattr(H, "gauge_momenta")

    ts, qs, ps = [], [], []
    obs: dict[str, list] = {"energy": []}
    if has_gauge:
        obs["gauge_momentum"] = []
    for name in observables:
        obs[name] = []

    def record():
        ts.append(t)
        qs.append(q.copy())
        ps.append(p.copy())
        obs["energy"].append(H.energy(q, p))
        if has_gauge:
            obs["gauge_momentum"].append(float(np.linalg.norm(H.gauge_momenta(q, p))))
        for name, fn in observables.items():
            obs[name].append(fn(q, p))

    if method in _GAUSS_STAGES:
        advance = _GaussStepper(_GAUSS_STAGES[method], tol, max_iter=100)
    elif method in METHODS:
        def advance(H, q, p, dt):
            return symplectic_step(H, q, p, dt, method, tol)
    else:
        raise ValueError(f"unknown integrator {method!r}")

    record()
    step = 0
    for step in range(1, n_steps + 1):
        q, p = advance(H, q, p, dt)
        t = state0.t + step * dt
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise IntegrationError("non-finite phase state", step)
        done = stop is not None and stop(q, p, t)
        if step % record_every == 0 or done or step == n_steps:
            record()
        if done:
            break
    return TrajectoryRecord(
        t=np.array(ts), coords=np.array(qs), momenta=np.array(ps),
        observables={k: np.array(v) for k, v in obs.items()},
        meta={"method": method, "dt": dt, "steps": step,
              "iterations": getattr(advance, "iterations", None)},
    )


def pushforward_trajectory(F: PullbackMap, traj: TrajectoryRecord) -> TrajectoryRecord:
    """Native-coordinate series x(t) = F(q(t)); observables and metadata are carried over."""
    x = F.eval(np.asarray(traj.coords))
    return TrajectoryRecord(t=traj.t.copy(), coords=np.asarray(x), momenta=None,
                            observables=dict(traj.observables), records=dict(traj.records),
                            meta=dict(traj.meta, pushed_forward=F.name))


def phase_lift_jacobian(metric: FNaturalMetric, q, p) -> np.ndarray:
    """Jacobian of the lift (q, p) -> (x, p_x) = (F(q), g_N J g_M^-1 p).

    p_x is the native momentum of the velocity x' = J q' with q' = 2 g_M^-1 p.
    Rows index (x, p_x), columns (q, p).
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    g, dg, _ = metric.with_derivatives(q)
    jac, djac = metric.F.jacobian_and_derivatives(q)
    G = metric.gN.matrix
    ginv = np.linalg.inv(g)
    u = ginv @ p
    # column i: G (dJ_i u - J g^-1 dg_i u)
    dpx_dq = G @ ((djac @ u).T - jac @ ginv @ (dg @ u).T)
    dpx_dp = G @ jac @ ginv
    n, d = jac.shape
    return np.block([[jac, np.zeros((n, d))], [dpx_dq, dpx_dp]])


def native_phase_projector(metric: FNaturalMetric, q, p, form: str = "symplectic",
                           tol: float = 1e-10):
    """Projector on native phase space onto the tangent image of the simulation phase space.

    The basis is the column range of :func:`phase_lift_jacobian`. ``form`` picks
    the canonical symplectic form or the kinetic metric blockdiag(g_N, g_N^-1).
    Returns (pi, basis).
    """
    lift = phase_lift_jacobian(metric, q, p)
    U, s, _ = np.linalg.svd(lift)
    rank = int(np.sum(s > tol * s[0]))
    basis = U[:, :rank]
    n = metric.F.dim_native
    G = metric.gN.matrix
    if form == "symplectic":
        W = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    elif form == "metric":
        W = np.block([[G, np.zeros((n, n))], [np.zeros((n, n)), np.linalg.inv(G)]])
    else:
        raise ValueError(f"unknown form {form!r}")
    return verification_projector(W, basis), basis
