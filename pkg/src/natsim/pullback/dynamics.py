"""Projected stochastic Schrodinger dynamics on an immersed state-space.

Hilbert-space drift and noise vectors are pulled back with J^T and raised
with the pseudo-inverse metric. The Ito drift needs the second-order term
-1/2 g^+ J^T d2psi(sigma, sigma); the Stratonovich (Heun) form needs none.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from ..quantum.channels import LindbladChannel
from ..quantum.sse import record_increments, sse_diffusion, sse_drift, stratonovich_sse_drift
from ..records import IntegrationError, TrajectoryRecord
from .metric import Immersion, musical_solve, realify, reduced_metric
from .mps import (
    assemble,
    complex_jacobian,
    factored_matvec,
    kahler_derivative_contraction,
    real_jacobian,
    rebalance,
    canonical_gauge,
    spinors_to_xi,
    xi_to_spinors,
)

CORRECTIONS = ("auto", "kahler", "second_difference", "directional", "none")
REGAUGES = ("balance", "canonical")


def directional_derivative_contraction(matvec, xi, v, h: float | None = None) -> np.ndarray:
    """[g(xi + h v) v - g(xi - h v) v] / 2h, the full derivative of g along v applied to v."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0:
        return np.zeros_like(v)
    if h is None:
        h = 1e-5 * max(np.linalg.norm(xi), 1.0) / nv
    return (matvec(xi + h * v, v) - matvec(xi - h * v, v)) / (2 * h)


def _dense_matvec(imm: Immersion):
    def matvec(xi, v):
        jac = imm.jacobian(xi)
        return jac.T @ (jac @ v)
    return matvec


def metric_derivative_contraction(imm: Immersion, xi, v, mode: str = "auto",
                                  h: float | None = None) -> np.ndarray:
    """The second-order Ito term J^T d2psi(v, v) (or a variant, by ``mode``).

    ``kahler``: finite differences of the metric matvec along v and iv (needs a
    holomorphic immersion with ``metric_matvec``); ``second_difference``: second
    difference of ``eval``; ``directional``: the full derivative (D_v g) v,
    which also carries a J-contracted term the Ito expansion does not
    produce; ``none``: zero. ``auto`` picks ``kahler`` when available.
    """
    if mode not in CORRECTIONS:
        raise ValueError(f"unknown correction mode {mode!r}; choose from {CORRECTIONS}")
    if mode == "auto":
        mode = "kahler" if imm.metric_matvec is not None else "second_difference"
    if mode == "none":
        return np.zeros(imm.dim_xi)
    if mode == "kahler":
        if imm.metric_matvec is None:
            raise ValueError("kahler correction needs an immersion with metric_matvec")
        return kahler_derivative_contraction(imm.metric_matvec, xi, v, h)
    if mode == "second_difference":
        return imm.second_derivative_contraction(xi, v, h)
    matvec = imm.metric_matvec if imm.metric_matvec is not None else _dense_matvec(imm)
    return directional_derivative_contraction(matvec, xi, v, h)


def projected_ito_increment(imm: Immersion, xi, hilbert_drift, hilbert_diffusions, dt: float, dW,
                            correction: str = "auto", rtol: float = 1e-10) -> np.ndarray:
    """One Ito increment d xi for Hilbert drift mu and noise vectors sigma_k at psi(xi).

    sigma^a_k = g^+ J^T sigma_k and mu^a = g^+ [J^T mu - 1/2 sum_k C(sigma^a_k)]
    with C the metric-derivative contraction selected by ``correction``.
    """
    xi = np.asarray(xi, dtype=float)
    dW = np.atleast_1d(np.asarray(dW, dtype=float))
    if len(hilbert_diffusions) != dW.shape[-1]:
        raise ValueError("one Wiener increment per diffusion vector is required")
    jac = imm.jacobian(xi)
    metric = reduced_metric(imm, xi)
    sigmas = []
    for sigma in hilbert_diffusions:
        sol = musical_solve(metric, jac.T @ realify(sigma), rtol)
        sigmas.append(sol.vector)
    cov = jac.T @ realify(hilbert_drift)
    for s in sigmas:
        cov = cov - 0.5 * metric_derivative_contraction(imm, xi, s, correction)
    mu = musical_solve(metric, cov, rtol).vector
    dxi = mu * dt
    for s, dw in zip(sigmas, dW):
        dxi = dxi + s * dw
    return dxi


def stratonovich_drift_forms(channels: Sequence[LindbladChannel], psi, H=None) -> np.ndarray:
    """Stratonovich drift of the normalized SSE at psi, as a Hilbert vector.

    mu_bar = mu - 1/2 sum_k (D sigma_k)[sigma_k] with the derivative of the
    explicit sigma_k = (A + iB - <A>) psi / sqrt(2 S) taken in closed form. In
    Hilbert coordinates the metric is the identity, so this is also the
    covector of the drift one-form.
    """
    return stratonovich_sse_drift(psi, H, channels)


def projected_stratonovich_step(imm: Immersion, xi, drift: Callable, diffusions: Callable, dt: float,
                                dW, rtol: float = 1e-10) -> np.ndarray:
    """Heun step for d xi = V_0 dt + sum_k V_k o dW_k, V = g^+ J^T (Hilbert vector field).

    ``drift(psi)`` returns the Stratonovich Hilbert drift; ``diffusions(psi)``
    the list of noise vectors.
    """
    dW = np.atleast_1d(np.asarray(dW, dtype=float))

    def fields(x):
        jac = imm.jacobian(x)
        metric = reduced_metric(imm, x)
        psi = imm.eval(x)
        v0 = musical_solve(metric, jac.T @ realify(drift(psi)), rtol).vector
        vk = [musical_solve(metric, jac.T @ realify(s), rtol).vector for s in diffusions(psi)]
        return v0, vk

    xi = np.asarray(xi, dtype=float)
    v0, vk = fields(xi)
    pred = xi + v0 * dt + sum(v * w for v, w in zip(vk, dW))
    p0, pk = fields(pred)
    return xi + 0.5 * (v0 + p0) * dt + sum(0.5 * (v + p) * w for v, p, w in zip(vk, pk, dW))


def batched_pinv(g, tol: float = 1e-10) -> np.ndarray:
    """Pseudo-inverse of symmetric PSD matrices with leading batch axes."""
    w, V = np.linalg.eigh(g)
    top = w[..., -1:]
    inv = np.where(w > tol * top, 1.0 / np.where(w > tol * top, w, 1.0), 0.0)
    return (V * inv[..., None, :]) @ np.swapaxes(V, -1, -2)


@dataclass(frozen=True)
class PullbackModel:
    """Open-system dynamics of a diagonal tensor-network state of n small spins.

    ``channels`` and ``hamiltonian(t)`` act on the dense d^n Hilbert space.
    """

    n: int
    r: int
    d: int
    channels: tuple
    hamiltonian: Callable[[float], np.ndarray | None]

    @property
    def dim_xi(self) -> int:
        return 2 * self.n * self.r * self.d


@dataclass
class _Geometry:
    psi: np.ndarray
    jac: np.ndarray
    gplus: np.ndarray


def _geometry(model: PullbackModel, spinors) -> _Geometry:
    C = complex_jacobian(spinors)
    jac = real_jacobian(C)
    g = np.swapaxes(jac, -1, -2) @ jac
    return _Geometry(assemble(spinors), jac, batched_pinv(0.5 * (g + np.swapaxes(g, -1, -2))))


def _raise(geo: _Geometry, vec):
    """g^+ J^T realify(vec), batched."""
    cov = np.einsum("...ai,...a->...i", geo.jac, realify(vec))
    return np.einsum("...ij,...j->...i", geo.gplus, cov)


def _ito_fields(model, xi, geo, t, correction):
    H = model.hamiltonian(t)
    sig = sse_diffusion(geo.psi, model.channels)
    va = np.stack([_raise(geo, s) for s in sig], axis=0)  # (K, P, dim)
    cov = np.einsum("...ai,...a->...i", geo.jac, realify(sse_drift(geo.psi, H, model.channels)))
    if correction != "none":
        n, r, d = model.n, model.r, model.d

        def matvec(x, v):
            return factored_matvec(xi_to_spinors(x, n, r, d), v)

        xs = np.broadcast_to(xi, va.shape)
        if correction == "kahler":
            corr = kahler_derivative_contraction(matvec, xs, va)
        elif correction == "directional":
            h = 1e-5 * np.linalg.norm(xs, axis=-1, keepdims=True) / np.maximum(
                np.linalg.norm(va, axis=-1, keepdims=True), 1e-300)
            corr = (matvec(xs + h * va, va) - matvec(xs - h * va, va)) / (2 * h)
        else:
            raise ValueError(f"unsupported correction {correction!r} for the ensemble integrator")
        cov = cov - 0.5 * corr.sum(axis=0)
    mu = np.einsum("...ij,...j->...i", geo.gplus, cov)
    return mu, va


def _strat_fields(model, geo, t):
    H = model.hamiltonian(t)
    v0 = _raise(geo, stratonovich_sse_drift(geo.psi, H, model.channels))
    vk = np.stack([_raise(geo, s) for s in sse_diffusion(geo.psi, model.channels)], axis=0)
    return v0, vk


def _expect(op, psi):
    return np.real(np.einsum("...a,ab,...b->...", psi.conj(), op, psi)) / np.sum(np.abs(psi) ** 2, -1)


def integrate_pullback_ensemble(model: PullbackModel, xi0, dt: float, n_steps: int, noise,
                                scheme: str = "ito", correction: str = "kahler",
                                renormalize: bool = True, regauge: str = "balance",
                                record_every: int = 1,
                                observables: Mapping[str, np.ndarray] | None = None,
                                t0: float = 0.0) -> TrajectoryRecord:
    """Integrate a batch of paths xi (P, dim_xi) on the diagonal-state chart.

    ``noise.next()`` must return (P, n_channels) Wiener increments. Samples are
    taken every ``record_every`` steps: coords are (n_samples, P, dim_xi),
    observables are normalized expectations (n_samples, P), and records are
    measurement-record rates averaged over the interval ending at each sample
    (zero at the initial sample). ``meta['norm_deviation']`` holds the largest
    |<psi|psi> - 1| seen before renormalization in each interval. A non-finite
    state raises :class:`IntegrationError` carrying the step index.
    Every step ends by re-gauging (``balance``: equal site norms per branch;
    ``canonical``: two-site left-canonical form), which leaves the state
    unchanged; ``renormalize`` additionally rescales it to unit norm. The
    initial state is always normalized.
    """
    if scheme not in ("ito", "stratonovich"):
        raise ValueError("scheme must be 'ito' or 'stratonovich'")
    if correction not in ("kahler", "directional", "none"):
        raise ValueError("correction must be 'kahler', 'directional' or 'none'")
    if record_every < 1:
        raise ValueError("record_every must be positive")
    if regauge not in REGAUGES:
        raise ValueError(f"regauge must be one of {REGAUGES}")
    n, r, d = model.n, model.r, model.d
    gauge = canonical_gauge if regauge == "canonical" else rebalance
    xi = np.array(xi0, dtype=float)
    if xi.ndim != 2 or xi.shape[1] != model.dim_xi:
        raise ValueError(f"xi0 must have shape (paths, {model.dim_xi})")
    observables = dict(observables or {})
    K = len(model.channels)
    n_samples = n_steps // record_every + 1
    P = xi.shape[0]
    obs = {k: np.empty((n_samples, P)) for k in observables}
    coords = np.empty((n_samples,) + xi.shape)
    recs = {ch.name or f"ch{i}": np.zeros((n_samples, P)) for i, ch in enumerate(model.channels)}
    rec_names = list(recs)
    norm_dev = np.zeros((n_samples, P))
    times = t0 + dt * record_every * np.arange(n_samples)

    def sample(idx, psi):
        for name, op in observables.items():
            obs[name][idx] = _expect(op, psi)

    def finish_step(x, rescale=renormalize):
        sp = gauge(xi_to_spinors(x, n, r, d))
        nrm = np.sum(np.abs(assemble(sp)) ** 2, axis=-1)
        if rescale:
            sp = sp * nrm[:, None, None, None] ** (-0.5 / n)
        return spinors_to_xi(sp), nrm

    xi, _ = finish_step(xi, rescale=True)
    sample(0, assemble(xi_to_spinors(xi, n, r, d)))
    coords[0] = xi
    acc = np.zeros((P, K))
    dev = np.zeros(P)
    for step in range(n_steps):
        t = t0 + step * dt
        dW = noise.next()
        geo = _geometry(model, xi_to_spinors(xi, n, r, d))
        acc += record_increments(geo.psi, model.channels, dt, dW)
        if scheme == "ito":
            mu, va = _ito_fields(model, xi, geo, t, correction)
            new = xi + mu * dt + np.einsum("kpi,pk->pi", va, dW)
        else:
            v0, vk = _strat_fields(model, geo, t)
            pred = xi + v0 * dt + np.einsum("kpi,pk->pi", vk, dW)
            pgeo = _geometry(model, xi_to_spinors(pred, n, r, d))
            p0, pk = _strat_fields(model, pgeo, t + dt)
            new = xi + 0.5 * (v0 + p0) * dt + 0.5 * np.einsum("kpi,pk->pi", vk + pk, dW)
        if not np.all(np.isfinite(new)):
            raise IntegrationError("pullback trajectory left the finite domain", step)
        new, nrm = finish_step(new)
        dev = np.maximum(dev, np.abs(nrm - 1.0))
        xi = new
        if (step + 1) % record_every == 0:
            idx = (step + 1) // record_every
            sample(idx, assemble(xi_to_spinors(xi, n, r, d)))
            coords[idx] = xi
            for k, name in enumerate(rec_names):
                recs[name][idx] = acc[:, k] / (record_every * dt)
            norm_dev[idx] = dev
            acc[:] = 0.0
            dev[:] = 0.0
    return TrajectoryRecord(
        t=times, coords=coords, observables=obs, records=recs,
        meta={"scheme": scheme, "correction": correction, "renormalize": renormalize,
              "norm_deviation": norm_dev},
    )
