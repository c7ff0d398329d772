"""Generic Ito and Stratonovich (Heun) stepping for vector SDEs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..records import TrajectoryRecord


@dataclass(frozen=True)
class SDEProblem:
    """dx = drift(x, t) dt + sum_k diffusion[k](x, t) dW_k.

    Callables may receive batched states with leading path axes. The optional
    ``projection_hook`` is applied to the state after every step.
    """

    drift: Callable
    diffusion: Sequence[Callable]
    projection_hook: Callable | None = None

    @property
    def n_channels(self) -> int:
        return len(self.diffusion)


def _finish(prob: SDEProblem, x):
    if prob.projection_hook is not None:
        x = prob.projection_hook(x)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("SDE step produced a non-finite state")
    return x


def _noise_sum(sigmas, dW):
    dW = np.asarray(dW)
    total = 0.0
    for k, s in enumerate(sigmas):
        w = dW[..., k]
        total = total + s * (w[..., None] if np.ndim(w) else w)
    return total


def ito_step(prob: SDEProblem, x, t: float, dt: float, dW):
    """Euler-Maruyama step x + mu dt + sum_k sigma_k dW_k; ``dW`` has the channel axis last."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x)
    sigmas = [s(x, t) for s in prob.diffusion]
    return _finish(prob, x + prob.drift(x, t) * dt + _noise_sum(sigmas, dW))


def stratonovich_step(prob: SDEProblem, x, t: float, dt: float, dW):
    """Heun predictor-corrector step for a Stratonovich SDE.

    The predictor is a full Euler step; the corrector averages drift and
    diffusion over the two endpoints.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x)
    mu0 = prob.drift(x, t)
    sig0 = [s(x, t) for s in prob.diffusion]
    pred = x + mu0 * dt + _noise_sum(sig0, dW)
    mu1 = prob.drift(pred, t + dt)
    sig1 = [s(pred, t + dt) for s in prob.diffusion]
    avg = [0.5 * (a + b) for a, b in zip(sig0, sig1)]
    return _finish(prob, x + 0.5 * (mu0 + mu1) * dt + _noise_sum(avg, dW))


def _correction(diffusion, diffusion_jacobian, x, t):
    total = 0.0
    for s, jac in zip(diffusion, diffusion_jacobian):
        total = total + np.einsum("...ij,...j->...i", jac(x, t), s(x, t))
    return 0.5 * total


def ito_to_stratonovich(drift: Callable, diffusion: Sequence[Callable],
                        diffusion_jacobian: Sequence[Callable]) -> Callable:
    """Stratonovich drift mu - 1/2 sum_k (d sigma_k / dx) sigma_k from an Ito drift."""
    if len(diffusion) != len(diffusion_jacobian):
        raise ValueError("one Jacobian per diffusion channel is required")

    def converted(x, t):
        return drift(x, t) - _correction(diffusion, diffusion_jacobian, x, t)

    return converted


def stratonovich_to_ito(drift: Callable, diffusion: Sequence[Callable],
                        diffusion_jacobian: Sequence[Callable]) -> Callable:
    """Inverse of :func:`ito_to_stratonovich`."""
    if len(diffusion) != len(diffusion_jacobian):
        raise ValueError("one Jacobian per diffusion channel is required")

    def converted(x, t):
        return drift(x, t) + _correction(diffusion, diffusion_jacobian, x, t)

    return converted


def integrate_sde(prob: SDEProblem, x0, dt: float, n_steps: int, noise,
                  scheme: str = "ito", t0: float = 0.0, record_every: int = 1,
                  observables: dict | None = None) -> TrajectoryRecord:
    """Integrate with increments from ``noise.next()`` (EnsembleNoise) or ``noise.increments``.

    Batched states (paths, dim) pair with :class:`EnsembleNoise`; a single state
    pairs with :class:`NoisePath`.
    """
    if scheme not in ("ito", "stratonovich"):
        raise ValueError(f"unknown scheme {scheme!r}")
    step_fn = ito_step if scheme == "ito" else stratonovich_step
    x = np.array(x0, dtype=float)
    observables = dict(observables or {})
    if hasattr(noise, "next"):
        draw = noise.next
    else:
        block = noise.increments(n_steps)
        it = iter(block)
        draw = lambda: next(it)  # noqa: E731
    ts, xs = [t0], [x.copy()]
    obs = {k: [f(x)] for k, f in observables.items()}
    for n in range(1, n_steps + 1):
        x = step_fn(prob, x, t0 + (n - 1) * dt, dt, draw())
        if n % record_every == 0 or n == n_steps:
            ts.append(t0 + n * dt)
            xs.append(x.copy())
            for k, f in observables.items():
                obs[k].append(f(x))
    return TrajectoryRecord(t=np.array(ts), coords=np.array(xs),
                            observables={k: np.array(v) for k, v in obs.items()},
                            meta={"scheme": scheme, "dt": dt, "steps": n_steps})
