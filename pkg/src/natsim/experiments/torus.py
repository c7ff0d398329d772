"""Geodesics on a torus integrated in a four-coordinate over-complete chart."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..geometry.core import FNaturalMetric, NativeMetric
from ..geometry.maps import torus_angles, torus_map, torus_point
from ..geometry.symplectic import GeodesicHamiltonian, PhaseState, integrate_symplectic


@dataclass(frozen=True)
class TorusScenario:
    """Free particle on the torus ((r1 + r2 cos theta) cos phi, (r1 + r2 cos theta) sin phi, r2 sin theta).

    ``direction`` is the initial heading in radians, measured from the
    toroidal (increasing phi) direction towards increasing theta.
    """

    r1: float = 2.0
    r2: float = 1.0
    m: float = 1.0
    theta0: float = 0.0
    phi0: float = 0.0
    direction: float = 0.5
    speed: float = 1.0
    dt: float = 0.04
    n_steps: int = 500
    method: str = "gauss8"
    record_every: int = 1

    def __post_init__(self):
        if not self.r1 > self.r2 > 0:
            raise ValueError("torus radii must satisfy r1 > r2 > 0")
        if not (self.m > 0 and self.speed > 0 and self.dt > 0):
            raise ValueError("m, speed and dt must be positive")
        if self.n_steps < 1 or self.record_every < 1:
            raise ValueError("n_steps and record_every must be positive")


def separatrix_direction(r1: float, r2: float) -> float:
    """Heading at the outer equator that asymptotes to the inner equator.

    Clairaut's relation rho cos(heading) = const with rho = r1 + r2 on the outer
    and r1 - r2 on the inner equator.
    """
    return float(np.arccos((r1 - r2) / (r1 + r2)))


def twin_scenarios(offset: float = 1e-10, r1: float = 1.3, r2: float = 1.0, dt: float = 0.04,
                   total_time: float = 20.0, method: str = "gauss8") -> tuple[TorusScenario, TorusScenario]:
    """Two outer-equator starts straddling the separatrix heading by +-offset/2.

    A ratio r1/r2 close to 1 makes the inner equator weakly unstable, so the
    pair winds around the hole several times before separating.
    """
    centre = separatrix_direction(r1, r2)
    base = TorusScenario(r1=r1, r2=r2, direction=centre, dt=dt,
                         n_steps=int(round(total_time / dt)), method=method)
    return replace(base, direction=centre - offset / 2), replace(base, direction=centre + offset / 2)


def initial_phase_state(s: TorusScenario):
    F = torus_map(s.r1, s.r2)
    metric = FNaturalMetric(F, NativeMetric.from_masses([s.m]), torus_point(s.theta0, s.phi0))
    q = torus_point(s.theta0, s.phi0)
    th, ph = s.theta0, s.phi0
    e_phi = np.array([-np.sin(ph), np.cos(ph), 0.0])
    e_theta = np.array([-np.sin(th) * np.cos(ph), -np.sin(th) * np.sin(ph), np.cos(th)])
    v = s.speed * (np.cos(s.direction) * e_phi + np.sin(s.direction) * e_theta)
    qdot = np.linalg.pinv(F.jacobian(q)) @ v
    p = 0.5 * metric.matrix(q) @ qdot
    return metric, PhaseState(q, p)


def _first_return(theta_u, phi_u, theta0):
    """(sample index, interpolated phi) at the first crossing of the starting equator's
    poloidal angle (mod 2 pi) after departure; (None, None) when there is none."""
    rel = (np.asarray(theta_u) - theta0) / (2 * np.pi)
    for i in range(1, rel.size):
        a, b = rel[i - 1], rel[i]
        lo, hi = min(a, b), max(a, b)
        levels = list(range(int(np.floor(lo)) + 1, int(np.ceil(hi))))
        if float(b).is_integer() and b != a:
            levels.append(int(b))
        if levels:
            level = min(levels, key=lambda n: abs(n - a))
            w = (level - a) / (b - a)
            return i, phi_u[i - 1] + w * (phi_u[i] - phi_u[i - 1])
    return None, None


def run_torus(s: TorusScenario):
    """Integrate the geodesic; returns a record with native coordinates and a summary in ``meta``.

    Summary keys: energy_drift (max relative), poloidal_winding and
    toroidal_winding (whole turns over the run), windings_at_return (whole
    toroidal turns at the first return to the starting equator, None if no
    return), threading ('threading' when theta passes the inner equator,
    otherwise 'non-threading').
    """
    metric, state = initial_phase_state(s)
    H = GeodesicHamiltonian(metric)
    traj = integrate_symplectic(H, state, s.dt, s.n_steps, method=s.method, record_every=s.record_every)
    x = metric.F.eval(traj.coords)
    theta, phi = torus_angles(traj.coords)
    theta_u, phi_u = np.unwrap(theta), np.unwrap(phi)
    theta_u += s.theta0 - theta_u[0]
    phi_u += s.phi0 - phi_u[0]
    E = traj.observables["energy"]
    idx, phi_ret = _first_return(theta_u, phi_u, s.theta0)
    summary = {
        "energy_drift": float(np.abs(E - E[0]).max() / E[0]),
        "poloidal_winding": int(np.trunc((theta_u[-1] - s.theta0) / (2 * np.pi))),
        "toroidal_winding": int(np.trunc((phi_u[-1] - s.phi0) / (2 * np.pi))),
        "windings_at_return": None if idx is None else int(np.floor((phi_ret - s.phi0) / (2 * np.pi))),
        "return_time": None if idx is None else float(traj.t[idx]),
        "theta_max": float(np.abs(theta_u - s.theta0).max()),
        "threading": "threading" if np.abs(theta_u - s.theta0).max() > np.pi else "non-threading",
        "gauge_momentum_drift": float(np.abs(traj.observables["gauge_momentum"]
                                             - traj.observables["gauge_momentum"][0]).max()),
    }
    traj.observables.update({"theta": theta_u, "phi": phi_u, "x": x})
    traj.meta.update({"scenario": asdict(s), "summary": summary, "native": x})
    return traj


def divergence_time(a, b, threshold: float) -> float | None:
    """First sample time at which two native trajectories are farther apart than ``threshold``."""
    xa, xb = a.meta["native"], b.meta["native"]
    n = min(len(xa), len(xb))
    far = np.flatnonzero(np.linalg.norm(xa[:n] - xb[:n], axis=-1) > threshold)
    return None if far.size == 0 else float(a.t[far[0]])


def run_twins(offset: float = 1e-10, **kwargs):
    """Run :func:`twin_scenarios` and compare; returns (records, comparison dict)."""
    sa, sb = twin_scenarios(offset, **kwargs)
    ra, rb = run_torus(sa), run_torus(sb)
    ma, mb = ra.meta["summary"], rb.meta["summary"]
    comparison = {
        "windings": (ma["windings_at_return"], mb["windings_at_return"]),
        "classes": (ma["threading"], mb["threading"]),
        "opposite_classes": ma["threading"] != mb["threading"],
        "energy_drift": max(ma["energy_drift"], mb["energy_drift"]),
        "divergence_time": divergence_time(ra, rb, 0.1 * sa.r2),
    }
    return (ra, rb), comparison
