"""Two-spin dynamic nuclear polarization on a diagonal tensor-network chart.

Site 0 is the electron, site 1 the nucleus; both are spin-1/2 and relax
through thermalizing Bloch channels. At ``t_on`` a flip-flop coupling
g_c (s+ s- + s- s+) (or, optionally, a pair of flip-flop dissipators) starts
transferring electron polarization to the nucleus. Times are in units of
the nuclear T1 when the defaults are kept.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..pullback.dynamics import PullbackModel, integrate_pullback_ensemble
from ..pullback.mps import spinors_to_xi
from ..quantum.channels import BlochParameters, LindbladChannel, bloch_channels
from ..quantum.master import master_steady_state
from ..quantum.spin import spin_operators
from ..records import TrajectoryRecord
from ..stochastic.noise import EnsembleNoise, channel_generator

COUPLINGS = ("flipflop", "transfer")
# independent stream for initial states, kept apart from the noise channels
_INIT_CHANNEL = 2 ** 32 - 1


@dataclass(frozen=True)
class DNPScenario:
    beta_e: float = float(np.log(3.0))
    beta_n: float = 0.0
    T1e: float = 0.25
    T2e: float = 0.25
    T1n: float = 1.0
    T2n: float = 1.0
    g_c: float = float(np.sqrt(5.0))
    coupling: str = "flipflop"
    t_on: float = 4.0
    settle: float = 5.0
    total_time: float = 510.0
    rank: int = 2
    dt: float = 0.005
    n_paths: int = 8
    seed: int = 0
    scheme: str = "ito"
    correction: str = "kahler"
    renormalize: bool = True
    regauge: str = "canonical"
    record_every: int = 10
    # optional spectral densities; each one given replaces the value implied by T1/T2
    S_perp_e: float | None = None
    S_z_e: float | None = None
    S_perp_n: float | None = None
    S_z_n: float | None = None

    def __post_init__(self):
        if self.rank not in (1, 2):
            raise ValueError("rank must be 1 or 2")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        for name in ("T1e", "T2e", "T1n", "T2n", "dt", "total_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.g_c < 0:
            raise ValueError("g_c must be non-negative")
        if not 0 <= self.t_on + self.settle < self.total_time:
            raise ValueError("need 0 <= t_on + settle < total_time")
        if self.n_paths < 1 or self.record_every < 1:
            raise ValueError("n_paths and record_every must be positive")
        for name in ("S_perp_e", "S_z_e", "S_perp_n", "S_z_n"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.dt))

    def _bloch(self, T1, T2, beta, S_perp, S_z) -> BlochParameters:
        base = BlochParameters.from_relaxation_times(T1, T2, beta)
        return BlochParameters(beta, base.S_perp if S_perp is None else S_perp,
                               base.S_z if S_z is None else S_z)

    def electron_parameters(self) -> BlochParameters:
        return self._bloch(self.T1e, self.T2e, self.beta_e, self.S_perp_e, self.S_z_e)

    def nuclear_parameters(self) -> BlochParameters:
        return self._bloch(self.T1n, self.T2n, self.beta_n, self.S_perp_n, self.S_z_n)


def _embed(op, site):
    eye = np.eye(2)
    return np.kron(op, eye) if site == 0 else np.kron(eye, op)


def two_spin_operators():
    ops = spin_operators(0.5)
    return {
        "sz_e": _embed(ops.sz, 0),
        "sz_n": _embed(ops.sz, 1),
        "flipflop": np.kron(ops.splus, ops.sminus) + np.kron(ops.sminus, ops.splus),
        "ops": ops,
    }


def dnp_channels(s: DNPScenario, coupled: bool = True) -> list[LindbladChannel]:
    """Bloch channels for both spins (names e_x ... n_z), plus transfer channels if selected."""
    ops = spin_operators(0.5)
    out = []
    for site, label, params in ((0, "e_", s.electron_parameters()), (1, "n_", s.nuclear_parameters())):
        for ch in bloch_channels(params, ops, sign=1, label=label):
            out.append(LindbladChannel(_embed(ch.A, site), _embed(ch.B, site), ch.S, ch.name))
    if coupled and s.coupling == "transfer" and s.g_c > 0:
        up = np.kron(ops.splus, ops.sminus)
        out.append(LindbladChannel.from_generator(up, 1 / (2 * s.g_c), "ff_up"))
        out.append(LindbladChannel.from_generator(up.conj().T, 1 / (2 * s.g_c), "ff_down"))
    return out


def dnp_hamiltonian(s: DNPScenario, coupled: bool = True):
    if s.coupling != "flipflop" or not coupled or s.g_c == 0:
        return None
    return s.g_c * two_spin_operators()["flipflop"]


def _polarizations(rho):
    ops = two_spin_operators()
    return (float(2 * np.real(np.trace(rho @ ops["sz_e"]))),
            float(2 * np.real(np.trace(rho @ ops["sz_n"]))))


@dataclass(frozen=True)
class DNPOracle:
    rho_e: float
    rho_n: float
    degenerate: bool
    rho: np.ndarray = field(repr=False)


def dnp_oracle(s: DNPScenario, coupled: bool = True) -> DNPOracle:
    """Dense two-spin steady state (coupling on unless ``coupled=False``)."""
    ss = master_steady_state(dnp_hamiltonian(s, coupled), dnp_channels(s, coupled), dim=4)
    e, n = _polarizations(ss.rho)
    return DNPOracle(e, n, ss.degenerate, ss.rho)


def calibrate_coupling(s: DNPScenario, target_rho_n: float, bracket=(1e-3, 50.0)) -> float:
    """Coupling strength whose oracle nuclear polarization equals ``target_rho_n``."""
    from dataclasses import replace

    from scipy.optimize import brentq

    def gap(g):
        return dnp_oracle(replace(s, g_c=g)).rho_n - target_rho_n

    return float(brentq(gap, *bracket, xtol=1e-14))


def initial_state(s: DNPScenario) -> np.ndarray:
    """Seeded initial chart points (n_paths, dim_xi); every branch starts nonzero.

    Each path draws from its own stream, so a path's start does not depend on n_paths.
    """
    shape = (2, s.rank, 2)
    sp = []
    for p in range(s.n_paths):
        rng = channel_generator(s.seed, p, _INIT_CHANNEL)
        sp.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return spinors_to_xi(np.array(sp))


@dataclass(frozen=True)
class PolarizationSummary:
    rho_e: float
    rho_n: float
    se_e: float
    se_n: float
    window: tuple[float, float]
    n_blocks: int

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(record: TrajectoryRecord, start: float, n_blocks_per_path: int = 10) -> PolarizationSummary:
    """Post-switch time averages with batch-means standard errors over all paths."""
    mask = record.t >= start
    out = {}
    for key in ("rho_e", "rho_n"):
        series = record.observables[key][mask]  # (samples, paths)
        usable = (series.shape[0] // n_blocks_per_path) * n_blocks_per_path
        blocks = series[:usable].reshape(n_blocks_per_path, -1, series.shape[1]).mean(axis=1).ravel()
        out[key] = (float(series.mean()), float(blocks.std(ddof=1) / np.sqrt(blocks.size)))
    return PolarizationSummary(out["rho_e"][0], out["rho_n"][0], out["rho_e"][1], out["rho_n"][1],
                               (float(start), float(record.t[-1])), int(n_blocks_per_path * series.shape[1]))


def run_dnp(s: DNPScenario) -> tuple[TrajectoryRecord, PolarizationSummary]:
    """Ensemble of pullback trajectories; returns the record and post-switch summary.

    Observables rho_e, rho_n are 2<s_z> per spin, shape (samples, paths).
    """
    ops = two_spin_operators()
    observables = {"rho_e": 2 * ops["sz_e"], "rho_n": 2 * ops["sz_n"]}
    xi0 = initial_state(s)
    n_before = int(round(s.t_on / s.dt))
    n_before -= n_before % s.record_every
    n_after = s.n_steps - n_before
    n_after -= n_after % s.record_every
    kw = dict(scheme=s.scheme, correction=s.correction, renormalize=s.renormalize,
              regauge=s.regauge, record_every=s.record_every, observables=observables)
    pre_model = PullbackModel(2, s.rank, 2, tuple(dnp_channels(s, coupled=False)), lambda t: None)
    post_model = PullbackModel(2, s.rank, 2, tuple(dnp_channels(s)), lambda t, H=dnp_hamiltonian(s): H)
    n_channels = len(post_model.channels)
    noise = EnsembleNoise(s.seed, s.n_paths, n_channels, s.dt)
    parts = []
    if n_before > 0:
        pre_noise = _ChannelSubset(noise, len(pre_model.channels))
        parts.append(integrate_pullback_ensemble(pre_model, xi0, s.dt, n_before, pre_noise, **kw))
        xi0 = parts[-1].coords[-1]
    parts.append(integrate_pullback_ensemble(post_model, xi0, s.dt, n_after, noise,
                                             t0=n_before * s.dt, **kw))
    record = _concatenate(parts)
    record.meta.update({"scenario": asdict(s), "t_on": n_before * s.dt})
    summary = summarize(record, n_before * s.dt + s.settle)
    record.meta["summary"] = summary.as_dict()
    return record, summary


class _ChannelSubset:
    """Draw the full channel set and keep the leading columns (stream alignment)."""

    def __init__(self, noise, k):
        self.noise, self.k = noise, k

    def next(self):
        return self.noise.next()[:, : self.k]


def _concatenate(parts: list[TrajectoryRecord]) -> TrajectoryRecord:
    if len(parts) == 1:
        return parts[0]
    first, rest = parts[0], parts[1:]
    t = np.concatenate([first.t] + [p.t[1:] for p in rest])
    coords = np.concatenate([first.coords] + [p.coords[1:] for p in rest])
    obs = {k: np.concatenate([first.observables[k]] + [p.observables[k][1:] for p in rest])
           for k in first.observables}
    names = list(rest[-1].records)
    recs = {}
    for k in names:
        chunks = [p.records[k] if k in p.records else np.zeros_like(p.records[names[0]]) for p in parts]
        recs[k] = np.concatenate([chunks[0]] + [c[1:] for c in chunks[1:]])
    meta = dict(rest[-1].meta)
    meta["norm_deviation"] = np.concatenate(
        [first.meta["norm_deviation"]] + [p.meta["norm_deviation"][1:] for p in rest])
    return TrajectoryRecord(t, coords, observables=obs, records=recs, meta=meta)
