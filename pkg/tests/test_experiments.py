from dataclasses import replace

import numpy as np
import pytest

from natsim.experiments import (
    DNPScenario,
    TorusScenario,
    WaterScenario,
    calibrate_coupling,
    com_oracle,
    divergence_time,
    dnp_channels,
    dnp_hamiltonian,
    dnp_oracle,
    run_dnp,
    run_torus,
    run_twins,
    run_water,
    separatrix_direction,
    sign_flips,
    water_projector,
)
from natsim.pullback import DiagonalMPS
from natsim.quantum import lindblad_apply

# ---- torus


def test_separatrix_direction_from_clairaut():
    assert separatrix_direction(2.0, 1.0) == pytest.approx(np.arccos(1 / 3), abs=1e-15)


def test_outer_equator_is_a_geodesic():
    s = TorusScenario(direction=0.0, n_steps=400, dt=0.05)
    rec = run_torus(s)
    assert np.abs(rec.observables["theta"]).max() <= 1e-10
    travelled = s.speed * s.dt * s.n_steps
    assert rec.observables["phi"][-1] == pytest.approx(travelled / (s.r1 + s.r2), rel=1e-9)
    assert rec.meta["summary"]["threading"] == "non-threading"


def test_torus_energy_and_gauge_momentum_conserved():
    rec = run_torus(TorusScenario(direction=0.9, n_steps=500))
    summary = rec.meta["summary"]
    assert summary["energy_drift"] <= 1e-9
    assert summary["gauge_momentum_drift"] <= 1e-8
    x = rec.observables["x"]
    rho = np.hypot(x[:, 0], x[:, 1])
    assert np.abs((rho - 2.0) ** 2 + x[:, 2] ** 2 - 1.0).max() <= 1e-10


def test_torus_twins_separate_into_opposite_classes():
    (ra, rb), cmp = run_twins(1e-10)
    assert cmp["windings"] == (6, 6)
    assert cmp["opposite_classes"]
    assert cmp["energy_drift"] <= 1e-9
    assert divergence_time(ra, ra, 1e-12) is None
    assert cmp["divergence_time"] is not None


def test_torus_scenario_validation():
    with pytest.raises(ValueError):
        TorusScenario(r1=1.0, r2=1.0)
    with pytest.raises(ValueError):
        TorusScenario(dt=0.0)


# ---- water


def test_water_projector_idempotent():
    pi, residual, seconds = water_projector(WaterScenario())
    assert pi.shape == (18, 18)
    assert residual <= 1e-10
    assert np.trace(pi) == pytest.approx(12, abs=1e-8)


def test_water_short_run_conserves_and_follows_trap():
    s = WaterScenario(n_steps=3000, record_every=30)
    rec = run_water(s)
    summary = rec.meta["summary"]
    assert summary["energy_drift"] <= 1e-8
    assert summary["L2_drift"] <= 1e-8
    assert summary["qnorm2_drift"] <= 1e-8
    assert np.abs(rec.observables["com"] - com_oracle(s, rec.t)).max() <= 1e-7


def test_sign_flips():
    assert sign_flips(np.array([1.0, 0.5, -0.2, -1.0, 0.3]), 0.0) == 2
    assert sign_flips(np.array([1.0, 1e-9, -1e-9, 1.0]), 1e-6) == 0
    assert sign_flips(np.array([]), 0.0) == 0


def test_water_scenario_validation():
    with pytest.raises(ValueError):
        WaterScenario(axis="diagonal")
    with pytest.raises(ValueError):
        WaterScenario(quaternion=(0.0, 0.0, 0.0, 0.0))


# ---- polarization transfer


def rate_equation_oracle(s: DNPScenario):
    """Populations of |ee>, in the basis up-up, up-down, down-up, down-down (electron first).

    Each spin flips with w_up + w_down = 1/T1 and (w_up - w_down)/(w_up + w_down) = tanh(beta/2);
    the flip-flop coherence decays at 1/T2e + 1/T2n, which in steady state turns the coupling
    into a rate 2 g^2 / (1/T2e + 1/T2n) between up-down and down-up.
    """
    def rates(T1, beta):
        p = np.tanh(beta / 2)
        return (1 + p) / (2 * T1), (1 - p) / (2 * T1)

    ue, de = rates(s.T1e, s.beta_e)
    un, dn = rates(s.T1n, s.beta_n)
    W = 2 * s.g_c ** 2 / (1 / s.T2e + 1 / s.T2n)
    states = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    G = np.zeros((4, 4))
    for a, (e, n) in enumerate(states):
        for b, (e2, n2) in enumerate(states):
            if n == n2 and e2 == -e:
                G[b, a] += ue if e2 == 1 else de
            if e == e2 and n2 == -n:
                G[b, a] += un if n2 == 1 else dn
    G[2, 1] += W
    G[1, 2] += W
    G -= np.diag(G.sum(axis=0))
    _, _, vh = np.linalg.svd(G)
    p = vh[-1] / vh[-1].sum()
    return sum(pi * e for pi, (e, _) in zip(p, states)), sum(pi * n for pi, (_, n) in zip(p, states))


def test_default_oracle_against_rate_equations():
    s = DNPScenario()
    oracle = dnp_oracle(s)
    e, n = rate_equation_oracle(s)
    assert oracle.rho_e == pytest.approx(e, abs=1e-10)
    assert oracle.rho_n == pytest.approx(n, abs=1e-10)
    assert (oracle.rho_e, oracle.rho_n) == pytest.approx((3 / 7, 2 / 7), abs=1e-10)
    assert not oracle.degenerate


@pytest.mark.parametrize("g", [0.3, 1.0, 4.0])
def test_oracle_against_rate_equations_other_couplings(g):
    s = DNPScenario(g_c=g, T2e=0.1, beta_n=0.2)
    oracle = dnp_oracle(s)
    assert (oracle.rho_e, oracle.rho_n) == pytest.approx(rate_equation_oracle(s), abs=1e-10)


def test_oracle_state_is_stationary_under_generator():
    s = DNPScenario()
    oracle = dnp_oracle(s)
    residual = lindblad_apply(oracle.rho, dnp_hamiltonian(s), dnp_channels(s))
    assert np.abs(residual).max() <= 1e-12
    assert np.allclose(oracle.rho, oracle.rho.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(oracle.rho).min() >= -1e-10


def test_decoupled_equilibrium():
    s = DNPScenario()
    off = dnp_oracle(s, coupled=False)
    assert (off.rho_e, off.rho_n) == pytest.approx((0.5, 0.0), abs=1e-12)
    zero = dnp_oracle(replace(s, g_c=0.0))
    assert (zero.rho_e, zero.rho_n) == pytest.approx((0.5, 0.0), abs=1e-12)


def test_calibration_recovers_default_coupling():
    assert calibrate_coupling(DNPScenario(), 2 / 7) == pytest.approx(np.sqrt(5.0), rel=1e-10)


def test_transfer_coupling_polarizes_nucleus():
    s = DNPScenario(coupling="transfer")
    names = [ch.name for ch in dnp_channels(s)]
    assert names[-2:] == ["ff_up", "ff_down"] and dnp_hamiltonian(s) is None
    oracle = dnp_oracle(s)
    assert 0 < oracle.rho_n < oracle.rho_e < 0.5


def test_spectral_density_overrides():
    s = DNPScenario(S_z_e=3.0)
    assert s.electron_parameters().S_z == 3.0
    assert s.electron_parameters().S_perp == DNPScenario().electron_parameters().S_perp
    with pytest.raises(ValueError):
        DNPScenario(S_perp_n=-1.0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        DNPScenario(rank=3)
    with pytest.raises(ValueError):
        DNPScenario(coupling="dipolar")
    with pytest.raises(ValueError):
        DNPScenario(t_on=6.0, settle=5.0, total_time=10.0)


def test_short_run_is_deterministic_and_well_formed():
    s = DNPScenario(total_time=6.0, t_on=1.0, settle=1.0, n_paths=2, seed=11)
    rec_a, sum_a = run_dnp(s)
    rec_b, sum_b = run_dnp(s)
    assert sum_a == sum_b
    assert np.array_equal(rec_a.observables["rho_n"], rec_b.observables["rho_n"])
    n_samples = s.n_steps // s.record_every + 1
    assert rec_a.t.shape == (n_samples,)
    assert np.allclose(np.diff(rec_a.t), s.dt * s.record_every)
    assert rec_a.observables["rho_e"].shape == (n_samples, 2)
    assert np.abs(rec_a.observables["rho_e"]).max() <= 1
    assert set(rec_a.records) == {ch.name for ch in dnp_channels(s)}
    other, _ = run_dnp(replace(s, seed=12))
    assert not np.array_equal(other.observables["rho_n"], rec_a.observables["rho_n"])


def test_rank_one_run_stays_a_product_state():
    s = DNPScenario(total_time=4.0, t_on=1.0, settle=1.0, n_paths=2, rank=1)
    rec, _ = run_dnp(s)
    for xi in rec.coords[-1]:
        b = DiagonalMPS.from_xi(xi, 2, 1).bloch_vectors()
        assert np.allclose(np.linalg.norm(b, axis=1), 1, atol=1e-10)


@pytest.mark.slow
def test_renormalization_does_not_change_polarizations():
    s = DNPScenario(total_time=60.0, n_paths=4, seed=3)
    _, on = run_dnp(s)
    _, off = run_dnp(replace(s, renormalize=False))
    assert abs(on.rho_e - off.rho_e) <= 3 * np.hypot(on.se_e, off.se_e)
    assert abs(on.rho_n - off.rho_n) <= 3 * np.hypot(on.se_n, off.se_n)
