import numpy as np
import pytest

from natsim.pullback import (
    DiagonalMPS,
    MultiplicationCounter,
    PullbackModel,
    ReducedMetric,
    bloch_vectors,
    canonical_gauge,
    complexify,
    identity_immersion,
    integrate_pullback_ensemble,
    kahler_derivative_contraction,
    metric_derivative_contraction,
    mps_immersion,
    musical_solve,
    projected_ito_increment,
    projected_stratonovich_step,
    realify,
    rebalance,
    reduced_metric,
    spinors_to_xi,
    stratonovich_drift_forms,
    xi_to_spinors,
)
from natsim.quantum import (
    BlochParameters,
    LindbladChannel,
    bloch_channels,
    normalize,
    spin_operators,
    sse_diffusion,
    sse_drift,
    sse_increment,
)
from natsim.records import IntegrationError
from natsim.stochastic import EnsembleNoise


def dense_state(spinors):
    """Independent assembly: sum over branches of explicit Kronecker products."""
    n, r, _ = spinors.shape
    out = 0
    for k in range(r):
        term = np.ones(1, complex)
        for i in range(n):
            term = np.kron(term, spinors[i, k])
        out = out + term
    return out


def two_spin_channels():
    s = spin_operators(0.5)
    eye = np.eye(2)
    chans = []
    for site, beta in ((0, 1.0), (1, 0.3)):
        for ch in bloch_channels(BlochParameters(beta, 0.8, 1.1), s):
            emb = (lambda op: np.kron(op, eye)) if site == 0 else (lambda op: np.kron(eye, op))
            chans.append(LindbladChannel(emb(ch.A), emb(ch.B), ch.S, f"{site}{ch.name}"))
    H = 0.7 * (np.kron(s.splus, s.sminus) + np.kron(s.sminus, s.splus))
    return chans, H


def ito_fields(imm, xi, chans, H, correction="auto"):
    """(mu^a, [sigma^a_k]) read off projected_ito_increment with unit dt or unit dW."""
    psi = imm.eval(xi)
    mu = sse_drift(psi, H, chans)
    sig = sse_diffusion(psi, chans)
    K = len(chans)
    drift = projected_ito_increment(imm, xi, mu, sig, 1.0, np.zeros(K), correction)
    sigmas = [projected_ito_increment(imm, xi, mu, sig, 0.0, np.eye(K)[k], correction) for k in range(K)]
    return drift, sigmas


def second_directional(f, x, v, h):
    return (f(x + h * v) - 2 * f(x) + f(x - h * v)) / h ** 2


# ---- coordinates and assembly

def test_xi_round_trip(rng):
    sp = rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2))
    assert np.array_equal(xi_to_spinors(spinors_to_xi(sp), 3, 2, 2), sp)
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.array_equal(complexify(realify(z)), z)


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("r", [1, 2, 3])
def test_assembly_and_schmidt_ranks(rng, n, r):
    state = DiagonalMPS.random(n, r, rng)
    assert np.abs(state.assemble() - dense_state(state.spinors)).max() <= 1e-13
    assert np.isclose(state.norm2(), np.linalg.norm(state.assemble()) ** 2, rtol=1e-12)
    assert all(rank <= r for rank in state.bipartition_ranks())


def test_spin_one_sites(rng):
    state = DiagonalMPS.random(3, 2, rng, d=3)
    assert state.j == 1.0
    assert np.abs(state.assemble() - dense_state(state.spinors)).max() <= 1e-13
    v = rng.standard_normal(state.dim_xi)
    J = state.jacobian()
    assert np.abs(state.matvec(v) - J.T @ (J @ v)).max() <= 1e-12 * np.abs(J.T @ J @ v).max()


def test_mps_jacobian_matches_finite_differences(rng):
    for n, r in ((2, 1), (2, 2), (3, 3)):
        imm = mps_immersion(n, r)
        assert imm.check_jacobian(DiagonalMPS.random(n, r, rng).xi) <= 1e-6


def test_gauges_preserve_state(rng):
    state = DiagonalMPS.random(2, 2, rng)
    psi = state.assemble()
    assert np.allclose(dense_state(rebalance(state.spinors)), psi, atol=1e-13)
    canon = canonical_gauge(state.spinors)
    assert np.allclose(dense_state(canon), psi, atol=1e-13)
    first = canon[0]
    assert np.allclose(first.conj() @ first.T, np.eye(2), atol=1e-13)
    with pytest.raises(ValueError):
        canonical_gauge(DiagonalMPS.random(3, 2, rng).spinors)


# ---- reduced metric

def test_identity_immersion_metric_is_identity(rng):
    imm = identity_immersion(3)
    g = reduced_metric(imm, rng.standard_normal(6))
    assert np.array_equal(g.g, np.eye(6))
    assert g.rank == 6


def test_reference_ranks(rng):
    for r, expected in ((1, 6), (2, 8)):
        for _ in range(5):
            state = DiagonalMPS.random(2, r, rng)
            assert reduced_metric(state.immersion(), state.xi).rank == expected


def test_rank_never_exceeds_bound(rng):
    for n in (1, 2, 3):
        for r in (1, 2, 3, 4):
            state = DiagonalMPS.random(n, r, rng)
            rank = reduced_metric(state.immersion(), state.xi).rank
            assert rank <= min(state.dim_xi, 2 * 2 ** n)


def test_pseudo_inverse_identities(rng):
    for i in range(100):
        n, r = 2 + i % 2, 1 + i % 3
        state = DiagonalMPS.random(n, r, rng)
        m = reduced_metric(state.immersion(), state.xi)
        g, gp = m.g, m.pinv
        scale = np.abs(g).max()
        assert np.abs(g @ gp @ g - g).max() <= 1e-10 * scale
        assert np.abs(gp @ g @ gp - gp).max() <= 1e-10 * np.abs(gp).max()


# ---- musical isomorphism

def test_musical_identity(rng):
    b = rng.standard_normal(5)
    sol = musical_solve(ReducedMetric(np.eye(5)), b)
    assert np.allclose(sol.vector, b) and sol.in_range


def test_musical_rank_deficient(rng):
    state = DiagonalMPS.random(2, 1, rng)
    m = reduced_metric(state.immersion(), state.xi)
    cov = m.g @ rng.standard_normal(m.dim)
    sol = musical_solve(m, cov)
    assert sol.in_range and sol.residual <= 1e-10
    null = m.null_space
    assert np.abs(null.T @ sol.vector).max() <= 1e-10 * np.linalg.norm(sol.vector)
    outside = musical_solve(m, null[:, 0])
    assert not outside.in_range


def test_iterative_matches_dense(rng):
    state = DiagonalMPS.random(4, 3, rng)
    m = reduced_metric(state.immersion(), state.xi)
    cov = m.g @ rng.standard_normal(m.dim)
    dense = musical_solve(m, cov, method="dense").vector
    it = musical_solve(state.matvec, cov, dim=state.dim_xi, method="cg")
    assert it.converged
    assert np.linalg.norm(it.vector - dense) / np.linalg.norm(dense) <= 1e-8
    with pytest.raises(ValueError):
        musical_solve(state.matvec, cov)


# ---- factored matvec

@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_factored_matvec_matches_dense(rng, n, r):
    for _ in range(50):
        state = DiagonalMPS.random(n, r, rng)
        v = rng.standard_normal(state.dim_xi)
        J = state.jacobian()
        dense = J.T @ (J @ v)
        assert np.abs(state.matvec(v) - dense).max() <= 1e-12 * max(1.0, np.abs(dense).max())


def test_factored_matvec_of_zero(rng):
    state = DiagonalMPS.random(5, 3, rng)
    assert np.array_equal(state.matvec(np.zeros(state.dim_xi)), np.zeros(state.dim_xi))


def test_multiplication_count_is_linear_in_sites(rng):
    r = 6
    ns = np.array([50, 100, 200, 400])
    counts = []
    for n in ns:
        state = DiagonalMPS.random(n, r, rng)
        c = MultiplicationCounter()
        state.matvec(rng.standard_normal(state.dim_xi), c)
        counts.append(c.count)
    per_site = np.array(counts) / ns
    assert np.abs(per_site / per_site.mean() - 1).max() <= 0.10
    slope = np.polyfit(np.log(ns), np.log(counts), 1)[0]
    assert abs(slope - 1) <= 0.10


# ---- metric derivative and Ito correction

def test_kahler_correction_richardson(rng):
    state = DiagonalMPS.random(3, 2, rng)
    imm = state.immersion()
    xi = state.xi
    v = rng.standard_normal(state.dim_xi)
    h = 1e-2 * np.linalg.norm(xi) / np.linalg.norm(v)
    c1 = kahler_derivative_contraction(imm.metric_matvec, xi, v, h)
    c2 = kahler_derivative_contraction(imm.metric_matvec, xi, v, h / 2)
    c4 = kahler_derivative_contraction(imm.metric_matvec, xi, v, h / 4)
    ratio = np.linalg.norm(c1 - c2) / np.linalg.norm(c2 - c4)
    assert abs(ratio - 4) <= 0.4


def test_kahler_matches_second_difference(rng):
    state = DiagonalMPS.random(3, 2, rng)
    imm = state.immersion()
    v = rng.standard_normal(state.dim_xi)
    k = metric_derivative_contraction(imm, state.xi, v, "kahler")
    s = metric_derivative_contraction(imm, state.xi, v, "second_difference")
    assert np.linalg.norm(k - s) <= 1e-6 * np.linalg.norm(k)
    assert np.array_equal(metric_derivative_contraction(imm, state.xi, v, "none"), np.zeros(state.dim_xi))
    with pytest.raises(ValueError):
        metric_derivative_contraction(imm, state.xi, v, "milstein")


def test_identity_immersion_reproduces_hilbert_paths(rng):
    s = spin_operators(1)
    chans = bloch_channels(BlochParameters(0.7, 0.9, 1.3), s)
    H = 0.3 * s.sx
    imm = identity_immersion(3)
    psi = normalize(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    xi = realify(psi)
    dt = 1e-3
    for _ in range(50):
        dW = np.sqrt(dt) * rng.standard_normal(3)
        z = complexify(xi)
        assert np.allclose(metric_derivative_contraction(imm, xi, rng.standard_normal(6)), 0)
        dxi = projected_ito_increment(imm, xi, sse_drift(z, H, chans), sse_diffusion(z, chans), dt, dW)
        dpsi, _ = sse_increment(psi, H, chans, dt, dW)
        assert np.abs(complexify(dxi) - dpsi).max() <= 1e-12
        xi = realify(normalize(complexify(xi + dxi)))
        psi = normalize(psi + dpsi)


def test_corrected_increment_reproduces_hilbert_drift(rng):
    """On the locally full two-site rank-2 chart, E[d psi]/dt must equal the Hilbert drift."""
    chans, H = two_spin_channels()
    state = DiagonalMPS(canonical_gauge(DiagonalMPS.random(2, 2, rng).normalized().spinors))
    imm = state.immersion()
    xi = state.xi
    psi = imm.eval(xi)
    target = realify(sse_drift(psi, H, chans))
    f = imm.eval_real

    def expected_rate(correction):
        mu, sigmas = ito_fields(imm, xi, chans, H, correction)
        J = imm.jacobian(xi)
        out = J @ mu
        for s in sigmas:
            h = 1e-4 / np.linalg.norm(s)
            out = out + 0.5 * second_directional(f, xi, s, h) * 1.0
        return out

    err_k = np.linalg.norm(expected_rate("kahler") - target) / np.linalg.norm(target)
    err_s = np.linalg.norm(expected_rate("second_difference") - target) / np.linalg.norm(target)
    err_0 = np.linalg.norm(expected_rate("none") - target) / np.linalg.norm(target)
    assert err_k <= 1e-6 and err_s <= 1e-6
    assert err_0 >= 1e-2


def test_drift_balance_keeps_norm(rng):
    """Expected d<psi|psi>/dt of the projected increment vanishes at normalized points."""
    chans, H = two_spin_channels()
    for r in (1, 2):
        state = DiagonalMPS.random(2, r, rng).normalized()
        if r == 2:
            state = DiagonalMPS(canonical_gauge(state.spinors))
        imm = state.immersion()
        xi = state.xi

        def N(x):
            return float(np.sum(imm.eval_real(x) ** 2))

        mu, sigmas = ito_fields(imm, xi, chans, H)
        h = 1e-6
        grad = np.array([(N(xi + h * e) - N(xi - h * e)) / (2 * h) for e in np.eye(imm.dim_xi)])
        rate = grad @ mu + 0.5 * sum(second_directional(N, xi, s, 1e-4) * 1.0 for s in sigmas)
        assert abs(rate) <= 1e-6


def test_stratonovich_forms_of_identity_measurement(rng):
    psi = normalize(rng.standard_normal(2) + 1j * rng.standard_normal(2))
    ch = LindbladChannel(2.5 * np.eye(2), np.zeros((2, 2)), 1.0)
    assert np.allclose(stratonovich_drift_forms([ch], psi), 0, atol=1e-14)
    assert np.allclose(sse_diffusion(psi, [ch])[0], 0, atol=1e-14)


def test_projected_stratonovich_step_with_identity_immersion(rng):
    s = spin_operators(0.5)
    chans = bloch_channels(BlochParameters(1.0, 1.0, 1.0), s)
    imm = identity_immersion(2)
    xi = realify(normalize(rng.standard_normal(2) + 1j * rng.standard_normal(2)))
    dW = np.array([0.01, -0.02, 0.005])
    out = projected_stratonovich_step(imm, xi, lambda p: stratonovich_drift_forms(chans, p),
                                      lambda p: sse_diffusion(p, chans), 1e-4, dW)
    psi = complexify(xi)
    v0 = stratonovich_drift_forms(chans, psi)
    sig = sse_diffusion(psi, chans)
    pred = psi + v0 * 1e-4 + sum(sv * w for sv, w in zip(sig, dW))
    v1 = stratonovich_drift_forms(chans, pred)
    sig1 = sse_diffusion(pred, chans)
    heun = psi + 0.5 * (v0 + v1) * 1e-4 + sum(0.5 * (a + b) * w for a, b, w in zip(sig, sig1, dW))
    assert np.allclose(complexify(out), heun, atol=1e-12)


# ---- Bloch vectors

def test_bloch_vectors(rng):
    up = DiagonalMPS(np.array([[[1.0, 0.0]], [[1.0, 1.0]]]) / np.array([1.0, np.sqrt(2)])[:, None, None])
    assert np.allclose(up.bloch_vectors(), [[0, 0, 1], [1, 0, 0]], atol=1e-15)
    state = DiagonalMPS.random(5, 1, rng)
    assert np.allclose(np.linalg.norm(bloch_vectors(state), axis=1), 1, atol=1e-12)
    with pytest.raises(ValueError):
        DiagonalMPS.random(2, 2, rng).bloch_vectors()


# ---- ensemble integrator

def _model(r):
    chans, H = two_spin_channels()
    return PullbackModel(2, r, 2, tuple(chans), lambda t: H)


def test_rank_one_trajectories_stay_classical_spins(rng):
    model = _model(1)
    xi0 = np.stack([DiagonalMPS.random(2, 1, rng).xi for _ in range(3)])
    rec = integrate_pullback_ensemble(model, xi0, 0.01, 200, EnsembleNoise(0, 3, 6, 0.01),
                                      regauge="balance", record_every=20)
    for sample in rec.coords:
        for xi in sample:
            b = DiagonalMPS.from_xi(xi, 2, 1).bloch_vectors()
            assert np.allclose(np.linalg.norm(b, axis=1), 1, atol=1e-12)
    assert rec.coords.shape == (11, 3, model.dim_xi)
    assert set(rec.records) == {ch.name for ch in model.channels}
    assert np.all(rec.records["0x"][0] == 0)


def test_ensemble_is_reproducible_and_norm_is_monitored(rng):
    model = _model(2)
    xi0 = np.stack([DiagonalMPS.random(2, 2, rng).xi for _ in range(2)])
    runs = [integrate_pullback_ensemble(model, xi0, 0.005, 100, EnsembleNoise(4, 2, 6, 0.005),
                                        regauge="canonical", record_every=10,
                                        observables={"sz0": np.kron(np.diag([1.0, -1.0]), np.eye(2))})
            for _ in range(2)]
    assert np.array_equal(runs[0].coords, runs[1].coords)
    assert np.array_equal(runs[0].observables["sz0"], runs[1].observables["sz0"])
    dev = runs[0].meta["norm_deviation"][1:]
    assert dev.max() < 0.2  # one Ito step, O(dt) at this step size


def test_ensemble_aborts_on_non_finite_state(rng):
    model = _model(1)
    xi0 = np.stack([DiagonalMPS.random(2, 1, rng).xi])

    class BadNoise:
        def next(self):
            return np.full((1, 6), np.nan)

    with pytest.raises(IntegrationError) as info:
        integrate_pullback_ensemble(model, xi0, 0.01, 5, BadNoise())
    assert info.value.step == 0


def test_ensemble_argument_validation(rng):
    model = _model(1)
    xi0 = np.stack([DiagonalMPS.random(2, 1, rng).xi])
    noise = EnsembleNoise(0, 1, 6, 0.01)
    with pytest.raises(ValueError):
        integrate_pullback_ensemble(model, xi0, 0.01, 1, noise, scheme="milstein")
    with pytest.raises(ValueError):
        integrate_pullback_ensemble(model, xi0, 0.01, 1, noise, correction="second_difference")
    with pytest.raises(ValueError):
        integrate_pullback_ensemble(model, xi0[:, :4], 0.01, 1, noise)
