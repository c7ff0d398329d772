import numpy as np
import pytest

from natsim.quantum import bloch_channels, BlochParameters, spin_operators, sse_diffusion, sse_drift
from natsim.quantum.sse import stratonovich_sse_drift
from natsim.stochastic import (
    EnsembleNoise,
    NoisePath,
    SDEProblem,
    channel_generator,
    integrate_sde,
    ito_step,
    ito_to_stratonovich,
    stratonovich_step,
    stratonovich_to_ito,
)


def gaussian_block(seed, n_steps, n_paths, dt):
    """Wiener increments (n_steps, n_paths, 1) straight from a PCG64 stream."""
    g = channel_generator(seed, 0, 0)
    return np.sqrt(dt) * g.standard_normal((n_steps, n_paths, 1))


# ---- noise streams

def test_same_seed_same_stream():
    a = NoisePath(7, 3, 0.01).increments(100)
    b = NoisePath(7, 3, 0.01).increments(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, NoisePath(8, 3, 0.01).increments(100))


def test_block_draws_match_single_draw():
    whole = NoisePath(3, 2, 0.1).increments(50)
    path = NoisePath(3, 2, 0.1)
    parts = np.concatenate([path.increments(20), path.increments(30)])
    assert np.array_equal(whole, parts)


def test_gaussian_moments():
    dt, N = 0.01, 10 ** 6
    x = NoisePath(11, 1, dt).increments(N)[:, 0]
    assert abs(x.mean()) <= 5 * np.sqrt(dt / N)
    # var of the sample variance is 2 dt^2 / N for Gaussian data
    assert abs(x.var() - dt) <= 5 * np.sqrt(2 / N) * dt


def test_binary_values_and_bias():
    dt, N = 0.04, 200_000
    path = NoisePath(5, 1, dt, mode="binary")
    p = np.linspace(0.2, 0.8, N)[:, None]
    x = path.increments(N, p_plus=p)
    assert set(np.unique(x)) == {-np.sqrt(dt), np.sqrt(dt)}
    plus = x[:, 0] > 0
    for lo, hi in ((0, N // 2), (N // 2, N)):
        expected = p[lo:hi, 0].mean()
        se = np.sqrt(expected * (1 - expected) / (hi - lo))
        assert abs(plus[lo:hi].mean() - expected) <= 4 * se


def test_mode_validation():
    with pytest.raises(ValueError):
        NoisePath(0, 1, 0.1, mode="poisson")
    with pytest.raises(ValueError):
        NoisePath(0, 1, 0.1).increments(3, p_plus=0.5)
    with pytest.raises(ValueError):
        channel_generator(-1, 0, 0)


def test_ensemble_paths_are_independent_of_batching():
    full = EnsembleNoise(9, 4, 2, 0.1, block=8)
    rows = np.stack([full.next() for _ in range(20)])
    tail = EnsembleNoise(9, 2, 2, 0.1, first_path=2, block=5)
    rows_tail = np.stack([tail.next() for _ in range(20)])
    assert np.array_equal(rows[:, 2:], rows_tail)
    single = NoisePath(9, 2, 0.1, path=3).increments(20)
    assert np.array_equal(rows[:, 3], single)


def test_ensemble_uniforms_need_binary_mode():
    with pytest.raises(ValueError):
        EnsembleNoise(0, 1, 1, 0.1).next_uniforms()
    u = EnsembleNoise(0, 3, 2, 0.1, mode="binary").next_uniforms()
    assert u.shape == (3, 2) and np.all((u >= 0) & (u < 1))


# ---- steppers

def test_zero_fields_leave_state_unchanged():
    prob = SDEProblem(lambda x, t: 0 * x, [lambda x, t: 0 * x])
    x = np.array([1.0, -2.0])
    assert np.array_equal(ito_step(prob, x, 0.0, 0.1, np.array([0.3])), x)
    assert np.array_equal(stratonovich_step(prob, x, 0.0, 0.1, np.array([0.3])), x)


def test_step_validation():
    prob = SDEProblem(lambda x, t: x, [lambda x, t: x])
    with pytest.raises(ValueError):
        ito_step(prob, np.ones(1), 0.0, 0.0, np.zeros(1))
    bad = SDEProblem(lambda x, t: np.full_like(x, np.inf), [])
    with pytest.raises(FloatingPointError):
        ito_step(bad, np.ones(1), 0.0, 0.1, np.zeros(0))


def test_projection_hook_runs_after_step():
    prob = SDEProblem(lambda x, t: x, [], projection_hook=lambda x: x / np.linalg.norm(x))
    out = ito_step(prob, np.array([3.0, 4.0]), 0.0, 0.5, np.zeros(0))
    assert np.isclose(np.linalg.norm(out), 1.0)


def test_geometric_brownian_motion_is_a_martingale():
    P, dt, n = 100_000, 0.01, 100
    prob = SDEProblem(lambda x, t: 0 * x, [lambda x, t: x])
    dW = gaussian_block(1, n, P, dt)
    x = np.ones((P, 1))
    for k in range(n):
        x = ito_step(prob, x, k * dt, dt, dW[k])
    assert abs(x.mean() - 1.0) <= 3 * x.std(ddof=1) / np.sqrt(P)


def test_ornstein_uhlenbeck_stationary_variance():
    P, dt, n = 4000, 0.01, 1000
    prob = SDEProblem(lambda x, t: -x, [lambda x, t: np.ones_like(x)])
    dW = gaussian_block(2, n, P, dt)
    x = np.zeros((P, 1))
    samples = []
    for k in range(n):
        x = ito_step(prob, x, k * dt, dt, dW[k])
        if k >= 500 and k % 50 == 0:
            samples.append(x.var())
    assert abs(np.mean(samples) - 0.5) <= 0.05 * 0.5


def test_heun_equals_euler_for_constant_diffusion():
    x, dt, dW = np.array([0.4]), 1e-3, np.array([0.03])
    noise_only = SDEProblem(lambda x, t: 0 * x, [lambda x, t: np.array([0.7])])
    assert np.array_equal(stratonovich_step(noise_only, x, 0.0, dt, dW), ito_step(noise_only, x, 0.0, dt, dW))
    # with linear drift -x the only difference is the drift evaluated at the predictor
    prob = SDEProblem(lambda x, t: -x, [lambda x, t: np.array([0.7])])
    diff = stratonovich_step(prob, x, 0.0, dt, dW) - ito_step(prob, x, 0.0, dt, dW)
    assert np.isclose(diff[0], -0.5 * (-x[0] * dt + 0.7 * dW[0]) * dt, rtol=1e-10)


def test_stratonovich_exponential_has_driftless_log():
    P, dt, n = 20_000, 0.01, 100
    prob = SDEProblem(lambda x, t: 0 * x, [lambda x, t: x])
    dW = gaussian_block(3, n, P, dt)
    x = np.ones((P, 1))
    for k in range(n):
        x = stratonovich_step(prob, x, k * dt, dt, dW[k])
    logs = np.log(x)
    assert abs(logs.mean()) <= 3 * logs.std(ddof=1) / np.sqrt(P)


def test_conversion_oracle_matches_path_statistics():
    a, b, P, dt, n = 0.3, 0.5, 20_000, 0.005, 200
    sig = [lambda x, t: b * x]
    jac = [lambda x, t: b * np.ones(x.shape + (1,))]
    strat_drift = ito_to_stratonovich(lambda x, t: a * x, sig, jac)
    dW = gaussian_block(4, n, P, dt)
    xi = np.ones((P, 1))
    xs = np.ones((P, 1))
    ito = SDEProblem(lambda x, t: a * x, sig)
    strat = SDEProblem(strat_drift, sig)
    for k in range(n):
        xi = ito_step(ito, xi, k * dt, dt, dW[k])
        xs = stratonovich_step(strat, xs, k * dt, dt, dW[k])
    expected = np.exp(a * n * dt)
    se = np.sqrt(xi.var() / P + xs.var() / P)
    assert abs(xi.mean() - xs.mean()) <= 3 * se
    assert abs(xs.mean() - expected) <= 3 * xs.std() / np.sqrt(P)


def test_conversion_formulas():
    mu = lambda x, t: 2 * x  # noqa: E731
    const = ito_to_stratonovich(mu, [lambda x, t: np.ones_like(x)], [lambda x, t: np.zeros(x.shape + x.shape[-1:])])
    x = np.array([1.5])
    assert np.allclose(const(x, 0.0), mu(x, 0.0))
    lin = ito_to_stratonovich(mu, [lambda x, t: x], [lambda x, t: np.eye(1)])
    assert np.allclose(lin(x, 0.0), mu(x, 0.0) - x / 2)
    back = stratonovich_to_ito(lin, [lambda x, t: x], [lambda x, t: np.eye(1)])
    assert np.allclose(back(x, 0.0), mu(x, 0.0))
    with pytest.raises(ValueError):
        ito_to_stratonovich(mu, [lambda x, t: x], [])


def test_sse_stratonovich_drift_matches_numeric_conversion(rng):
    ops = spin_operators(1)
    chans = bloch_channels(BlochParameters(0.8, 1.3, 0.9), ops)
    H = 0.4 * ops.sx
    d = ops.dim

    def realify(z):
        return np.concatenate([z.real, z.imag], axis=-1)

    def complexify(x):
        return x[..., :d] + 1j * x[..., d:]

    drift = lambda x, t: realify(sse_drift(complexify(x), H, chans))  # noqa: E731
    sigmas = [lambda x, t, k=k: realify(sse_diffusion(complexify(x), chans)[k]) for k in range(len(chans))]

    def numeric_jacobian(f, h=1e-6):
        def jac(x, t):
            cols = [(f(x + h * e, t) - f(x - h * e, t)) / (2 * h) for e in np.eye(2 * d)]
            return np.stack(cols, axis=-1)
        return jac

    strat = ito_to_stratonovich(drift, sigmas, [numeric_jacobian(s) for s in sigmas])
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    psi /= np.linalg.norm(psi)
    analytic = realify(stratonovich_sse_drift(psi, H, chans))
    assert np.abs(strat(realify(psi), 0.0) - analytic).max() <= 1e-8


def test_euler_maruyama_strong_order_half():
    P, T = 2000, 1.0
    fine = 2 ** 12
    dW = gaussian_block(6, fine, P, T / fine)[..., 0]
    prob = SDEProblem(lambda x, t: -x, [lambda x, t: x])

    def solve(n):
        step = fine // n
        incr = dW.reshape(n, step, P).sum(axis=1)
        x = np.ones((P, 1))
        for k in range(n):
            x = ito_step(prob, x, 0.0, T / n, incr[k][:, None])
        return x

    ref = solve(fine)
    e1 = np.abs(solve(2 ** 4) - ref).mean()
    e2 = np.abs(solve(2 ** 6) - ref).mean()
    assert 1.5 <= e1 / e2 <= 2.7


def test_integrate_sde_is_deterministic():
    prob = SDEProblem(lambda x, t: -x, [lambda x, t: np.ones_like(x)])
    runs = [integrate_sde(prob, np.zeros((3, 1)), 0.01, 50, EnsembleNoise(5, 3, 1, 0.01),
                          record_every=10, observables={"x2": lambda x: (x ** 2).sum()})
            for _ in range(2)]
    assert np.array_equal(runs[0].coords, runs[1].coords)
    assert np.array_equal(runs[0].observables["x2"], runs[1].observables["x2"])
    assert runs[0].coords.shape == (6, 3, 1)


def test_integrate_sde_with_single_path_noise():
    prob = SDEProblem(lambda x, t: 0 * x, [lambda x, t: np.ones_like(x)])
    rec = integrate_sde(prob, np.zeros(1), 0.1, 10, NoisePath(1, 1, 0.1), scheme="stratonovich")
    assert np.isclose(rec.coords[-1, 0], NoisePath(1, 1, 0.1).increments(10).sum())
    with pytest.raises(ValueError):
        integrate_sde(prob, np.zeros(1), 0.1, 1, NoisePath(1, 1, 0.1), scheme="milstein")
