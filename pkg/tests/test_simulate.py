import numpy as np
import pytest

from mstvtp import ModelSpec, Params, ParameterError, dgp_preset, link_f_to_matrix, simulate
from mstvtp.simulate import rng_for

from conftest import softmax_link


def transition_counts(z, K):
    C = np.zeros((K, K))
    np.add.at(C, (z[:-1], z[1:]), 1)
    return C


def test_dgp1_transition_frequencies():
    spec, truth = dgp_preset(1)
    sim = simulate(spec, truth, 10_000, seed=1)
    C = transition_counts(sim.z, 2)
    freq = C / C.sum(axis=1, keepdims=True)
    assert abs(freq[0, 0] - 0.80) <= 0.05
    assert abs(freq[1, 1] - 0.90) <= 0.05
    # stationary share of regime 1 is (1 - p22) / (2 - p11 - p22) = 1/3
    assert abs(np.mean(sim.z == 0) - 1 / 3) <= 0.03


@pytest.mark.parametrize("dgp", [2, 3, 4, 5, 7, 8, 9])
def test_transitions_follow_the_reported_path(dgp):
    spec, truth = dgp_preset(dgp)
    sim = simulate(spec, truth, 20_000, seed=dgp)
    K = spec.K
    z, P = sim.z, sim.pi_true_path
    # E[1{z_t = j} | z_{t-1} = i, past] = P_t[i, j]: compare totals
    observed = transition_counts(z, K)
    expected = np.zeros((K, K))
    for t in range(1, z.size):
        expected[z[t - 1]] += P[t, z[t - 1]]
    n = observed.sum(axis=1, keepdims=True)
    assert np.all(np.abs(observed - expected) <= 4.5 * np.sqrt(n * 0.25) + 1)


def test_exog_path_matches_link():
    spec, truth = dgp_preset(3)
    sim = simulate(spec, truth, 300, burn_in=0, seed=5)
    for t in range(1, 300):
        f = truth.f0 + truth.coef * sim.x[t - 1]
        np.testing.assert_allclose(sim.pi_true_path[t], softmax_link(f, 2, True), atol=1e-14)


def test_tvp_path_matches_link():
    spec, truth = dgp_preset(7)
    sim = simulate(spec, truth, 200, burn_in=0, seed=2)
    for t in range(1, 200):
        f = truth.f0 + truth.coef * sim.y[t - 1]
        np.testing.assert_allclose(sim.pi_true_path[t], softmax_link(f, 3, False), atol=1e-14)


def test_vanishing_noise():
    spec = ModelSpec(3)
    p = Params([-2.0, 0.0, 2.0], [1e-12] * 3, np.zeros(6))
    sim = simulate(spec, p, 500, seed=3)
    np.testing.assert_allclose(sim.y, p.mu[sim.z], atol=1e-5)


def test_determinism():
    spec, truth = dgp_preset(9)
    a = simulate(spec, truth, 300, seed=42)
    b = simulate(spec, truth, 300, seed=42)
    for name in ("y", "z", "pi_true_path", "f_true_path"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = simulate(spec, truth, 300, seed=43)
    assert not np.array_equal(a.y, c.y)
    r1 = simulate(spec, truth, 50, rng=rng_for(0, 9, 500, 1, purpose="data"))
    r2 = simulate(spec, truth, 50, rng=rng_for(0, 9, 500, 1, purpose="data"))
    r3 = simulate(spec, truth, 50, rng=rng_for(0, 9, 500, 2, purpose="data"))
    assert np.array_equal(r1.y, r2.y) and not np.array_equal(r1.y, r3.y)


def test_presets():
    spec, p = dgp_preset(2)
    assert spec.dynamics.value == "tvp" and spec.n_sigma2 == 1
    np.testing.assert_allclose(p.theta, [0.15, -0.10])
    np.testing.assert_allclose(np.diag(link_f_to_matrix(p.f0, spec)), [0.80, 0.90])
    np.testing.assert_allclose(p.mu, [-1, 1])
    np.testing.assert_allclose(p.sigma2, [0.5])
    spec, p = dgp_preset(8)
    np.testing.assert_allclose(p.gamma, [0.08, -0.04, 0.05, -0.06, 0.04, -0.07])
    spec, p = dgp_preset(5)
    np.testing.assert_allclose(p.sigma2, [0.3, 0.7])
    P = link_f_to_matrix(p.f0, spec)
    np.testing.assert_allclose([P[0, 1], P[1, 0]], [0.20, 0.15])
    np.testing.assert_allclose(p.theta, [0.10, -0.10])
    spec, p = dgp_preset(4)
    np.testing.assert_allclose(p.A, [0.10, -0.10])
    with pytest.raises(ParameterError):
        dgp_preset(10)


def test_burn_in_discarded():
    spec, truth = dgp_preset(1)
    sim = simulate(spec, truth, 100, burn_in=50, seed=0)
    full = simulate(spec, truth, 150, burn_in=0, seed=0)
    np.testing.assert_array_equal(sim.y, full.y[50:])


def test_csv_export(tmp_path):
    spec, truth = dgp_preset(3)
    sim = simulate(spec, truth, 20, seed=0)
    path = tmp_path / "s.csv"
    sim.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,y,z,x" and len(rows) == 21
    assert float(rows[1].split(",")[1]) == sim.y[0]
