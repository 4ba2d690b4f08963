import itertools

import numpy as np
import pytest

from mstvtp import (Dataset, ModelSpec, Params, align_labels, align_to_truth, dgp_preset,
                    estimate, filtered_prob_accuracy, forecast_metrics, profile_loglik,
                    recovery_metrics, run_filter, simulate)
from mstvtp.evaluation import group_values


def test_align_examples():
    assert align_labels([0.9, -1.1], [-1, 1]) == (1, 0)
    assert align_labels([-1, 1], [-1, 1]) == (0, 1)
    # 1-based (1,3,2): hat regime 1 -> true 1, hat 3 -> true 2, hat 2 -> true 3
    assert align_labels([-2.1, 1.9, 0.05], [-2, 0, 2]) == (0, 2, 1)


def test_align_is_exhaustive_optimum(rng):
    for _ in range(200):
        K = int(rng.integers(2, 5))
        a, b = rng.normal(size=K), rng.normal(size=K)
        perm = align_labels(a, b)
        best = min(np.abs(a[list(p)] - b).sum() for p in itertools.permutations(range(K)))
        assert np.abs(a[list(perm)] - b).sum() == pytest.approx(best, abs=1e-15)


def test_align_tie_keeps_first():
    assert align_labels([0.0, 0.0], [1.0, -1.0]) == (0, 1)


def test_align_to_truth_carries_ses():
    spec = ModelSpec(2, "offdiagonal", "regime", "tvp")
    est = Params([1.1, -0.9], [0.7, 0.3], [-1.5, -1.4], [-0.1, 0.1])
    se = Params([0.1, 0.2], [0.3, 0.4], [0.5, 0.6], [0.7, 0.8])
    _, truth = dgp_preset(5)
    al, se_al, se_pi, perm = align_to_truth(est, spec, truth, se, np.array([0.01, 0.02]))
    assert perm == (1, 0)
    np.testing.assert_allclose(al.mu, [-0.9, 1.1])
    np.testing.assert_allclose(se_al.mu, [0.2, 0.1])
    np.testing.assert_allclose(se_al.coef, [0.8, 0.7])
    np.testing.assert_allclose(se_pi, [0.02, 0.01])


def test_recovery_arithmetic():
    truth = {"mu": np.array([2.0])}
    ests = [{"mu": np.array([v])} for v in (1.0, 2.0, 3.0)]
    rows = recovery_metrics(ests, truth)
    assert rows["mu"].bias == pytest.approx(0.0)
    assert rows["mu"].rmse == pytest.approx(np.sqrt(2 / 3))
    assert rows["mu"].rmse == pytest.approx(0.8165, abs=1e-4)


def test_coverage_counts_interval():
    truth = {"pi": np.array([0.8])}
    rows = recovery_metrics([{"pi": np.array([0.75])}, {"pi": np.array([0.5])}], truth,
                            [{"pi": np.array([0.05])}, {"pi": np.array([0.05])}])
    assert rows["pi"].coverage == 0.5
    rows = recovery_metrics([{"pi": np.array([0.75])}], truth, [{"pi": np.array([np.nan])}])
    assert np.isnan(rows["pi"].coverage)


def test_trimming_only_affects_A_group():
    truth = {"mu": np.array([0.0]), "A": np.array([0.1])}
    ests = [{"mu": np.array([0.1]), "A": np.array([0.2])},
            {"mu": np.array([0.3]), "A": np.array([40.0])}]
    rows = recovery_metrics(ests, truth, trim_rule=10)
    assert rows["A"].n_used == 1 and rows["A"].rmse == pytest.approx(0.1)
    assert rows["mu"].n_used == 2


def test_forecast_examples():
    spec = ModelSpec(3)
    # every row sends all mass to regime 1, so xi_pred = (1, 0, 0)
    params = Params([-2.0, 0.0, 2.0], [0.5] * 3, [-40.0, -40.0, 40.0, 0.0, 40.0, 0.0])
    out = run_filter(Dataset(np.zeros(5)), spec, params)
    np.testing.assert_allclose(out.xi_pred, np.tile([1.0, 0, 0], (5, 1)), atol=1e-15)
    np.testing.assert_allclose(out.pred_mean, -2.0)
    spec = ModelSpec(2, "diagonal", "common")
    out = run_filter(Dataset(np.array([1.0, -1.0, 0.5])), spec, Params([-1, 1], [0.5], [0, 0]))
    np.testing.assert_allclose(out.pred_var, 1.5)
    m = forecast_metrics(out, [1.0, -1.0, 0.5], cutoff=0)
    assert m.mafe == pytest.approx(2.5 / 3)
    assert m.msfe == pytest.approx(2.25 / 3)
    assert m.mssfe == pytest.approx(2.25 / 3 / 1.5)
    assert m.masfe == pytest.approx(2.5 / 3 / np.sqrt(1.5))


def test_filtered_prob_accuracy_examples():
    P = np.full((4, 2, 2), 0.5)
    assert filtered_prob_accuracy(P, P) == (0.0, 0.0)
    Q = P.copy()
    Q[:, 0, 0] += 0.1
    mse, mae = filtered_prob_accuracy(Q, P)
    assert mse == pytest.approx(0.01 / 4)
    assert mae == pytest.approx(0.1 / 4)


@pytest.fixture(scope="module")
def dgp1():
    spec, truth = dgp_preset(1)
    data = simulate(spec, truth, 500, seed=21).dataset()
    res = estimate(data, spec, n_starts=3, seed=1, compute_se=False)
    return data, spec, res


def test_profile_is_unimodal_at_estimate(dgp1):
    data, spec, res = dgp1
    k = int(np.argmin(res.params_hat.mu))
    mu_hat = res.params_hat.mu[k]
    grid = mu_hat + np.linspace(-0.3, 0.3, 7)
    prof = profile_loglik(data, spec, res.params_hat, f"mu[{k}]", grid)
    assert prof.converged.all()
    ll = prof.loglik
    assert int(np.argmax(ll)) == 3
    assert np.all(np.diff(ll[:4]) > 0) and np.all(np.diff(ll[3:]) < 0)
    assert ll[3] == pytest.approx(res.loglik, abs=1e-4)


def test_profile_point_not_above_unconstrained(dgp1):
    data, spec, res = dgp1
    prof = profile_loglik(data, spec, res.params_hat, "sigma2[0]", [0.45])
    assert prof.loglik_raw[0] <= res.loglik + 1e-8


def test_profile_two_dims_and_csv(dgp1, tmp_path):
    data, spec, res = dgp1
    prof = profile_loglik(data, spec, res.params_hat, ["mu[0]", "mu[1]"],
                          [res.params_hat.mu[0] + np.array([-.1, 0]),
                           res.params_hat.mu[1] + np.array([0, .1])])
    assert prof.loglik.shape == (2, 2)
    prof.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "mu[0],mu[1],loglik,converged" and len(lines) == 5


def test_profile_rejects_unknown_name(dgp1):
    data, spec, res = dgp1
    with pytest.raises(KeyError):
        profile_loglik(data, spec, res.params_hat, "A[0]", [0.0])


def test_group_values_layout():
    spec, truth = dgp_preset(7)
    g = group_values(truth, spec)
    assert set(g) == {"mu", "sigma2", "pi", "A"}
    np.testing.assert_allclose(g["pi"], [.08, .08, .10, .10, .06, .06])
