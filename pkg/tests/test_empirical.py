import csv

import numpy as np
import pytest

from mstvtp import (IngestionError, ModelSpec, Params, difference, information_criteria,
                    ingest_yields, run_empirical, simulate)
from mstvtp.empirical import EMPIRICAL_CUTOFF, LevelSeries, variance_order


def month_range(start_year, start_month, n):
    out = []
    y, m = start_year, start_month
    for _ in range(n):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def write_yields(path, n=763, maturities=(1, 12, 36, 72), seed=0):
    """Synthetic level series whose monthly changes follow a three-regime chain."""
    spec = ModelSpec(3)
    p = Params([0.0, 0.01, -0.01], [0.6, 0.05, 0.005], np.full(6, -3.0))
    dates = month_range(1961, 6, n)
    cols = {}
    for k, m in enumerate(maturities):
        dy = simulate(spec, p, n - 1, seed=seed + k).y
        cols[m] = 5.0 + np.concatenate([[0.0], np.cumsum(dy)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + [str(m) for m in maturities])
        for t, d in enumerate(dates):
            w.writerow([d] + [f"{cols[m][t]:.6f}" for m in maturities])
    return dates, cols


def test_full_length_sample(tmp_path):
    path = tmp_path / "y.csv"
    dates, _ = write_yields(path)
    assert dates[0] == "1961-06" and dates[-1] == "2024-12"
    series = ingest_yields(path, [1, 12, 36, 72])
    assert len(series[12]) == 763
    assert len(difference(series[12]).y) == 762


def test_date_range_and_two_rows(tmp_path):
    path = tmp_path / "y.csv"
    write_yields(path, n=30)
    s = ingest_yields(path, ["12"], ("1961-08", "1961-09"))
    assert s[12].dates == ["1961-08", "1961-09"]
    d = difference(s[12])
    assert d.y.size == 1 and d.dates == ["1961-09"]


def test_missing_column_named(tmp_path):
    path = tmp_path / "y.csv"
    write_yields(path, n=5)
    with pytest.raises(IngestionError, match="'120'"):
        ingest_yields(path, [1, 120])


def test_bad_cells_named(tmp_path):
    path = tmp_path / "y.csv"
    path.write_text("date,1,12\n2000-01,1.0,2.0\n2000-02,,2.1\n")
    with pytest.raises(IngestionError, match=r"row 3.*'1'"):
        ingest_yields(path, [1])
    ingest_yields(path, [12])  # the gap is only in the other column
    path.write_text("date,1\n2000-01,1.0\n2000/02,1.1\n")
    with pytest.raises(IngestionError, match="row 3"):
        ingest_yields(path, [1])
    path.write_text("date,1\n2000-02,1.0\n2000-01,1.1\n")
    with pytest.raises(IngestionError, match="increasing"):
        ingest_yields(path, [1])
    with pytest.raises(IngestionError):
        ingest_yields(tmp_path / "absent.csv", [1])


def test_difference_examples():
    d = difference(np.array([3.0, 3.5, 3.2]))
    np.testing.assert_allclose(d.y, [0.5, -0.3])
    np.testing.assert_allclose(difference(np.full(6, 2.5)).y, 0.0)
    # the covariate next to y_t is the level Y_t, which drives the transition into y_{t+1}
    np.testing.assert_allclose(d.x, [3.5, 3.2])


def test_telescoping(rng):
    levels = 4 + np.cumsum(rng.normal(size=50))
    d = difference(LevelSeries(12, [str(i) for i in range(50)], levels))
    np.testing.assert_allclose(levels[0] + np.concatenate([[0], np.cumsum(d.y)]), levels,
                               atol=1e-12)


def test_exog_driver_alignment():
    # the filter feeds x[t] into f_{t+1}; check that f at y_t uses Y_{t-1}
    from mstvtp import run_filter
    levels = np.array([1.0, 2.0, 4.0, 7.0])
    data = difference(levels)
    spec = ModelSpec(2, "diagonal", "common", "exog")
    out = run_filter(data, spec, Params([0, 0], [1.0], [0.0, 0.0], [1.0, 1.0]))
    # y_2 = Y_2 - Y_1 is the second difference; its transition uses Y_1 = 2.0
    np.testing.assert_allclose(out.f_path[1], [2.0, 2.0])
    np.testing.assert_allclose(out.f_path[2], [4.0, 4.0])


def test_aic_identity():
    aic, _ = information_criteria(-8.98, 12, 662)
    assert aic == pytest.approx(41.96)
    assert 2 * 12 - 2 * (-8.98) == pytest.approx(41.96)


def test_variance_order():
    p = Params([0.0, 1.0, 2.0], [0.1, 0.9, 0.5], np.zeros(6))
    assert list(variance_order(p)) == [1, 2, 0]


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    path = tmp_path_factory.mktemp("emp") / "y.csv"
    write_yields(path, n=200, maturities=(1, 12))
    series = ingest_yields(path, [1, 12])
    return run_empirical(series, [1, 12], ["const", "exog", "gas"], n_starts=2, seed=3)


def test_report_rows(small_report):
    rows = small_report.fit_rows()
    assert len(rows) == 6
    assert {r["p"] for r in rows} == {12, 18, 24}
    for r in rows:
        s2 = [r["sigma2_1"], r["sigma2_2"], r["sigma2_3"]]
        assert s2 == sorted(s2, reverse=True)
        assert r["starts"] == 2 and 0 <= r["starts_converged"] <= 2
        if r["model"] != "gas":
            assert r["gas_collapsed"] is None
        if r["converged"]:
            assert r["aic"] == pytest.approx(2 * r["p"] - 2 * r["loglik"])
            assert r["bic"] == pytest.approx(r["p"] * np.log(199 - EMPIRICAL_CUTOFF) - 2 * r["loglik"])


def test_classification_files(small_report, tmp_path):
    paths = small_report.write(tmp_path)
    assert len(paths) == 7
    with open(tmp_path / "classification_12m_exog.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["date", "y", "regime_rank", "p_1", "p_2", "p_3"]
    assert len(rows) == 199 and rows[0]["date"] == "1961-07"
    fit = small_report.get(12, "exog")
    for row, probs in zip(rows[:20], fit.probs_ordered[:20]):
        assert int(row["regime_rank"]) == int(np.argmax(probs)) + 1
        assert sum(float(row[f"p_{k}"]) for k in (1, 2, 3)) == pytest.approx(1.0)
