import json

import pytest

from mstvtp import McScenario, default_grid, run_scenario, run_scenarios
from mstvtp.model import Dynamics
from mstvtp.montecarlo import TABLE_FILES, aggregate, load_records


def test_default_grid_shape():
    grid = default_grid()
    assert len(grid) == 18
    cell = {(s.dgp_id, s.T): s for s in grid}
    assert set(cell[(5, 500)].estimation_models) == {Dynamics.CONSTANT, Dynamics.MODEL_I}
    assert len(cell[(9, 1000)].estimation_models) == 4
    assert cell[(1, 500)].estimation_models == [Dynamics.CONSTANT]
    assert all(s.R == 50 and s.n_starts == 10 and s.cutoff == 10 and s.burn_in == 100 for s in grid)


def test_scenario_validation():
    with pytest.raises(ValueError):
        McScenario(1, 500, ["tvp"])
    with pytest.raises(ValueError):
        McScenario(12, 500)
    with pytest.raises(ValueError):
        McScenario(1, 5, R=1)
    assert McScenario(3, 500, ["exog", "const"]).estimation_models == [Dynamics.MODEL_II,
                                                                       Dynamics.CONSTANT]


SMALL = dict(R=2, n_starts=2, burn_in=50)


def test_smoke_and_records(tmp_path):
    s = McScenario(3, 200, ["const", "exog"], **SMALL)
    res = run_scenario(s, tmp_path / "r.jsonl")
    assert len(res.records) == 4
    assert {(r["model"], r["rep"]) for r in res.records} == {
        (m, k) for m in ("const", "exog") for k in (1, 2)}
    assert all(r["error"] is None for r in res.records)
    assert sum(r["correct"] for r in res.records) == 2
    paths = res.write_tables(tmp_path / "tables")
    assert [p.name for p in paths] == list(TABLE_FILES)
    t5 = res.table("forecast", model="exog")
    assert len(t5) == 1 and t5[0]["r"] == 2
    groups = {r["group"] for r in res.table("recovery")}
    assert groups == {"mu", "sigma2", "pi", "A"}


def test_deterministic_and_resumable(tmp_path):
    s = McScenario(1, 200, **SMALL)
    a = run_scenario(s, tmp_path / "a.jsonl")
    b = run_scenario(s, tmp_path / "b.jsonl")
    assert json.dumps(a.tables, sort_keys=True) == json.dumps(b.tables, sort_keys=True)
    n = len(load_records(tmp_path / "a.jsonl"))
    again = run_scenario(s, tmp_path / "a.jsonl")
    assert len(load_records(tmp_path / "a.jsonl")) == n
    assert json.dumps(again.tables, sort_keys=True) == json.dumps(a.tables, sort_keys=True)
    more = run_scenario(McScenario(1, 200, R=3, n_starts=2, burn_in=50), tmp_path / "a.jsonl")
    assert len(more.records) == 3 and len(load_records(tmp_path / "a.jsonl")) == 3


def test_seed_changes_results(tmp_path):
    a = run_scenarios([McScenario(1, 200, **SMALL)])
    b = run_scenarios([McScenario(1, 200, base_seed=1, **SMALL)])
    assert a.records[0]["loglik"] != b.records[0]["loglik"]


def test_aggregate_empty_and_failed():
    assert all(v == [] for v in aggregate([]).values())
    rec = {"dgp": 1, "T": 500, "model": "const", "rep": 1, "K": 2, "correct": True,
           "converged": False, "error": "DegeneracyError: x"}
    tables = aggregate([rec])
    assert all(v == [] for v in tables.values())


def test_filtprob_recorded_for_correct_model_only(tmp_path):
    s = McScenario(2, 200, ["const", "tvp"], R=1, n_starts=2, burn_in=50)
    recs = run_scenario(s).records
    by = {r["model"]: r for r in recs}
    assert "filtprob" in by["tvp"] and "filtprob" not in by["const"]
    assert 0 <= by["tvp"]["filtprob"]["mse"] < 1
