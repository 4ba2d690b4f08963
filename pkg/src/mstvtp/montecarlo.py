"""Monte Carlo grid: simulate, fit every estimation model, align, score, aggregate.

Each replication's draws come from independent Philox streams keyed by
(base_seed, dgp, T, replication, purpose), so the same simulated dataset is
shared by every estimation model of a replication while start points differ
per model. Replication records are appended to a JSON-lines file as they
finish; re-running with the same file skips what is already there.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import MSError
from .estimation import estimate
from .evaluation import (align_to_truth, filtered_prob_accuracy, forecast_metrics, group_ses,
                         group_values, recovery_metrics)
from .filtering import Dataset, run_filter
from .model import Dynamics
from .simulate import dgp_preset, rng_for, simulate

log = logging.getLogger(__name__)

ALL_MODELS = (Dynamics.CONSTANT, Dynamics.MODEL_I, Dynamics.MODEL_II, Dynamics.MODEL_III)
TABLE1_MODELS = {
    1: (Dynamics.CONSTANT,),
    5: (Dynamics.CONSTANT, Dynamics.MODEL_I),
    6: (Dynamics.CONSTANT,),
}
TABLE_FILES = ("table3_recovery.csv", "table4_coverage.csv", "table5_forecast.csv",
               "table6_filtprob.csv")


def table1_models(dgp_id: int) -> tuple[Dynamics, ...]:
    return TABLE1_MODELS.get(dgp_id, ALL_MODELS)


@dataclass
class McScenario:
    dgp_id: int
    T: int
    estimation_models: list = field(default_factory=list)
    R: int = 50
    n_starts: int = 10
    burn_in: int = 100
    cutoff: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.dgp_id <= 9:
            raise ValueError(f"dgp_id must be in 1..9, got {self.dgp_id}")
        allowed = table1_models(self.dgp_id)
        models = self.estimation_models or list(allowed)
        self.estimation_models = [m if isinstance(m, Dynamics) else Dynamics.parse(m)
                                  for m in models]
        extra = [m for m in self.estimation_models if m not in allowed]
        if extra:
            raise ValueError(f"DGP {self.dgp_id} is not estimated under {[m.value for m in extra]}")
        if self.R < 1 or self.n_starts < 1 or self.T <= self.cutoff + 1:
            raise ValueError("need R >= 1, n_starts >= 1 and T > cutoff + 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimation_models"] = [m.value for m in self.estimation_models]
        return d


def default_grid(R: int = 50, n_starts: int = 10, base_seed: int = 0) -> list[McScenario]:
    """The 9 DGP x 2 sample-size design with its estimation-model lists."""
    return [McScenario(dgp, T, list(table1_models(dgp)), R=R, n_starts=n_starts, burn_in=100,
                       cutoff=10, base_seed=base_seed)
            for dgp in range(1, 10) for T in (500, 1000)]


def _key(rec) -> tuple:
    return rec["dgp"], rec["T"], rec["model"], rec["rep"]


def run_replication(s: McScenario, rep: int) -> list[dict]:
    """Simulate replication ``rep`` (1-based) once and fit every estimation model."""
    true_spec, truth = dgp_preset(s.dgp_id)
    sim = simulate(true_spec, truth, s.T, s.burn_in,
                   rng=rng_for(s.base_seed, s.dgp_id, s.T, rep, purpose="data"))
    noise_x = rng_for(s.base_seed, s.dgp_id, s.T, rep, purpose="covariate").standard_normal(s.T)
    x = sim.x if true_spec.dynamics is Dynamics.MODEL_II else noise_x
    data = Dataset(sim.y, x, label=f"dgp{s.dgp_id}-T{s.T}-r{rep}")
    out_true = None
    records = []
    for model in s.estimation_models:
        spec = true_spec.with_dynamics(model)
        correct = model is true_spec.dynamics
        rec = {"dgp": s.dgp_id, "T": s.T, "model": model.value, "rep": rep,
               "K": true_spec.K, "correct": correct, "converged": False, "error": None}
        try:
            res = estimate(data, spec, n_starts=s.n_starts, cutoff=s.cutoff,
                           rng=rng_for(s.base_seed, s.dgp_id, s.T, rep, model.code,
                                       purpose="starts"))
            aligned, se, se_pi, perm = align_to_truth(res.params_hat, spec, truth, res.se, res.se_pi)
            rec.update(converged=res.converged, n_starts_converged=res.n_starts_converged,
                       loglik=res.loglik, perm=list(perm), params=aligned.to_dict(),
                       se_ok=res.se_ok,
                       groups={k: v.tolist() for k, v in group_values(aligned, spec).items()})
            if se is not None:
                rec["se"] = {k: [None if not np.isfinite(a) else float(a) for a in v]
                             for k, v in group_ses(se, se_pi).items()}
            out_hat = run_filter(data, spec, aligned, s.cutoff, on_degenerate="flag")
            rec["forecast"] = asdict(forecast_metrics(out_hat, data.y, s.cutoff))
            if correct:
                if out_true is None:
                    out_true = run_filter(data, true_spec, truth, s.cutoff, on_degenerate="flag")
                mse, mae = filtered_prob_accuracy(out_hat.pi_path, out_true.pi_path)
                rec["filtprob"] = {"mse": mse, "mae": mae}
        except (MSError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.warning("replication %s failed: %s", rec, exc)
            rec["error"] = f"{type(exc).__name__}: {exc}"
        records.append(rec)
    return records


def _se_array(v):
    return np.array([np.nan if a is None else a for a in v], dtype=float)


def aggregate(records: Iterable[dict], trim_rule: float = 10.0) -> dict[str, list[dict]]:
    """Fold replication records into the four summary tables (sorted, deterministic)."""
    cells: dict[tuple, list[dict]] = {}
    for rec in sorted(records, key=_key):
        cells.setdefault((rec["dgp"], rec["T"], rec["model"]), []).append(rec)
    t3, t4, t5, t6 = [], [], [], []
    for (dgp, T, model), recs in sorted(cells.items()):
        conv = [r for r in recs if r.get("converged") and r.get("error") is None]
        K = recs[0]["K"]
        base = {"dgp": dgp, "model": model, "K": K, "T": T}
        if conv:
            fc = {k: float(np.mean([r["forecast"][k] for r in conv]))
                  for k in ("mafe", "msfe", "masfe", "mssfe")}
            t5.append({**base, "r_c": len(conv), "r": len(recs), **fc})
        if not recs[0]["correct"] or not conv:
            continue
        true_spec, truth = dgp_preset(dgp)
        truths = group_values(truth, true_spec)
        ests = [{k: np.asarray(v) for k, v in r["groups"].items()} for r in conv]
        ses = [{k: _se_array(v) for k, v in r["se"].items()} if "se" in r else None for r in conv]
        rows = recovery_metrics(ests, truths, ses, trim_rule)
        for g, row in rows.items():
            t3.append({**base, "r_c": len(conv), "group": g, "bias": row.bias, "rmse": row.rmse,
                       "coverage": row.coverage, "n_used": row.n_used})
            t4.append({**base, "group": g, "coverage": row.coverage, "n_used": row.n_used})
        fp = [r["filtprob"] for r in conv if r.get("filtprob")]
        if fp:
            t6.append({**base, "r_c": len(conv), "mse": float(np.mean([f["mse"] for f in fp])),
                       "mae": float(np.mean([f["mae"] for f in fp]))})
    return dict(zip(TABLE_FILES, (t3, t4, t5, t6)))


@dataclass
class McResult:
    records: list[dict]
    tables: dict[str, list[dict]]

    def write_tables(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, rows in self.tables.items():
            path = out_dir / name
            cols = list(rows[0].keys()) if rows else _EMPTY_HEADERS[name]
            with open(path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols)
                w.writeheader()
                w.writerows(rows)
            paths.append(path)
        return paths

    def table(self, name: str, **where) -> list[dict]:
        key = name if name.endswith(".csv") else next(n for n in TABLE_FILES if name in n)
        return [r for r in self.tables[key] if all(r.get(k) == v for k, v in where.items())]


_EMPTY_HEADERS = {
    "table3_recovery.csv": ["dgp", "model", "K", "T", "r_c", "group", "bias", "rmse", "coverage", "n_used"],
    "table4_coverage.csv": ["dgp", "model", "K", "T", "group", "coverage", "n_used"],
    "table5_forecast.csv": ["dgp", "model", "K", "T", "r_c", "r", "mafe", "msfe", "masfe", "mssfe"],
    "table6_filtprob.csv": ["dgp", "model", "K", "T", "r_c", "mse", "mae"],
}


def load_records(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _rep_job(args):
    s, rep = args
    return run_replication(s, rep)


def run_scenarios(scenarios: list[McScenario], records_path=None, threads: int = 1,
                  trim_rule: float = 10.0) -> McResult:
    """Run (or resume) a list of scenarios and aggregate all their records."""
    done = load_records(records_path) if records_path else []
    have = {_key(r) for r in done}
    jobs = []
    for s in scenarios:
        for rep in range(1, s.R + 1):
            if any((s.dgp_id, s.T, m.value, rep) not in have for m in s.estimation_models):
                jobs.append((s, rep))
    fh = open(records_path, "a") if records_path else None
    new = []
    try:
        if threads > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(threads) as ex:
                results = ex.map(_rep_job, jobs)
                for recs in results:
                    new.extend(_emit(recs, have, fh))
        else:
            for job in jobs:
                new.extend(_emit(_rep_job(job), have, fh))
    finally:
        if fh:
            fh.close()
    wanted = {(s.dgp_id, s.T, m.value) for s in scenarios for m in s.estimation_models}
    reps = {(s.dgp_id, s.T): s.R for s in scenarios}
    records = [r for r in done + new
               if (r["dgp"], r["T"], r["model"]) in wanted and r["rep"] <= reps[(r["dgp"], r["T"])]]
    records.sort(key=_key)
    return McResult(records=records, tables=aggregate(records, trim_rule))


def _emit(recs, have, fh):
    out = []
    for rec in recs:
        if _key(rec) in have:
            continue
        have.add(_key(rec))
        out.append(rec)
        if fh:
            fh.write(json.dumps(rec) + "\n")
            fh.flush()
    return out


def run_scenario(s: McScenario, records_path=None, threads: int = 1) -> McResult:
    return run_scenarios([s], records_path, threads)
