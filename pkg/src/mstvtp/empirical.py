"""Yield-curve ingestion and the three-regime empirical fits.

Input CSV layout: a header row, ISO month dates (``YYYY-MM``, a trailing
``-DD`` is ignored) in the first column and one column per maturity named by
its integer number of months.
"""
from __future__ import annotations

import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, IngestionError
from .estimation import EstimationResult, estimate, transforms_for
from .filtering import Dataset, run_filter
from .model import Dynamics, ModelSpec, Params, permute_params

_DATE = re.compile(r"^(\d{4})-(\d{2})(?:-\d{2})?$")
EMPIRICAL_K = 3
# The published information criteria imply 662 = 762 - 100 likelihood terms,
# so the empirical burn-in acts as a cut-off on the log-likelihood sum.
EMPIRICAL_CUTOFF = 100


@dataclass
class LevelSeries:
    maturity: int
    dates: list[str]
    levels: np.ndarray

    def __len__(self):
        return self.levels.size


def _month(text: str, where: str) -> str:
    m = _DATE.match(text.strip())
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise IngestionError(f"unparseable date {text!r} at {where}")
    return f"{m.group(1)}-{m.group(2)}"


def ingest_yields(path, maturity_columns: Sequence[int | str],
                  date_range: tuple[str, str] | None = None) -> dict[int, LevelSeries]:
    """Read level series for the requested maturities, optionally date-filtered (inclusive)."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"{path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        rows = list(reader)
    wanted = [str(int(str(m).rstrip("m"))) for m in maturity_columns]
    cols = {}
    for m in wanted:
        if m not in header[1:]:
            raise IngestionError(f"maturity column {m!r} not found in {path}; have {header[1:]}")
        cols[m] = header.index(m)
    lo, hi = (None, None) if date_range is None else (_month(date_range[0], "date_range"),
                                                      _month(date_range[1], "date_range"))
    dates, values = [], {m: [] for m in wanted}
    for r, row in enumerate(rows, start=2):
        if not row or not "".join(row).strip():
            continue
        d = _month(row[0], f"row {r}, column {header[0]!r}")
        if (lo and d < lo) or (hi and d > hi):
            continue
        dates.append(d)
        for m, c in cols.items():
            cell = row[c].strip() if c < len(row) else ""
            try:
                v = float(cell)
            except ValueError:
                v = float("nan")
            if not np.isfinite(v):
                raise IngestionError(f"missing or invalid value {cell!r} at row {r} ({d}), column {m!r}")
            values[m].append(v)
    if sorted(dates) != dates or len(set(dates)) != len(dates):
        raise IngestionError("dates are not strictly increasing")
    return {int(m): LevelSeries(int(m), dates, np.array(values[m])) for m in wanted}


def difference(levels: LevelSeries | np.ndarray, label: str = "") -> Dataset:
    """First differences y_t = Y_t - Y_{t-1}, with the lagged level as covariate.

    The covariate array holds the level dated t, so the driver of the
    transition at y_t is Y_{t-1}.
    """
    if isinstance(levels, LevelSeries):
        Y, dates = levels.levels, levels.dates
        label = label or f"{levels.maturity}m"
    else:
        Y, dates = np.asarray(levels, dtype=float), None
    if Y.size < 2:
        raise DimensionError("need at least two levels to difference")
    return Dataset(np.diff(Y), Y[1:].copy(), label, None if dates is None else list(dates[1:]))


def variance_order(params: Params) -> np.ndarray:
    """Regime permutation sorting variances from largest to smallest."""
    return np.argsort(-np.broadcast_to(params.sigma2, params.mu.shape), kind="stable")


@dataclass
class EmpiricalFit:
    maturity: int
    model: Dynamics
    result: EstimationResult
    params_ordered: Params
    regime_rank: np.ndarray       # 1 = highest variance
    probs_ordered: np.ndarray     # (T, K) filtered probabilities in rank order
    dates: Optional[list]
    y: np.ndarray

    @property
    def gas_collapsed(self) -> Optional[bool]:
        """For GAS fits: whether every converged start ended with A == 0."""
        if self.model is not Dynamics.MODEL_III:
            return None
        conv = [s for s in self.result.starts if s.converged]
        if not conv:
            return None
        spec = self.result.spec
        return all(np.max(np.abs(_natural_coef(s.u, spec)[:spec.n_f])) < 1e-6 for s in conv)


def _natural_coef(u, spec):
    nat = transforms_for(spec).inverse(u)
    off = spec.K + spec.n_sigma2 + spec.n_f
    return nat[off:]


@dataclass
class EmpiricalReport:
    fits: list[EmpiricalFit] = field(default_factory=list)

    def fit_rows(self) -> list[dict]:
        rows = []
        for f in self.fits:
            r = f.result
            row = {"maturity": f.maturity, "model": f.model.value, "loglik": r.loglik,
                   "aic": r.aic, "bic": r.bic, "p": r.n_params, "converged": r.converged,
                   "starts_converged": r.n_starts_converged, "starts": r.n_starts}
            for i, (m, s2) in enumerate(zip(f.params_ordered.mu,
                                            f.params_ordered.sigma2_full(r.spec.K)), start=1):
                row[f"mu_{i}"] = m
                row[f"sigma2_{i}"] = s2
            row["gas_collapsed"] = f.gas_collapsed
            rows.append(row)
        return rows

    def write(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = self.fit_rows()
        paths = [out_dir / "empirical_fits.csv"]
        with open(paths[0], "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else ["maturity"])
            w.writeheader()
            w.writerows(rows)
        for f in self.fits:
            p = out_dir / f"classification_{f.maturity}m_{f.model.value}.csv"
            K = f.probs_ordered.shape[1]
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["date", "y", "regime_rank"] + [f"p_{k}" for k in range(1, K + 1)])
                for t in range(f.y.size):
                    date = f.dates[t] if f.dates else t + 1
                    w.writerow([date, repr(float(f.y[t])), int(f.regime_rank[t])]
                               + [repr(float(v)) for v in f.probs_ordered[t]])
            paths.append(p)
        return paths

    def get(self, maturity: int, model) -> EmpiricalFit:
        model = Dynamics.parse(model) if isinstance(model, str) else model
        return next(f for f in self.fits if f.maturity == maturity and f.model is model)


def empirical_spec(model) -> ModelSpec:
    model = model if isinstance(model, Dynamics) else Dynamics.parse(model)
    return ModelSpec(EMPIRICAL_K, "offdiagonal", "regime", model)


def fit_maturity(data: Dataset, maturity: int, model, n_starts: int = 100, seed: int = 0,
                 cutoff: int = EMPIRICAL_CUTOFF) -> EmpiricalFit:
    spec = empirical_spec(model)
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=(maturity, spec.dynamics.code))))
    res = estimate(data, spec, n_starts=n_starts, cutoff=cutoff, rng=rng,
                   compute_se=False)
    order = variance_order(res.params_hat)
    ordered = permute_params(res.params_hat, spec, order)
    out = run_filter(data, spec, ordered, cutoff, on_degenerate="flag")
    return EmpiricalFit(maturity, spec.dynamics, res, ordered,
                        np.argmax(out.xi_filt, axis=1) + 1, out.xi_filt, data.dates, data.y)


def run_empirical(series: dict[int, LevelSeries], maturities: Sequence[int] = (1, 12, 36, 72),
                  models: Sequence = ("const", "tvp", "exog", "gas"), n_starts: int = 100,
                  seed: int = 0, cutoff: int = EMPIRICAL_CUTOFF, threads: int = 1) -> EmpiricalReport:
    """Fit every (maturity, model) cell. Non-converged cells are reported, not dropped."""
    jobs = [(m, Dynamics.parse(mod) if isinstance(mod, str) else mod)
            for m in maturities for mod in models]
    datasets = {m: difference(series[m]) for m in maturities}

    def run(job):
        m, mod = job
        return fit_maturity(datasets[m], m, mod, n_starts, seed, cutoff)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            fits = list(ex.map(run, jobs))
    else:
        fits = [run(j) for j in jobs]
    return EmpiricalReport(fits)
