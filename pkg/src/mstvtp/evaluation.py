"""Label alignment, recovery/coverage/forecast metrics and profile likelihoods."""
from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DimensionError
from .estimation import Objective, local_fit
from .filtering import Dataset, FilterOutput
from .model import ModelSpec, Params, f_permutation, permute_params, pi_elements

TRIM_THRESHOLD = 10.0
Z95 = 1.96


class Group(str, enum.Enum):
    MU = "mu"
    SIGMA2 = "sigma2"
    PI = "pi"
    A = "A"


@dataclass
class MetricsRow:
    group: Group
    bias: float
    rmse: float
    coverage: float
    n_used: int


@dataclass
class ForecastMetrics:
    mafe: float
    msfe: float
    masfe: float
    mssfe: float


def align_labels(mu_hat, mu_true) -> tuple[int, ...]:
    """Permutation ``perm`` minimising sum_i |mu_hat[perm[i]] - mu_true[i]|.

    Exhaustive over K! orderings; ties keep the lexicographically first.
    """
    mu_hat = np.asarray(mu_hat, dtype=float)
    mu_true = np.asarray(mu_true, dtype=float)
    if mu_hat.shape != mu_true.shape:
        raise DimensionError("mu_hat and mu_true differ in length")
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(mu_hat.size)):
        cost = np.abs(mu_hat[list(perm)] - mu_true).sum()
        if cost < best_cost:
            best, best_cost = perm, cost
    return best


def align_to_truth(params: Params, spec: ModelSpec, truth: Params,
                   se: Optional[Params] = None, se_pi=None):
    """Relabel an estimate (and its SEs) to match the true regime ordering."""
    perm = align_labels(params.mu, truth.mu)
    out = permute_params(params, spec, perm)
    se_out = None if se is None else permute_params(se, spec, perm)
    se_pi_out = None
    if se_pi is not None:
        se_pi_out = np.asarray(se_pi)[f_permutation(spec, perm)]
    return out, se_out, se_pi_out, perm


def group_values(params: Params, spec: ModelSpec) -> dict[str, np.ndarray]:
    out = {Group.MU.value: params.mu, Group.SIGMA2.value: params.sigma2,
           Group.PI.value: pi_elements(params.f0, spec)}
    if params.coef is not None:
        out[Group.A.value] = params.coef
    return {k: np.asarray(v, dtype=float) for k, v in out.items()}


def group_ses(se: Params, se_pi) -> dict[str, np.ndarray]:
    out = {Group.MU.value: se.mu, Group.SIGMA2.value: se.sigma2,
           Group.PI.value: np.asarray(se_pi, dtype=float)}
    if se.coef is not None:
        out[Group.A.value] = se.coef
    return {k: np.asarray(v, dtype=float) for k, v in out.items()}


def recovery_metrics(estimates: Sequence[Mapping[str, np.ndarray]],
                     truths: Mapping[str, np.ndarray],
                     ses: Sequence[Optional[Mapping[str, np.ndarray]]] | None = None,
                     trim_rule: float = TRIM_THRESHOLD) -> dict[str, MetricsRow]:
    """Bias, RMSE and Wald coverage per parameter group.

    Element-level bias and RMSE are averaged within the group (signed biases
    can cancel). Replications with any |A| above ``trim_rule`` are dropped
    from the A group only. Coverage uses replications whose SE is finite.
    """
    if ses is None:
        ses = [None] * len(estimates)
    rows = {}
    for g, truth in truths.items():
        truth = np.asarray(truth, dtype=float)
        keep = []
        for est, se in zip(estimates, ses):
            if g not in est:
                continue
            if g == Group.A.value and np.any(np.abs(est[g]) > trim_rule):
                continue
            keep.append((np.asarray(est[g], float), None if se is None else np.asarray(se[g], float)))
        if not keep:
            rows[g] = MetricsRow(Group(g), np.nan, np.nan, np.nan, 0)
            continue
        E = np.array([e for e, _ in keep])
        err = E - truth
        bias = err.mean(axis=0)
        rmse = np.sqrt((err ** 2).mean(axis=0))
        hits, counted = np.zeros(truth.size), np.zeros(truth.size)
        for e, s in keep:
            if s is None:
                continue
            ok = np.isfinite(s)
            counted += ok
            hits += ok & (np.abs(e - truth) <= Z95 * np.where(ok, s, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            cov = np.where(counted > 0, hits / counted, np.nan)
        coverage = float(np.nanmean(cov)) if np.any(counted > 0) else np.nan
        rows[g] = MetricsRow(Group(g), float(bias.mean()), float(rmse.mean()), coverage, len(keep))
    return rows


def forecast_metrics(out: FilterOutput, y, cutoff: int | None = None) -> ForecastMetrics:
    """One-step-ahead point-forecast errors over t > cutoff."""
    y = np.asarray(y, dtype=float)
    if y.shape != out.pred_mean.shape:
        raise DimensionError("y and filter output differ in length")
    c = out.cutoff if cutoff is None else cutoff
    if np.any(out.pred_var[c:] <= 0):
        raise AssertionError("non-positive predictive variance")
    e = y[c:] - out.pred_mean[c:]
    z = e / np.sqrt(out.pred_var[c:])
    return ForecastMetrics(mafe=float(np.mean(np.abs(e))), msfe=float(np.mean(e ** 2)),
                           masfe=float(np.mean(np.abs(z))), mssfe=float(np.mean(z ** 2)))


def filtered_prob_accuracy(pi_hat_path, pi_true_path) -> tuple[float, float]:
    """Mean squared and mean absolute error over every (t, i, j) transition entry."""
    a = np.asarray(pi_hat_path, dtype=float)
    b = np.asarray(pi_true_path, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"path shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.mean(diff ** 2)), float(np.mean(np.abs(diff)))


_ALIASES = {"theta": "coef", "gamma": "coef", "A": "coef", "alpha": "f0", "beta": "f0",
            "omega": "f0"}


def _resolve(name: str, spec: ModelSpec) -> int:
    base, _, rest = name.partition("[")
    base = _ALIASES.get(base, base)
    full = f"{base}[{rest}" if rest else f"{base}[0]"
    names = spec.param_names()
    if full not in names:
        raise KeyError(f"{name!r} is not a parameter of {spec}")
    return names.index(full)


@dataclass
class ProfileResult:
    labels: list[str]
    axes: list[np.ndarray]
    loglik: np.ndarray        # NaN where the inner fit failed
    loglik_raw: np.ndarray
    converged: np.ndarray

    def argmax(self):
        idx = np.unravel_index(np.nanargmax(self.loglik), self.loglik.shape)
        return tuple(ax[i] for ax, i in zip(self.axes, idx))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.labels + ["loglik", "converged"])
            for idx in np.ndindex(self.loglik.shape):
                vals = [repr(float(ax[i])) for ax, i in zip(self.axes, idx)]
                ll = self.loglik[idx]
                w.writerow(vals + ["" if np.isnan(ll) else repr(float(ll)), int(self.converged[idx])])


def profile_loglik(data: Dataset, spec: ModelSpec, params_hat: Params, dims, grid,
                   cutoff: int = 10) -> ProfileResult:
    """Profile log-likelihood over one or two coordinates.

    Each entry of ``dims`` is a parameter name (``"sigma2[0]"``, ``"A[1]"``, ...)
    or a mapping ``{name: weight}`` describing a direction: grid value v fixes
    every named parameter at ``v * weight`` on the natural scale. For two
    dims, ``grid`` is a pair of 1-D arrays. All other parameters are
    re-optimized from ``params_hat`` at every grid point.
    """
    if isinstance(dims, (str, Mapping)):
        dims = [dims]
    dims = [({d: 1.0} if isinstance(d, str) else dict(d)) for d in dims]
    if len(dims) not in (1, 2):
        raise DimensionError("profile over one or two coordinates only")
    axes = [np.asarray(grid, float).reshape(-1)] if len(dims) == 1 else [np.asarray(g, float).reshape(-1) for g in grid]
    if any(not np.all(np.isfinite(ax)) for ax in axes):
        raise ValueError("grid must be finite")
    fun = Objective(data, spec, cutoff)
    nat_hat = params_hat.to_vector(spec)
    coords = [{_resolve(n, spec): w for n, w in d.items()} for d in dims]
    free = np.ones(spec.n_params, bool)
    for c in coords:
        for k in c:
            free[k] = False
    shape = tuple(ax.size for ax in axes)
    ll = np.full(shape, np.nan)
    raw = np.full(shape, np.nan)
    conv = np.zeros(shape, bool)
    for idx in np.ndindex(shape):
        nat = nat_hat.copy()
        for c, ax, i in zip(coords, axes, idx):
            for k, w in c.items():
                nat[k] = ax[i] * w
        try:
            fit = local_fit(fun, fun.tm.forward(nat), free)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError):
            continue
        raw[idx] = -fit.nll
        conv[idx] = fit.converged
        if fit.converged:
            ll[idx] = -fit.nll
    labels = ["+".join(f"{w:g}*{n}" if w != 1 else n for n, w in d.items()) for d in dims]
    return ProfileResult(labels=labels, axes=axes, loglik=ll, loglik_raw=raw, converged=conv)
