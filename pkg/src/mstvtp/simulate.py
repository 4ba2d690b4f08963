"""Synthetic data from any of the four dynamics families, plus the nine study presets."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as kern
from .dynamics import effective_family, gauss_hermite
from .errors import DimensionError, ParameterError
from .filtering import Dataset
from .model import Dynamics, ModelSpec, Params, link_matrix_to_f

PURPOSES = ("data", "covariate", "starts")


@dataclass
class SimOutput:
    y: np.ndarray
    z: np.ndarray          # 0-based regime labels
    pi_true_path: np.ndarray
    x: Optional[np.ndarray]
    seed: int
    f_true_path: Optional[np.ndarray] = None

    def dataset(self, label: str = "") -> Dataset:
        return Dataset(self.y, self.x, label)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y", "z"] + (["x"] if self.x is not None else []))
            for t in range(self.y.size):
                row = [t + 1, repr(float(self.y[t])), int(self.z[t]) + 1]
                if self.x is not None:
                    row.append(repr(float(self.x[t])))
                w.writerow(row)


def rng_for(base_seed: int, *key, purpose: str = "data") -> np.random.Generator:
    """Counter-based Philox stream for a (base_seed, *key, purpose) tuple.

    Streams are derived through ``SeedSequence`` spawn keys, so each
    replication's draws are fixed regardless of execution order.
    """
    if purpose not in PURPOSES:
        raise ValueError(f"unknown purpose {purpose!r}")
    spawn = tuple(int(k) for k in key) + (PURPOSES.index(purpose),)
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=spawn)
    return np.random.Generator(np.random.Philox(ss))


def simulate(spec: ModelSpec, params: Params, T: int, burn_in: int = 100, seed: int = 0,
             x=None, rng: np.random.Generator | None = None) -> SimOutput:
    """Simulate T + burn_in steps and keep the last T.

    For the exogenous-covariate family an i.i.d. standard normal covariate is
    drawn unless ``x`` (length T + burn_in) is given. The score-driven family
    runs the filter at the true parameters on the simulated history.
    """
    params.validate(spec)
    if T < 1 or burn_in < 0:
        raise DimensionError("T must be >= 1 and burn_in >= 0")
    n = T + burn_in
    if rng is None:
        rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(n)
    eps = rng.standard_normal(n)
    drv = np.zeros(0)
    if spec.dynamics is Dynamics.MODEL_II:
        if x is None:
            drv = rng.standard_normal(n)
        else:
            drv = np.asarray(x, dtype=float)
            if drv.shape != (n,):
                raise DimensionError(f"x must have length T + burn_in = {n}")
    K, d = spec.K, spec.n_f
    ghx, ghw = gauss_hermite()
    y, z, pis, fp = kern.simulate_chain(
        u, eps, drv, params.mu, params.sigma2_full(K), params.f0,
        params.coef if params.coef is not None else np.zeros(d),
        params.B if params.B is not None else np.zeros(d),
        effective_family(spec, params), spec.diagonal, K, ghx, ghw)
    keep = slice(burn_in, n)
    xs = drv[keep].copy() if spec.dynamics is Dynamics.MODEL_II else None
    return SimOutput(y=y[keep].copy(), z=z[keep].copy(), pi_true_path=pis[keep].copy(), x=xs,
                     seed=seed, f_true_path=fp[keep].copy())


def _diag_f(p11, p22):
    spec = ModelSpec(2, "diagonal")
    return link_matrix_to_f(np.array([[p11, 1 - p11], [1 - p22, p22]]), spec)


def _offdiag_f(K, off):
    """f from the off-diagonal baseline probabilities listed row by row."""
    P = np.zeros((K, K))
    it = iter(off)
    for i in range(K):
        for l in range(K):
            if l != i:
                P[i, l] = next(it)
        P[i, i] = 1.0 - P[i].sum()
    return link_matrix_to_f(P, ModelSpec(K, "offdiagonal"))


K3_OFF = (0.08, 0.08, 0.10, 0.10, 0.06, 0.06)


def dgp_preset(dgp_id: int) -> tuple[ModelSpec, Params]:
    """True specification and parameters of study design ``dgp_id`` (1..9)."""
    if dgp_id in (1, 2, 3, 4):
        dyn = {1: "const", 2: "tvp", 3: "exog", 4: "gas"}[dgp_id]
        spec = ModelSpec(2, "diagonal", "common", dyn)
        f0 = _diag_f(0.80, 0.90)
        coef = {1: None, 2: [0.15, -0.10], 3: [0.20, -0.20], 4: [0.10, -0.10]}[dgp_id]
        B = [0.90, 0.85] if dgp_id == 4 else None
        return spec, Params([-1.0, 1.0], [0.5], f0, coef, B)
    if dgp_id == 5:
        spec = ModelSpec(2, "offdiagonal", "regime", "tvp")
        return spec, Params([-1.0, 1.0], [0.3, 0.7], _offdiag_f(2, (0.20, 0.15)), [0.10, -0.10])
    if dgp_id in (6, 7, 8, 9):
        dyn = {6: "const", 7: "tvp", 8: "exog", 9: "gas"}[dgp_id]
        spec = ModelSpec(3, "offdiagonal", "regime", dyn)
        coef = {
            6: None,
            7: [0.05, -0.03, 0.04, -0.04, 0.03, -0.05],
            8: [0.08, -0.04, 0.05, -0.06, 0.04, -0.07],
            9: [0.03] * 6,
        }[dgp_id]
        B = [0.85] * 6 if dgp_id == 9 else None
        return spec, Params([-2.0, 0.0, 2.0], [0.3, 0.5, 0.8], _offdiag_f(3, K3_OFF), coef, B)
    raise ParameterError(f"DGP id must be in 1..9, got {dgp_id}")

