"""Hamilton filter for Gaussian Markov-switching models with time-varying transitions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as kern
from .dynamics import effective_family, gauss_hermite
from .errors import DegeneracyError, DimensionError, InputError
from .model import Dynamics, ModelSpec, Params


@dataclass
class Dataset:
    """Observations plus an optional covariate.

    ``x[t]`` is the t-dated driver, i.e. it enters f_{t+1}.
    """

    y: np.ndarray
    x: Optional[np.ndarray] = None
    label: str = ""
    dates: Optional[list] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if not np.all(np.isfinite(self.y)):
            raise InputError(f"y contains non-finite values at {np.flatnonzero(~np.isfinite(self.y))[:5]}")
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float).reshape(-1)
            if self.x.shape != self.y.shape:
                raise DimensionError(f"x has length {self.x.size} but y has {self.y.size}")
            if not np.all(np.isfinite(self.x)):
                raise InputError("x contains non-finite values")

    def __len__(self):
        return self.y.size

    def with_covariate(self, x) -> "Dataset":
        return Dataset(self.y, x, self.label, self.dates)


@dataclass
class FilterOutput:
    loglik: float
    xi_pred: np.ndarray
    xi_filt: np.ndarray
    pi_path: np.ndarray
    pred_mean: np.ndarray
    pred_var: np.ndarray
    cutoff: int
    loglik_t: np.ndarray
    f_path: np.ndarray
    score_path: np.ndarray
    degenerate_t: int = -1
    n_degenerate: int = 0
    n_identity_scaling: int = 0

    @property
    def degenerate(self) -> bool:
        return self.n_degenerate > 0


def kernel_args(data: Dataset, spec: ModelSpec, params: Params):
    """Positional arguments shared by the compiled filter entry points."""
    K, d = spec.K, spec.n_f
    drv = data.x if spec.dynamics is Dynamics.MODEL_II else None
    if drv is None:
        drv = np.zeros(0)
    coef = params.coef if params.coef is not None else np.zeros(d)
    bpers = params.B if params.B is not None else np.zeros(d)
    ghx, ghw = gauss_hermite()
    return (data.y, drv, params.mu, params.sigma2_full(K), params.f0,
            np.ascontiguousarray(coef, dtype=float), np.ascontiguousarray(bpers, dtype=float),
            effective_family(spec, params), spec.diagonal, K, ghx, ghw)


def check_inputs(data: Dataset, spec: ModelSpec, params: Params, cutoff: int):
    params.validate(spec)
    if cutoff < 0:
        raise DimensionError("cutoff must be nonnegative")
    if len(data) < cutoff + 2:
        raise DimensionError(f"need at least cutoff + 2 = {cutoff + 2} observations, got {len(data)}")
    if spec.dynamics is Dynamics.MODEL_II and data.x is None:
        raise DimensionError("the exogenous-covariate model needs a covariate series")


def run_filter(data: Dataset, spec: ModelSpec, params: Params, cutoff: int = 0,
               on_degenerate: str = "raise") -> FilterOutput:
    """Forward recursion over all T observations.

    The first ``cutoff`` log predictive densities are computed but left out of
    ``loglik``. Predictive densities below 1e-300 are floored; with
    ``on_degenerate="raise"`` that raises :class:`DegeneracyError`, with
    ``"flag"`` the output records it in ``degenerate_t``/``n_degenerate``.
    """
    check_inputs(data, spec, params, cutoff)
    ll_t, xi_pred, xi_filt, pis, fp, sp, info = kern.hamilton(*kernel_args(data, spec, params))
    if info[1] and on_degenerate == "raise":
        raise DegeneracyError(f"predictive density underflowed at t={info[0]}", int(info[0]))
    mu = params.mu
    s2 = params.sigma2_full(spec.K)
    pred_mean = xi_pred @ mu
    pred_var = xi_pred @ (s2 + mu ** 2) - pred_mean ** 2
    # cancellation can push the mixture variance a hair below the smallest component
    pred_var = np.maximum(pred_var, s2.min())
    return FilterOutput(
        loglik=float(ll_t[cutoff:].sum()), xi_pred=xi_pred, xi_filt=xi_filt, pi_path=pis,
        pred_mean=pred_mean, pred_var=pred_var, cutoff=cutoff, loglik_t=ll_t,
        f_path=fp, score_path=sp, degenerate_t=int(info[0]), n_degenerate=int(info[1]),
        n_identity_scaling=int(info[2]),
    )


def loglik(data: Dataset, spec: ModelSpec, params: Params, cutoff: int = 0) -> float:
    """Log-likelihood only (floored densities, no validation beyond the kernel)."""
    args = kernel_args(data, spec, params)
    value, _ = kern.loglik_only(*args, cutoff)
    return float(value)


def classify_regimes(out: FilterOutput) -> np.ndarray:
    """Most probable regime per period (0-based; ties go to the lowest index)."""
    return np.argmax(out.xi_filt, axis=1)
