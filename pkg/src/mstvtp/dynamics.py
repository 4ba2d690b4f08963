"""Time paths of the transition parameters f_t for the four dynamics families.

The score-driven family uses the mean-reverting recursion

    f_t = omega + A s_{t-1} + B (f_{t-1} - omega),    f_1 = omega,

with ``s`` the score of the one-step predictive log density, scaled by the
inverse square root of its conditional Fisher information. The information is
the expectation of the outer product of the score under the Gaussian predictive
mixture, integrated with 30-node Gauss-Hermite quadrature per component.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as kern
from .errors import DegeneracyError, DimensionError, InputError, ParameterError
from .model import Dynamics, ModelSpec, Params, link_f_to_matrix

GH_NODES = 30
FALLBACK_THRESHOLD = 1e-8


@lru_cache(maxsize=None)
def gauss_hermite(n: int = GH_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[g(Z)], Z ~ N(mu, s2), as g(mu + sqrt(2 s2) x) weighted sums."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / np.sqrt(np.pi)


class Scaling(str, enum.Enum):
    INVERSE_SQRT_FISHER = "inverse_sqrt_fisher"
    IDENTITY = "identity"


@dataclass
class ScaledScore:
    nabla: np.ndarray
    s: np.ndarray
    fisher: np.ndarray
    scaling_used: Scaling


@dataclass
class FPath:
    f: np.ndarray   # (T, d)
    pi: np.ndarray  # (T, K, K)


def _lagged_linear(intercept, slope, lagged, name):
    if not np.isfinite(lagged):
        raise InputError(f"{name} is not finite")
    return np.asarray(intercept, dtype=float) + np.asarray(slope, dtype=float) * float(lagged)


def f_model1(params: Params, y_prev: float) -> np.ndarray:
    """Lagged-observation dynamics: f_t = alpha + theta * y_{t-1}."""
    return _lagged_linear(params.f0, params.coef, y_prev, "y_prev")


def f_model2(params: Params, x_prev: float) -> np.ndarray:
    """Exogenous-covariate dynamics: f_t = beta + gamma * x_{t-1}."""
    return _lagged_linear(params.f0, params.coef, x_prev, "x_prev")


def gas_score(y: float, xi_filtered_prev, f, params: Params, spec: ModelSpec,
              t: int | None = None) -> ScaledScore:
    """Score of log p(y | I_{t-1}; f) with respect to f, and its scaled version.

    ``xi_filtered_prev`` are the filtered regime probabilities at t-1; the
    predictive density is sum_i sum_j eta_j(y) P_ij(f) xi_i.
    """
    K, d = spec.K, spec.n_f
    xi = np.asarray(xi_filtered_prev, dtype=float)
    if xi.shape != (K,):
        raise DimensionError(f"xi_filtered_prev has length {xi.size}, expected {K}")
    P = link_f_to_matrix(f, spec)
    mu = params.mu
    sig2 = params.sigma2_full(K)
    xi_pred = P.T @ xi
    logeta = -0.5 * (np.log(2 * np.pi * sig2) + (y - mu) ** 2 / sig2)
    shift = logeta.max()
    eta = np.exp(logeta - shift)
    p = float(eta @ xi_pred)
    if not (p > 0) or not np.isfinite(shift):
        raise DegeneracyError(f"predictive density is {p * np.exp(shift)} at t={t}", t)
    v = eta / p
    ghx, ghw = gauss_hermite()
    ee = kern.quadrature_table(mu, sig2, ghx, K)
    M = np.empty((d, K))
    nabla = np.empty(d)
    fisher = np.empty((d, d))
    s = np.empty(d)
    flag = kern.gas_score_into(v, xi, xi_pred, P, K, spec.diagonal, d, ee, ghw,
                               M, nabla, fisher, s)
    scaling = Scaling.IDENTITY if flag else Scaling.INVERSE_SQRT_FISHER
    return ScaledScore(nabla=nabla, s=s, fisher=fisher, scaling_used=scaling)


def f_model3_step(f_prev, s_prev, params: Params) -> np.ndarray:
    """One step of the mean-reverting score recursion."""
    B = np.asarray(params.B, dtype=float)
    if np.any((B <= 0) | (B >= 1)):
        raise ParameterError(f"B must lie in (0, 1), got {B}")
    s = s_prev.s if isinstance(s_prev, ScaledScore) else np.asarray(s_prev, dtype=float)
    omega = params.f0
    return omega + params.coef * s + B * (np.asarray(f_prev, dtype=float) - omega)


def gas_fallback_active(params: Params, threshold: float = FALLBACK_THRESHOLD) -> bool:
    """True when every score coefficient is negligible, so the constant filter applies."""
    return bool(np.max(np.abs(params.coef)) < threshold)


def effective_family(spec: ModelSpec, params: Params) -> int:
    """Kernel family code, with GAS degraded to constant when A is negligible."""
    if spec.dynamics is Dynamics.MODEL_III and gas_fallback_active(params):
        return kern.FAMILY_CONST
    return spec.dynamics.code


def fpath(y, spec: ModelSpec, params: Params, x=None) -> FPath:
    """Transition-parameter path implied by ``params`` on the series ``y``."""
    from .filtering import Dataset, run_filter

    out = run_filter(Dataset(np.asarray(y, float), None if x is None else np.asarray(x, float)),
                     spec, params, cutoff=0)
    return FPath(f=out.f_path, pi=out.pi_path)
