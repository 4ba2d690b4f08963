"""Maximum likelihood: parameter transforms, multi-start BFGS, Hessian-based standard errors."""
from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from . import _kernels as kern
from .dynamics import FALLBACK_THRESHOLD, gauss_hermite
from .filtering import Dataset, check_inputs
from .model import (Dynamics, ModelSpec, Params, link_matrix_to_f,
                    pi_elements_jacobian)

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
STEP = EPS ** (1.0 / 3.0)
SIGMA2_FLOOR = 1e-8
LOG_VAR_BOUNDS = (np.log(SIGMA2_FLOOR), np.log(1e8))
LOGIT_BOUND = 30.0
GRAD_TOL = 1e-4
BAD_VALUE = 1e10
MAX_REDRAWS = 20

IDENTITY, LOG, LOGIT = 0, 1, 2


@dataclass
class TransformMap:
    """Coordinate-wise maps between natural and unconstrained parameter vectors."""

    kinds: np.ndarray

    def forward(self, nat) -> np.ndarray:
        nat = np.asarray(nat, dtype=float)
        u = nat.copy()
        lg = self.kinds == LOG
        lt = self.kinds == LOGIT
        u[lg] = np.log(nat[lg])
        u[lt] = np.log(nat[lt]) - np.log1p(-nat[lt])
        return u

    def inverse(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        nat = u.copy()
        lg = self.kinds == LOG
        lt = self.kinds == LOGIT
        nat[lg] = np.exp(np.clip(u[lg], *LOG_VAR_BOUNDS))
        nat[lt] = 1.0 / (1.0 + np.exp(-np.clip(u[lt], -LOGIT_BOUND, LOGIT_BOUND)))
        return nat

    def jacobian_diag(self, u) -> np.ndarray:
        """d natural / d unconstrained, coordinate by coordinate."""
        nat = self.inverse(u)
        jac = np.ones_like(nat)
        lg = self.kinds == LOG
        lt = self.kinds == LOGIT
        jac[lg] = nat[lg]
        jac[lt] = nat[lt] * (1.0 - nat[lt])
        return jac

    def at_floor(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.any(u[self.kinds == LOG] <= LOG_VAR_BOUNDS[0] + 1e-9))


def transforms_for(spec: ModelSpec) -> TransformMap:
    kinds = []
    for name in spec.param_names():
        if name.startswith("sigma2"):
            kinds.append(LOG)
        elif name.startswith("B["):
            kinds.append(LOGIT)
        else:
            kinds.append(IDENTITY)
    return TransformMap(np.array(kinds, dtype=int))


class Objective:
    """Negative log-likelihood in unconstrained coordinates, with call counting."""

    def __init__(self, data: Dataset, spec: ModelSpec, cutoff: int):
        check_inputs(data, spec, _dummy_params(spec), cutoff)
        self.data, self.spec, self.cutoff = data, spec, cutoff
        self.tm = transforms_for(spec)
        K, ns, d = spec.K, spec.n_sigma2, spec.n_f
        self._pos = np.cumsum([0, K, ns, d, d, d])
        self._y = data.y
        self._drv = data.x if spec.dynamics is Dynamics.MODEL_II else np.zeros(0)
        self._ghx, self._ghw = gauss_hermite()
        self.n_calls = 0

    def natural(self, u) -> Params:
        return Params.from_vector(self.spec, self.tm.inverse(u))

    def __call__(self, u) -> float:
        self.n_calls += 1
        nat = self.tm.inverse(u)
        p = self._pos
        spec = self.spec
        K, d = spec.K, spec.n_f
        mu = nat[:p[1]]
        s2 = np.broadcast_to(nat[p[1]:p[2]], (K,)).copy()
        f0 = nat[p[2]:p[3]]
        family = spec.dynamics.code
        coef = np.zeros(d)
        bpers = np.zeros(d)
        if spec.dynamics is not Dynamics.CONSTANT:
            coef = nat[p[3]:p[4]]
        if spec.dynamics is Dynamics.MODEL_III:
            bpers = nat[p[4]:p[5]]
            if np.max(np.abs(coef)) < FALLBACK_THRESHOLD:
                family = kern.FAMILY_CONST
        if not np.all(np.isfinite(nat)):
            return BAD_VALUE
        value, _ = kern.loglik_only(self._y, self._drv, mu, s2, f0, np.ascontiguousarray(coef),
                                    np.ascontiguousarray(bpers), family, spec.diagonal, K,
                                    self._ghx, self._ghw, self.cutoff)
        if not np.isfinite(value):
            return BAD_VALUE
        return -value


def _dummy_params(spec: ModelSpec) -> Params:
    d = spec.n_f
    coef = np.zeros(d) if spec.dynamics is not Dynamics.CONSTANT else None
    B = np.full(d, 0.5) if spec.dynamics is Dynamics.MODEL_III else None
    return Params(np.zeros(spec.K), np.ones(spec.n_sigma2), np.zeros(d), coef, B)


def num_grad(fun: Callable, u: np.ndarray, free=None) -> np.ndarray:
    """Central-difference gradient with steps eps^(1/3) * max(|u_k|, 1)."""
    u = np.asarray(u, dtype=float)
    idx = range(u.size) if free is None else np.flatnonzero(free)
    g = np.zeros(u.size)
    for k in idx:
        h = STEP * max(abs(u[k]), 1.0)
        up, dn = u.copy(), u.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (fun(up) - fun(dn)) / (2 * h)
    return g


def num_hessian(fun: Callable, u: np.ndarray) -> np.ndarray:
    """Central-difference Hessian (four-point stencil off the diagonal)."""
    u = np.asarray(u, dtype=float)
    n = u.size
    h = STEP * np.maximum(np.abs(u), 1.0)
    f0 = fun(u)
    H = np.empty((n, n))
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = h[i]
        H[i, i] = (fun(u + e_i) - 2 * f0 + fun(u - e_i)) / h[i] ** 2
        for j in range(i):
            e_j = np.zeros(n)
            e_j[j] = h[j]
            H[i, j] = H[j, i] = (fun(u + e_i + e_j) - fun(u + e_i - e_j)
                                 - fun(u - e_i + e_j) + fun(u - e_i - e_j)) / (4 * h[i] * h[j])
    return H


@dataclass
class LocalFit:
    u: np.ndarray
    nll: float
    converged: bool
    grad_norm: float
    message: str
    n_iter: int


def local_fit(fun: Objective, u0, free=None, max_rounds: int = 3, maxiter: int = 1000) -> LocalFit:
    """BFGS on the free coordinates; restarted from the last point on precision loss.

    Converged means: BFGS reports success, the gradient infinity norm is below
    1e-4, the objective is finite and no variance sits on its floor.
    """
    u0 = np.asarray(u0, dtype=float)
    free = np.ones(u0.size, bool) if free is None else np.asarray(free, bool)
    base = u0.copy()

    def embed(v):
        full = base.copy()
        full[free] = v
        return full

    f = lambda v: fun(embed(v))
    g = lambda v: num_grad(fun, embed(v), free)[free]
    v = u0[free].copy()
    res = None
    n_iter = 0
    for _ in range(max_rounds):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(f, v, jac=g, method="BFGS",
                                    options={"gtol": 1e-5, "maxiter": maxiter})
        n_iter += int(res.nit)
        v = res.x
        if res.success or not np.isfinite(res.fun) or res.fun >= BAD_VALUE:
            break
        if res.status == 1:  # iteration cap, not precision loss
            break
    u = embed(v)
    nll = float(fun(u))
    grad_norm = float(np.max(np.abs(g(v)))) if v.size else 0.0
    ok = bool(res is not None and res.success and np.isfinite(nll) and nll < BAD_VALUE
              and grad_norm < GRAD_TOL and not fun.tm.at_floor(u))
    msg = "" if res is None else str(res.message)
    if fun.tm.at_floor(u):
        msg = "variance at floor; " + msg
    return LocalFit(u=u, nll=nll, converged=ok, grad_norm=grad_norm, message=msg, n_iter=n_iter)


def draw_start(y: np.ndarray, spec: ModelSpec, rng: np.random.Generator) -> Params:
    """Random starting point bracketing the study's true values."""
    K, d = spec.K, spec.n_f
    sd = float(np.std(y))
    var = max(float(np.var(y)), SIGMA2_FLOOR * 10)
    q = np.quantile(y, (np.arange(K) + 0.5) / K)
    mu = q + rng.normal(0.0, 0.25 * sd, K)
    sigma2 = var * rng.uniform(0.3, 1.5, spec.n_sigma2)
    if K == 1:
        f0 = np.zeros(0)
    else:
        stay = rng.uniform(0.6, 0.95, K)
        P = np.empty((K, K))
        for i in range(K):
            share = rng.dirichlet(np.ones(K - 1)) * (1.0 - stay[i])
            P[i] = np.insert(share, i, stay[i])
        f0 = link_matrix_to_f(P, spec)
    coef = B = None
    if spec.dynamics is not Dynamics.CONSTANT:
        coef = rng.normal(0.0, 0.1, d)
    if spec.dynamics is Dynamics.MODEL_III:
        B = rng.uniform(0.7, 0.95, d)
    return Params(mu, sigma2, f0, coef, B)


@dataclass
class StartRecord:
    index: int
    loglik: float
    converged: bool
    grad_norm: float
    n_iter: int
    message: str
    start: Params
    u: np.ndarray


@dataclass
class SEResult:
    se: Params
    se_pi: np.ndarray
    cov_u: np.ndarray
    ok: bool
    min_eigenvalue: float

    def vector(self, spec: ModelSpec) -> np.ndarray:
        return self.se.to_vector(spec)


@dataclass
class EstimationResult:
    params_hat: Params
    se: Optional[Params]
    loglik: float
    aic: float
    bic: float
    n_params: int
    converged: bool
    n_starts_converged: int
    best_start_index: int
    n_starts: int
    T_effective: int
    spec: ModelSpec
    se_pi: Optional[np.ndarray] = None
    se_ok: bool = False
    hessian_min_eigenvalue: float = float("nan")
    starts: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        def nan_to_none(v):
            return [None if not np.isfinite(a) else float(a) for a in v]

        return {
            "spec": {"K": self.spec.K, "parameterization": self.spec.parameterization.value,
                     "variance_structure": self.spec.variance_structure.value,
                     "dynamics": self.spec.dynamics.value},
            "params_hat": self.params_hat.to_dict(),
            "se": None if self.se is None else {k: nan_to_none(v) for k, v in self.se.to_dict().items()},
            "se_pi": None if self.se_pi is None else nan_to_none(self.se_pi),
            "loglik": self.loglik, "aic": self.aic, "bic": self.bic,
            "n_params": self.n_params, "converged": self.converged,
            "n_starts_converged": self.n_starts_converged,
            "best_start_index": self.best_start_index, "n_starts": self.n_starts,
            "T_effective": self.T_effective, "se_ok": self.se_ok,
            "hessian_min_eigenvalue": self.hessian_min_eigenvalue,
            "starts": [{"index": s.index, "loglik": s.loglik, "converged": s.converged,
                        "grad_norm": s.grad_norm, "n_iter": s.n_iter, "message": s.message}
                       for s in self.starts],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def information_criteria(ll: float, n_params: int, T_eff: int) -> tuple[float, float]:
    return 2 * n_params - 2 * ll, n_params * np.log(T_eff) - 2 * ll


def estimate(data: Dataset, spec: ModelSpec, n_starts: int = 10, seed: int = 0,
             cutoff: int = 10, rng: np.random.Generator | None = None, threads: int = 1,
             compute_se: bool = True, starts: list[Params] | None = None) -> EstimationResult:
    """Multi-start maximum likelihood.

    Start points are drawn up front from ``rng`` (or ``seed``), so the result
    does not depend on ``threads``. The best converged start wins; ties go to
    the lowest start index. With no converged start the best finite start is
    reported with ``converged=False``.
    """
    fun = Objective(data, spec, cutoff)
    if rng is None:
        rng = np.random.Generator(np.random.Philox(seed))
    u0s = []
    if starts is None:
        for _ in range(n_starts):
            for _attempt in range(MAX_REDRAWS):
                u0 = fun.tm.forward(draw_start(data.y, spec, rng).to_vector(spec))
                if fun(u0) < BAD_VALUE:
                    break
            u0s.append(u0)
    else:
        u0s = [fun.tm.forward(p.to_vector(spec)) for p in starts]

    def run(k):
        job = Objective(data, spec, cutoff)  # per-worker call counter
        return k, local_fit(job, u0s[k])

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            fits = sorted(ex.map(run, range(len(u0s))), key=lambda r: r[0])
    else:
        fits = [run(k) for k in range(len(u0s))]

    records = [StartRecord(k, -lf.nll, lf.converged, lf.grad_norm, lf.n_iter, lf.message,
                           fun.natural(u0s[k]), lf.u) for k, lf in fits]
    conv = [r for r in records if r.converged]
    pool = conv if conv else [r for r in records if np.isfinite(r.loglik)] or records
    best = max(pool, key=lambda r: (r.loglik, -r.index))
    params_hat = fun.natural(best.u)
    ll = -fun(best.u)
    T_eff = len(data) - cutoff
    aic, bic = information_criteria(ll, spec.n_params, T_eff)
    result = EstimationResult(
        params_hat=params_hat, se=None, loglik=ll, aic=aic, bic=bic, n_params=spec.n_params,
        converged=bool(conv), n_starts_converged=len(conv), best_start_index=best.index,
        n_starts=len(records), T_effective=T_eff, spec=spec, starts=records)
    if compute_se and conv:
        ser = standard_errors(data, spec, params_hat, cutoff)
        result.se, result.se_pi = ser.se, ser.se_pi
        result.se_ok, result.hessian_min_eigenvalue = ser.ok, ser.min_eigenvalue
    return result


def standard_errors(data: Dataset, spec: ModelSpec, params_hat: Params, cutoff: int = 10) -> SEResult:
    """Delta-method SEs from the numerical Hessian in unconstrained coordinates.

    SEs are NaN (``ok=False``) when the Hessian is not positive definite;
    ``min_eigenvalue`` reports the offending eigenvalue.
    """
    fun = Objective(data, spec, cutoff)
    tm = fun.tm
    u = tm.forward(params_hat.to_vector(spec))
    H = num_hessian(fun, u)
    H = 0.5 * (H + H.T)
    lam = np.linalg.eigvalsh(H)
    n = u.size
    if not np.all(np.isfinite(H)) or lam[0] <= 0:
        nan = np.full(n, np.nan)
        return SEResult(Params.from_vector(spec, nan), np.full(spec.n_f, np.nan),
                        np.full((n, n), np.nan), False, float(lam[0]) if np.all(np.isfinite(lam)) else float("nan"))
    cov = np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    se_nat = np.abs(tm.jacobian_diag(u)) * np.sqrt(np.diag(cov))
    # transition probabilities: f0 is untransformed, so its block of cov is already on f scale
    K, ns, d = spec.K, spec.n_sigma2, spec.n_f
    blk = slice(K + ns, K + ns + d)
    if d:
        Jpi = pi_elements_jacobian(params_hat.f0, spec)
        se_pi = np.sqrt(np.clip(np.einsum("ik,kl,il->i", Jpi, cov[blk, blk], Jpi), 0, None))
    else:
        se_pi = np.zeros(0)
    return SEResult(Params.from_vector(spec, se_nat), se_pi, cov, True, float(lam[0]))
