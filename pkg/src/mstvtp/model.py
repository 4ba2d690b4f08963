"""Model specification, parameter containers and the transition-probability link.

Transition matrices are row-stochastic: ``P[i, j] = Pr(z_t = j | z_{t-1} = i)``.

Two parameterizations are supported:

* diagonal (K = 2 only): one logit per row for the staying probability,
  ``P_ii = 1 / (1 + exp(-f_i))``;
* off-diagonal: a multinomial logit per row with the diagonal as reference
  category, ``P_il = exp(f_il) / (1 + sum_{m != i} exp(f_im))``. The flat
  vector orders the K(K-1) logits row by row, skipping the diagonal.

Probabilities increase in f. Flipping that convention only negates the
intercepts and slopes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels as kern
from .errors import DimensionError, DomainError, InputError, ParameterError


class Parameterization(str, enum.Enum):
    DIAGONAL = "diagonal"
    OFF_DIAGONAL = "offdiagonal"


class VarianceStructure(str, enum.Enum):
    COMMON = "common"
    REGIME_SPECIFIC = "regime"


class Dynamics(str, enum.Enum):
    CONSTANT = "const"
    MODEL_I = "tvp"
    MODEL_II = "exog"
    MODEL_III = "gas"

    @property
    def code(self) -> int:
        return _FAMILY_CODE[self]

    @classmethod
    def parse(cls, name: str) -> "Dynamics":
        key = name.strip().lower()
        if key in _DYN_ALIASES:
            return _DYN_ALIASES[key]
        raise ValueError(f"unknown dynamics family {name!r}")


_FAMILY_CODE = {
    Dynamics.CONSTANT: kern.FAMILY_CONST,
    Dynamics.MODEL_I: kern.FAMILY_LAGGED_Y,
    Dynamics.MODEL_II: kern.FAMILY_EXOG,
    Dynamics.MODEL_III: kern.FAMILY_GAS,
}

_DYN_ALIASES = {
    "const": Dynamics.CONSTANT, "constant": Dynamics.CONSTANT,
    "tvp": Dynamics.MODEL_I, "i": Dynamics.MODEL_I, "model1": Dynamics.MODEL_I,
    "exog": Dynamics.MODEL_II, "exogenous": Dynamics.MODEL_II, "ii": Dynamics.MODEL_II,
    "model2": Dynamics.MODEL_II,
    "gas": Dynamics.MODEL_III, "iii": Dynamics.MODEL_III, "model3": Dynamics.MODEL_III,
}


@dataclass(frozen=True)
class ModelSpec:
    """Structural choices for a K-regime Gaussian Markov-switching model.

    K = 1 is accepted as the degenerate single-regime reduction (constant
    dynamics, no transition parameters); it exists for closed-form checks.
    """

    K: int
    parameterization: Parameterization = Parameterization.OFF_DIAGONAL
    variance_structure: VarianceStructure = VarianceStructure.REGIME_SPECIFIC
    dynamics: Dynamics = Dynamics.CONSTANT

    def __post_init__(self):
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))
        object.__setattr__(self, "variance_structure", VarianceStructure(self.variance_structure))
        object.__setattr__(self, "dynamics", Dynamics(self.dynamics))
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError(f"K must be a positive integer, got {self.K}")
        if self.K == 1 and self.dynamics is not Dynamics.CONSTANT:
            raise ParameterError("the single-regime reduction only supports constant dynamics")
        if self.parameterization is Parameterization.DIAGONAL and self.K != 2:
            raise ParameterError("diagonal parameterization is only defined for K = 2")

    @property
    def diagonal(self) -> bool:
        return self.parameterization is Parameterization.DIAGONAL

    @property
    def n_f(self) -> int:
        """Length of the transition parameter vector f."""
        if self.K == 1:
            return 0
        return self.K if self.diagonal else self.K * (self.K - 1)

    @property
    def n_sigma2(self) -> int:
        return 1 if self.variance_structure is VarianceStructure.COMMON else self.K

    @property
    def n_params(self) -> int:
        n = self.K + self.n_sigma2 + self.n_f
        if self.dynamics in (Dynamics.MODEL_I, Dynamics.MODEL_II):
            n += self.n_f
        elif self.dynamics is Dynamics.MODEL_III:
            n += 2 * self.n_f
        return n

    def with_dynamics(self, dynamics) -> "ModelSpec":
        return replace(self, dynamics=Dynamics(dynamics))

    def free_entries(self) -> list[tuple[int, int]]:
        """(row, column) of the transition entry each element of f controls."""
        if self.K == 1:
            return []
        if self.diagonal:
            return [(0, 0), (1, 1)]
        return [(i, l) for i in range(self.K) for l in range(self.K) if l != i]

    def param_names(self) -> list[str]:
        names = [f"mu[{i}]" for i in range(self.K)]
        names += [f"sigma2[{i}]" for i in range(self.n_sigma2)]
        names += [f"f0[{k}]" for k in range(self.n_f)]
        if self.dynamics is not Dynamics.CONSTANT:
            names += [f"coef[{k}]" for k in range(self.n_f)]
        if self.dynamics is Dynamics.MODEL_III:
            names += [f"B[{k}]" for k in range(self.n_f)]
        return names


@dataclass
class Params:
    """Natural-scale parameters.

    ``f0`` holds the transition intercepts: alpha (Model I), beta (Model II)
    or the unconditional mean omega = w / (1 - B) of the score recursion
    (Model III). ``coef`` holds theta, gamma or A; ``B`` is the GAS persistence.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    f0: np.ndarray
    coef: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        self.f0 = np.atleast_1d(np.asarray(self.f0, dtype=float)).reshape(-1)
        if self.coef is not None:
            self.coef = np.atleast_1d(np.asarray(self.coef, dtype=float)).reshape(-1)
        if self.B is not None:
            self.B = np.atleast_1d(np.asarray(self.B, dtype=float)).reshape(-1)

    theta = property(lambda self: self.coef)
    gamma = property(lambda self: self.coef)
    A = property(lambda self: self.coef)

    @property
    def w(self) -> np.ndarray:
        """Intercept of the GAS recursion in its original (non mean-reverting) form."""
        return self.f0 * (1.0 - self.B)

    def sigma2_full(self, K: int) -> np.ndarray:
        return np.broadcast_to(self.sigma2, (K,)).astype(float)

    def validate(self, spec: ModelSpec) -> "Params":
        d = spec.n_f
        if self.mu.shape != (spec.K,):
            raise DimensionError(f"mu has length {self.mu.size}, expected {spec.K}")
        if self.sigma2.shape != (spec.n_sigma2,):
            raise DimensionError(f"sigma2 has length {self.sigma2.size}, expected {spec.n_sigma2}")
        if self.f0.shape != (d,):
            raise DimensionError(f"f0 has length {self.f0.size}, expected {d}")
        for name in ("mu", "sigma2", "f0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InputError(f"{name} contains non-finite values")
        if np.any(self.sigma2 <= 0):
            raise ParameterError("sigma2 entries must be strictly positive")
        if spec.dynamics is Dynamics.CONSTANT:
            return self
        if self.coef is None or self.coef.shape != (d,):
            raise DimensionError(f"dynamics coefficients must have length {d}")
        if not np.all(np.isfinite(self.coef)):
            raise InputError("dynamics coefficients contain non-finite values")
        if spec.dynamics is Dynamics.MODEL_III:
            if self.B is None or self.B.shape != (d,):
                raise DimensionError(f"B must have length {d}")
            bad = np.flatnonzero(~((self.B > 0) & (self.B < 1)))
            if bad.size:
                raise ParameterError(f"B[{bad[0]}] = {self.B[bad[0]]} lies outside (0, 1)")
        return self

    def to_vector(self, spec: ModelSpec) -> np.ndarray:
        parts = [self.mu, self.sigma2, self.f0]
        if spec.dynamics is not Dynamics.CONSTANT:
            parts.append(self.coef)
        if spec.dynamics is Dynamics.MODEL_III:
            parts.append(self.B)
        return np.concatenate(parts).astype(float)

    @classmethod
    def from_vector(cls, spec: ModelSpec, vec) -> "Params":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (spec.n_params,):
            raise DimensionError(f"parameter vector has length {vec.size}, expected {spec.n_params}")
        K, ns, d = spec.K, spec.n_sigma2, spec.n_f
        pos = np.cumsum([0, K, ns, d, d, d])
        coef = vec[pos[3]:pos[4]] if spec.dynamics is not Dynamics.CONSTANT else None
        B = vec[pos[4]:pos[5]] if spec.dynamics is Dynamics.MODEL_III else None
        return cls(mu=vec[:pos[1]].copy(), sigma2=vec[pos[1]:pos[2]].copy(),
                   f0=vec[pos[2]:pos[3]].copy(),
                   coef=None if coef is None else coef.copy(),
                   B=None if B is None else B.copy())

    def copy(self) -> "Params":
        return Params(self.mu.copy(), self.sigma2.copy(), self.f0.copy(),
                      None if self.coef is None else self.coef.copy(),
                      None if self.B is None else self.B.copy())

    def to_dict(self) -> dict:
        out = {"mu": self.mu.tolist(), "sigma2": self.sigma2.tolist(), "f0": self.f0.tolist()}
        if self.coef is not None:
            out["coef"] = self.coef.tolist()
        if self.B is not None:
            out["B"] = self.B.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        return cls(mu=d["mu"], sigma2=d["sigma2"], f0=d["f0"],
                   coef=d.get("coef"), B=d.get("B"))


def _check_f(f, spec: ModelSpec) -> np.ndarray:
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape != (spec.n_f,):
        raise DimensionError(f"f has length {f.size}, expected {spec.n_f} for {spec}")
    if not np.all(np.isfinite(f)):
        raise InputError("f contains non-finite entries")
    return f


def link_f_to_matrix(f, spec: ModelSpec) -> np.ndarray:
    """Map unconstrained transition parameters to a K x K row-stochastic matrix."""
    f = _check_f(f, spec)
    P = np.empty((spec.K, spec.K))
    kern.link_into(f, spec.K, spec.diagonal, P)
    return P


def link_matrix_to_f(P, spec: ModelSpec) -> np.ndarray:
    """Inverse of :func:`link_f_to_matrix`."""
    P = np.asarray(P, dtype=float)
    K = spec.K
    if P.shape != (K, K):
        raise DimensionError(f"P has shape {P.shape}, expected {(K, K)}")
    if spec.diagonal:
        idx = [(0, 0), (1, 1)]
        ref = [(0, 1), (1, 0)]
    else:
        idx = spec.free_entries()
        ref = [(i, i) for i, _ in idx]
    f = np.empty(len(idx))
    for k, ((i, j), (a, b)) in enumerate(zip(idx, ref)):
        for cell in ((i, j), (a, b)):
            p = P[cell]
            if not (0.0 < p < 1.0):
                raise DomainError(f"P{cell} = {p} is not strictly inside (0, 1)", index=cell)
        f[k] = np.log(P[i, j]) - np.log(P[a, b])
    return f


def link_jacobian(f, spec: ModelSpec) -> np.ndarray:
    """Array J with J[i, j, k] = dP_ij / df_k (zero unless f_k belongs to row i)."""
    f = _check_f(f, spec)
    P = np.empty((spec.K, spec.K))
    kern.link_into(f, spec.K, spec.diagonal, P)
    J = np.empty((spec.K, spec.K, spec.n_f))
    kern.jacobian_into(P, spec.K, spec.diagonal, J)
    return J


def pi_elements(f, spec: ModelSpec) -> np.ndarray:
    """The free transition probabilities controlled by f, aligned with f's order."""
    P = link_f_to_matrix(f, spec)
    return np.array([P[i, j] for i, j in spec.free_entries()])


def pi_elements_jacobian(f, spec: ModelSpec) -> np.ndarray:
    """d pi_elements / d f, shape (n_f, n_f)."""
    J = link_jacobian(f, spec)
    return np.array([J[i, j, :] for i, j in spec.free_entries()])


def permute_params(params: Params, spec: ModelSpec, perm) -> Params:
    """Relabel regimes: new regime i is old regime ``perm[i]``.

    Means, variances and every transition-parameter block move together so the
    likelihood is unchanged.
    """
    perm = np.asarray(perm, dtype=int)
    K = spec.K
    if sorted(perm.tolist()) != list(range(K)):
        raise DimensionError(f"{perm} is not a permutation of 0..{K - 1}")
    mu = params.mu[perm]
    sigma2 = params.sigma2 if spec.n_sigma2 == 1 else params.sigma2[perm]
    src = f_permutation(spec, perm)

    def move(v):
        return None if v is None else v[src]

    return Params(mu, sigma2, params.f0[src], move(params.coef), move(params.B))


def f_permutation(spec: ModelSpec, perm) -> np.ndarray:
    """Index map so that new_f = old_f[src] under the relabelling ``perm``."""
    if spec.K == 1:
        return np.zeros(0, dtype=int)
    if spec.diagonal:
        return np.asarray(perm, dtype=int)
    K = spec.K
    src = np.empty(spec.n_f, dtype=int)
    for i in range(K):
        for l in range(K):
            if l != i:
                src[kern.free_index(i, l, K)] = kern.free_index(perm[i], perm[l], K)
    return src
