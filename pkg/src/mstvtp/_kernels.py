"""Compiled inner loops: transition link, GAS score step, Hamilton recursion, simulation.

Everything here works on plain float arrays so numba can compile it. The public
wrappers in the other modules do validation and packaging.

Dynamics family codes: 0 constant, 1 lagged observation, 2 exogenous covariate,
3 score driven (GAS).
"""
import math

import numpy as np
from numba import njit

FAMILY_CONST = 0
FAMILY_LAGGED_Y = 1
FAMILY_EXOG = 2
FAMILY_GAS = 3

LOG_2PI = math.log(2.0 * math.pi)
LIK_FLOOR = 1e-300
FISHER_RIDGE = 1e-8
FISHER_MAX_COND = 1e12


@njit(cache=True, nogil=True, error_model="numpy")
def free_index(i, l, K):
    """Position of the off-diagonal logit f_{il} (l != i) in the flat f vector."""
    return i * (K - 1) + (l if l < i else l - 1)


@njit(cache=True, nogil=True, error_model="numpy")
def link_into(f, K, diag, P):
    if K == 1:
        P[0, 0] = 1.0
        return
    if diag:
        for i in range(2):
            a = f[i]
            # stable logistic in both tails
            if a >= 0.0:
                e = math.exp(-a)
                stay = 1.0 / (1.0 + e)
                move = e / (1.0 + e)
            else:
                e = math.exp(a)
                stay = e / (1.0 + e)
                move = 1.0 / (1.0 + e)
            P[i, i] = stay
            P[i, 1 - i] = move
        return
    for i in range(K):
        m = 0.0
        for l in range(K):
            if l != i:
                v = f[free_index(i, l, K)]
                if v > m:
                    m = v
        tot = math.exp(-m)
        for l in range(K):
            if l != i:
                tot += math.exp(f[free_index(i, l, K)] - m)
        for l in range(K):
            if l == i:
                P[i, l] = math.exp(-m) / tot
            else:
                P[i, l] = math.exp(f[free_index(i, l, K)] - m) / tot


@njit(cache=True, nogil=True, error_model="numpy")
def jacobian_into(P, K, diag, J):
    """J[i, j, k] = dP_ij / df_k; only entries of row i's own logits are nonzero."""
    J[:, :, :] = 0.0
    if K == 1:
        return
    if diag:
        for i in range(2):
            g = P[i, i] * (1.0 - P[i, i])
            J[i, i, i] = g
            J[i, 1 - i, i] = -g
        return
    for i in range(K):
        for l in range(K):
            if l == i:
                continue
            k = free_index(i, l, K)
            for j in range(K):
                dj = 1.0 if j == l else 0.0
                J[i, j, k] = P[i, j] * (dj - P[i, l])


@njit(cache=True, nogil=True, error_model="numpy")
def score_loading(xi_prev, P, K, diag, d, M):
    """M[k, j] = sum_i xi_i dP_ij/df_k so that the raw score is M @ (eta / p)."""
    M[:, :] = 0.0
    if diag:
        for i in range(2):
            g = xi_prev[i] * P[i, i] * (1.0 - P[i, i])
            M[i, i] = g
            M[i, 1 - i] = -g
        return
    for i in range(K):
        for l in range(K):
            if l == i:
                continue
            k = free_index(i, l, K)
            for j in range(K):
                dj = 1.0 if j == l else 0.0
                M[k, j] = xi_prev[i] * P[i, j] * (dj - P[i, l])


@njit(cache=True, nogil=True, error_model="numpy")
def quadrature_table(mu, sig2, ghx, K):
    """Shifted regime densities at the Gauss-Hermite nodes of every mixture component.

    ee[m, q, j] = eta_j(y_mq) / max_l eta_l(y_mq) with y_mq = mu_m + sqrt(2 sig2_m) x_q.
    """
    nq = ghx.shape[0]
    ee = np.empty((K, nq, K))
    lg = np.empty(K)
    for m in range(K):
        sc = math.sqrt(2.0 * sig2[m])
        for q in range(nq):
            y = mu[m] + sc * ghx[q]
            mx = -np.inf
            for j in range(K):
                r = y - mu[j]
                lg[j] = -0.5 * (LOG_2PI + math.log(sig2[j])) - 0.5 * r * r / sig2[j]
                if lg[j] > mx:
                    mx = lg[j]
            for j in range(K):
                ee[m, q, j] = math.exp(lg[j] - mx)
    return ee


@njit(cache=True, nogil=True, error_model="numpy")
def fisher_info(M, c, ee, ghw, K, d, out):
    """I = M G M' with G = E[v v'] under the predictive mixture with weights c."""
    nq = ghw.shape[0]
    G = np.zeros((K, K))
    for m in range(K):
        if c[m] <= 0.0:
            continue
        for q in range(nq):
            p = 0.0
            for l in range(K):
                p += c[l] * ee[m, q, l]
            if p <= 0.0:
                continue
            wt = c[m] * ghw[q] / p / p
            for a in range(K):
                ea = ee[m, q, a] * wt
                for b in range(a, K):
                    G[a, b] += ea * ee[m, q, b]
    for a in range(K):
        for b in range(a):
            G[a, b] = G[b, a]
    MG = M @ G
    for k1 in range(d):
        for k2 in range(k1, d):
            s = 0.0
            for j in range(K):
                s += MG[k1, j] * M[k2, j]
            out[k1, k2] = s
            out[k2, k1] = s


@njit(cache=True, nogil=True, error_model="numpy")
def scale_score(nabla, fisher, d, s_out):
    """s = (I + eps)^(-1/2) nabla; returns 1 when identity scaling was used instead."""
    ok = True
    for a in range(d):
        for b in range(d):
            if not math.isfinite(fisher[a, b]):
                ok = False
    if ok:
        R = fisher.copy()
        for a in range(d):
            R[a, a] += FISHER_RIDGE
        lam, V = np.linalg.eigh(R)
        lo = lam[0]
        hi = lam[d - 1]
        if lo <= 0.0 or hi / lo > FISHER_MAX_COND:
            ok = False
        else:
            proj = V.T @ nabla
            for a in range(d):
                proj[a] /= math.sqrt(lam[a])
            tmp = V @ proj
            for a in range(d):
                s_out[a] = tmp[a]
            return 0
    for a in range(d):
        s_out[a] = nabla[a]
    return 1


@njit(cache=True, nogil=True, error_model="numpy")
def gas_score_into(v, xi_prev, xi_pred, P, K, diag, d, ee, ghw, M, nabla, fisher, s):
    """Raw score, Fisher information and scaled score for one observation.

    v holds eta_j(y) / p(y), i.e. the regime densities divided by the predictive density.
    """
    score_loading(xi_prev, P, K, diag, d, M)
    for k in range(d):
        acc = 0.0
        for j in range(K):
            acc += M[k, j] * v[j]
        nabla[k] = acc
    fisher_info(M, xi_pred, ee, ghw, K, d, fisher)
    return scale_score(nabla, fisher, d, s)


@njit(cache=True, nogil=True, error_model="numpy")
def hamilton(y, drv, mu, sig2, f0, coef, bpers, family, diag, K, ghx, ghw):
    """Forward Hamilton recursion for every dynamics family.

    Returns (ll_t, xi_pred, xi_filt, pis, fpath, spath, info) where info holds
    [first degenerate t or -1, number of degenerate steps, identity-scaling events].
    """
    T = y.shape[0]
    d = f0.shape[0]
    ll_t = np.empty(T)
    xi_pred = np.empty((T, K))
    xi_filt = np.empty((T, K))
    pis = np.empty((T, K, K))
    fpath = np.empty((T, d))
    spath = np.zeros((T, d))
    info = np.zeros(3, dtype=np.int64)
    info[0] = -1

    xi_prev = np.full(K, 1.0 / K)
    f = f0.copy()
    P = np.empty((K, K))
    lg = np.empty(K)
    v = np.empty(K)
    half_logdet = np.empty(K)
    for j in range(K):
        half_logdet[j] = -0.5 * (LOG_2PI + math.log(sig2[j]))

    if family == FAMILY_GAS:
        ee = quadrature_table(mu, sig2, ghx, K)
    else:
        ee = np.empty((1, 1, 1))
    M = np.empty((d, K))
    nabla = np.empty(d)
    fisher = np.empty((d, d))
    s = np.empty(d)

    for t in range(T):
        if family == FAMILY_LAGGED_Y or family == FAMILY_EXOG:
            if t == 0:
                for k in range(d):
                    f[k] = f0[k]
            else:
                lagged = y[t - 1] if family == FAMILY_LAGGED_Y else drv[t - 1]
                for k in range(d):
                    f[k] = f0[k] + coef[k] * lagged
        for k in range(d):
            fpath[t, k] = f[k]
        link_into(f, K, diag, P)
        for i in range(K):
            for j in range(K):
                pis[t, i, j] = P[i, j]
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += P[i, j] * xi_prev[i]
            xi_pred[t, j] = acc

        mx = -np.inf
        for j in range(K):
            r = y[t] - mu[j]
            lg[j] = half_logdet[j] - 0.5 * r * r / sig2[j]
            if lg[j] > mx:
                mx = lg[j]
        L = 0.0
        for j in range(K):
            v[j] = math.exp(lg[j] - mx)
            L += v[j] * xi_pred[t, j]
        if not (L > 0.0) or not math.isfinite(mx):
            if info[0] < 0:
                info[0] = t
            info[1] += 1
            ll_t[t] = math.log(LIK_FLOOR)
            for j in range(K):
                xi_filt[t, j] = xi_pred[t, j]
                v[j] = 0.0
        else:
            lt = mx + math.log(L)
            if lt < math.log(LIK_FLOOR):
                if info[0] < 0:
                    info[0] = t
                info[1] += 1
                lt = math.log(LIK_FLOOR)
            ll_t[t] = lt
            for j in range(K):
                xi_filt[t, j] = v[j] * xi_pred[t, j] / L
                v[j] = v[j] / L

        if family == FAMILY_GAS:
            info[2] += gas_score_into(v, xi_prev, xi_pred[t], P, K, diag, d, ee, ghw,
                                      M, nabla, fisher, s)
            for k in range(d):
                spath[t, k] = s[k]
                f[k] = f0[k] + coef[k] * s[k] + bpers[k] * (f[k] - f0[k])
        for j in range(K):
            xi_prev[j] = xi_filt[t, j]
    return ll_t, xi_pred, xi_filt, pis, fpath, spath, info


@njit(cache=True, nogil=True, error_model="numpy")
def loglik_only(y, drv, mu, sig2, f0, coef, bpers, family, diag, K, ghx, ghw, cutoff):
    ll_t, _, _, _, _, _, info = hamilton(y, drv, mu, sig2, f0, coef, bpers, family,
                                         diag, K, ghx, ghw)
    tot = 0.0
    for t in range(cutoff, y.shape[0]):
        tot += ll_t[t]
    return tot, info[1]


@njit(cache=True, nogil=True, error_model="numpy")
def simulate_chain(u, eps, drv, mu, sig2, f0, coef, bpers, family, diag, K, ghx, ghw):
    """Draw (z, y) jointly with the transition path; GAS runs the filter alongside."""
    n = u.shape[0]
    d = f0.shape[0]
    y = np.empty(n)
    z = np.empty(n, dtype=np.int64)
    pis = np.empty((n, K, K))
    fpath = np.empty((n, d))
    f = f0.copy()
    P = np.empty((K, K))

    xi_prev = np.full(K, 1.0 / K)
    xi_pred = np.empty(K)
    lg = np.empty(K)
    v = np.empty(K)
    if family == FAMILY_GAS:
        ee = quadrature_table(mu, sig2, ghx, K)
    else:
        ee = np.empty((1, 1, 1))
    M = np.empty((d, K))
    nabla = np.empty(d)
    fisher = np.empty((d, d))
    s = np.empty(d)

    for t in range(n):
        if family == FAMILY_LAGGED_Y or family == FAMILY_EXOG:
            if t == 0:
                for k in range(d):
                    f[k] = f0[k]
            else:
                lagged = y[t - 1] if family == FAMILY_LAGGED_Y else drv[t - 1]
                for k in range(d):
                    f[k] = f0[k] + coef[k] * lagged
        for k in range(d):
            fpath[t, k] = f[k]
        link_into(f, K, diag, P)
        for i in range(K):
            for j in range(K):
                pis[t, i, j] = P[i, j]
        if t == 0:
            zt = min(int(u[0] * K), K - 1)
        else:
            prev = z[t - 1]
            cum = 0.0
            zt = K - 1
            for j in range(K):
                cum += P[prev, j]
                if u[t] < cum:
                    zt = j
                    break
        z[t] = zt
        y[t] = mu[zt] + math.sqrt(sig2[zt]) * eps[t]

        if family == FAMILY_GAS:
            for j in range(K):
                acc = 0.0
                for i in range(K):
                    acc += P[i, j] * xi_prev[i]
                xi_pred[j] = acc
            mx = -np.inf
            for j in range(K):
                r = y[t] - mu[j]
                lg[j] = -0.5 * (LOG_2PI + math.log(sig2[j])) - 0.5 * r * r / sig2[j]
                if lg[j] > mx:
                    mx = lg[j]
            L = 0.0
            for j in range(K):
                v[j] = math.exp(lg[j] - mx)
                L += v[j] * xi_pred[j]
            for j in range(K):
                xi_filt_j = v[j] * xi_pred[j] / L
                v[j] = v[j] / L
                lg[j] = xi_filt_j
            gas_score_into(v, xi_prev, xi_pred, P, K, diag, d, ee, ghw, M, nabla, fisher, s)
            for k in range(d):
                f[k] = f0[k] + coef[k] * s[k] + bpers[k] * (f[k] - f0[k])
            for j in range(K):
                xi_prev[j] = lg[j]
    return y, z, pis, fpath
