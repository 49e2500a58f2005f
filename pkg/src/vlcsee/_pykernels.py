"""Pure-Python/numpy versions of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; used when
the extension is not built or ``VLCSEE_PURE_PYTHON=1`` is set.
"""
import itertools
import math

import numpy as np

E_OVER_2PI = math.e / (2.0 * math.pi)


def effective_channel(h_los, g_nlos, q):
    K, L = h_los.shape
    N = g_nlos.shape[1]
    # q[n, k + l*K] -> (N, L, K)
    qq = q.reshape(N, L, K)
    return h_los + np.einsum("nlk,lnk->kl", qq, g_nlos)


def project_rows(q_tilde):
    out = np.zeros_like(q_tilde, dtype=float)
    if q_tilde.shape[1] == 0:
        return out
    # ||x - e_p||^2 - ||x||^2 = 1 - 2 x_p, so e_p beats zero iff x_p > 1/2
    best = np.argmax(q_tilde, axis=1)
    rows = np.arange(q_tilde.shape[0])
    hit = q_tilde[rows, best] > 0.5
    out[rows[hit], best[hit]] = 1.0
    return out


def sinr_terms(h_eff, h_eve, v, noise_lu, noise_eve):
    """(e/2pi)-scaled SINRs: LU common, LU private, Eve common, Eve private."""
    K = h_eff.shape[0]
    rx = (h_eff @ v.T) ** 2  # K x (K+1): |h_k^T v_i|^2
    priv = rx[:, 1:]
    own = np.diagonal(priv).copy()
    # interference summed explicitly; subtracting own from a total cancels badly
    off = priv.copy()
    np.fill_diagonal(off, 0.0)
    g_common = E_OVER_2PI * rx[:, 0] / (priv.sum(axis=1) + noise_lu)
    g_private = E_OVER_2PI * own / (off.sum(axis=1) + noise_lu)
    ev = (v @ h_eve) ** 2  # K+1
    ev_priv = ev[1:]
    g_eve_common = E_OVER_2PI * ev[0] / (ev_priv.sum() + noise_eve)
    others = np.array([np.delete(ev_priv, k).sum() for k in range(K)])
    g_eve_private = E_OVER_2PI * ev_priv / (ev[0] + others + noise_eve)
    return g_common, g_private, float(g_eve_common), g_eve_private


def gae(delta, gamma, dones):
    adv = np.empty_like(delta, dtype=float)
    running = 0.0
    for t in range(len(delta) - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = delta[t] + gamma * running
        adv[t] = running
    return adv


def enumerate_alignments(h_los, g_nlos, h_eve, v, c, noise_lu, noise_eve, p_total):
    """SEE and (QoS-free) feasibility flags for every merged-row assignment.

    Configurations follow ``itertools.product(range(LK+1), repeat=N)``;
    digit 0 means the element is idle, digit p aligns pair p (1-based).
    Returns (see, secrecy, rate_lu_total (n_cfg x K), common_ok).
    """
    K, L = h_los.shape
    N = g_nlos.shape[1]
    P = L * K
    _, _, ge_c, ge_p = sinr_terms(h_los, h_eve, v, noise_lu, noise_eve)
    r_eve_c = math.log2(1.0 + ge_c)
    r_eve_p = np.log2(1.0 + ge_p)
    n_cfg = (P + 1) ** N
    see = np.empty(n_cfg)
    secrecy = np.empty(n_cfg)
    totals = np.empty((n_cfg, K))
    common_ok = np.empty(n_cfg, dtype=bool)
    c_sum = float(np.sum(c))
    for idx, digits in enumerate(itertools.product(range(P + 1), repeat=N)):
        h = h_los.copy()
        for n, p in enumerate(digits):
            if p:
                l, k = divmod(p - 1, K)
                h[k, l] += g_nlos[l, n, k]
        g_c, g_p, _, _ = sinr_terms(h, h_eve, v, noise_lu, noise_eve)
        r_c = np.log2(1.0 + g_c)
        r_p = np.log2(1.0 + g_p)
        sec = max(c_sum - r_eve_c, 0.0) + float(np.sum(np.maximum(r_p - r_eve_p, 0.0)))
        secrecy[idx] = sec
        see[idx] = sec / p_total
        totals[idx] = c + r_p
        common_ok[idx] = c_sum <= r_c.min()
    return see, secrecy, totals, common_ok
