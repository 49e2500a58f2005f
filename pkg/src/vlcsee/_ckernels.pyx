# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see _pykernels for the reference."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log2, M_E, M_PI

cnp.import_array()

cdef double E_OVER_2PI = M_E / (2.0 * M_PI)


def effective_channel(double[:, ::1] h_los, double[:, :, ::1] g_nlos, double[:, ::1] q):
    cdef Py_ssize_t K = h_los.shape[0], L = h_los.shape[1], N = g_nlos.shape[1]
    cdef Py_ssize_t n, l, k
    out = np.array(h_los, dtype=np.float64, copy=True)
    cdef double[:, ::1] o = out
    for n in range(N):
        for l in range(L):
            for k in range(K):
                if q[n, k + l * K] != 0.0:
                    o[k, l] += q[n, k + l * K] * g_nlos[l, n, k]
    return out


def project_rows(double[:, ::1] q_tilde):
    cdef Py_ssize_t R = q_tilde.shape[0], P = q_tilde.shape[1]
    cdef Py_ssize_t n, p, best
    cdef double bv
    out = np.zeros((R, P), dtype=np.float64)
    cdef double[:, ::1] o = out
    if P == 0:
        return out
    for n in range(R):
        best = 0
        bv = q_tilde[n, 0]
        for p in range(1, P):
            if q_tilde[n, p] > bv:
                bv = q_tilde[n, p]
                best = p
        if bv > 0.5:
            o[n, best] = 1.0
    return out


cdef void _sinr(double[:, ::1] h, double[::1] h_eve, double[:, ::1] v, double[::1] noise_lu,
                double noise_eve, double[::1] g_c, double[::1] g_p, double* ge_c, double[::1] ge_p,
                double[::1] work) noexcept nogil:
    cdef Py_ssize_t K = h.shape[0], L = h.shape[1]
    cdef Py_ssize_t k, i, l
    cdef Py_ssize_t j
    cdef double s, tot, other, ev0, evtot
    for k in range(K):
        tot = 0.0
        other = 0.0
        for i in range(K + 1):
            s = 0.0
            for l in range(L):
                s += h[k, l] * v[i, l]
            work[i] = s * s
            if i > 0:
                tot += s * s
                if i != k + 1:
                    other += s * s
        g_c[k] = E_OVER_2PI * work[0] / (tot + noise_lu[k])
        g_p[k] = E_OVER_2PI * work[k + 1] / (other + noise_lu[k])
    evtot = 0.0
    for i in range(K + 1):
        s = 0.0
        for l in range(L):
            s += h_eve[l] * v[i, l]
        work[i] = s * s
        if i > 0:
            evtot += s * s
    ev0 = work[0]
    ge_c[0] = E_OVER_2PI * ev0 / (evtot + noise_eve)
    for k in range(K):
        other = 0.0
        for j in range(1, K + 1):
            if j != k + 1:
                other += work[j]
        ge_p[k] = E_OVER_2PI * work[k + 1] / (ev0 + other + noise_eve)


def sinr_terms(double[:, ::1] h_eff, double[::1] h_eve, double[:, ::1] v, double[::1] noise_lu, double noise_eve):
    cdef Py_ssize_t K = h_eff.shape[0]
    g_c = np.empty(K)
    g_p = np.empty(K)
    ge_p = np.empty(K)
    work = np.empty(K + 1)
    cdef double ge_c = 0.0
    _sinr(h_eff, h_eve, v, noise_lu, noise_eve, g_c, g_p, &ge_c, ge_p, work)
    return g_c, g_p, ge_c, ge_p


def gae(double[::1] delta, double gamma, cnp.uint8_t[::1] dones):
    cdef Py_ssize_t T = delta.shape[0], t
    cdef double running = 0.0
    adv = np.empty(T)
    cdef double[::1] a = adv
    for t in range(T - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = delta[t] + gamma * running
        a[t] = running
    return adv


def enumerate_alignments(double[:, ::1] h_los, double[:, :, ::1] g_nlos, double[::1] h_eve,
                         double[:, ::1] v, double[::1] c, double[::1] noise_lu, double noise_eve,
                         double p_total):
    cdef Py_ssize_t K = h_los.shape[0], L = h_los.shape[1], N = g_nlos.shape[1]
    cdef Py_ssize_t P = L * K, base = P + 1
    cdef Py_ssize_t n_cfg = 1, idx, n, p, rem, l, k
    for n in range(N):
        n_cfg *= base
    see = np.empty(n_cfg)
    secrecy = np.empty(n_cfg)
    totals = np.empty((n_cfg, K))
    common_ok = np.empty(n_cfg, dtype=np.uint8)
    cdef double[::1] see_v = see, sec_v = secrecy
    cdef double[:, ::1] tot_v = totals
    cdef cnp.uint8_t[::1] ok_v = common_ok
    h_arr = np.empty((K, L))
    cdef double[:, ::1] h = h_arr
    g_c_arr = np.empty(K); g_p_arr = np.empty(K); ge_p_arr = np.empty(K); work_arr = np.empty(K + 1)
    cdef double[::1] g_c = g_c_arr, g_p = g_p_arr, ge_p = ge_p_arr, work = work_arr
    cdef double ge_c = 0.0, r_eve_c, c_sum = 0.0, sec, rc_min, r_p, diff
    cdef Py_ssize_t[:] digits = np.zeros(N if N > 0 else 1, dtype=np.intp)
    r_eve_p_arr = np.empty(K)
    cdef double[::1] r_eve_p = r_eve_p_arr

    _sinr(h_los, h_eve, v, noise_lu, noise_eve, g_c, g_p, &ge_c, ge_p, work)
    r_eve_c = log2(1.0 + ge_c)
    for k in range(K):
        r_eve_p[k] = log2(1.0 + ge_p[k])
        c_sum += c[k]

    with nogil:
        for idx in range(n_cfg):
            # digits of idx in base P+1, element 0 most significant
            rem = idx
            for n in range(N - 1, -1, -1):
                digits[n] = rem % base
                rem = rem // base
            for k in range(K):
                for l in range(L):
                    h[k, l] = h_los[k, l]
            for n in range(N):
                p = digits[n]
                if p:
                    l = (p - 1) // K
                    k = (p - 1) % K
                    h[k, l] += g_nlos[l, n, k]
            _sinr(h, h_eve, v, noise_lu, noise_eve, g_c, g_p, &ge_c, ge_p, work)
            sec = c_sum - r_eve_c
            if sec < 0.0:
                sec = 0.0
            rc_min = 1e308
            for k in range(K):
                r_p = log2(1.0 + g_p[k])
                diff = r_p - r_eve_p[k]
                if diff > 0.0:
                    sec += diff
                tot_v[idx, k] = c[k] + r_p
                r_p = log2(1.0 + g_c[k])
                if r_p < rc_min:
                    rc_min = r_p
            sec_v[idx] = sec
            see_v[idx] = sec / p_total
            ok_v[idx] = 1 if c_sum <= rc_min else 0
    return see, secrecy, totals, common_ok.astype(bool)
