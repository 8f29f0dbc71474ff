# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the hot rate-evaluation kernels.

These two functions sit in the innermost loops of the phase line search, the
WMMSE sweeps and the master-problem enumeration, where call counts reach the
millions; the compiled loops avoid per-call numpy dispatch overhead on the
small matrices involved.
"""

import numpy as np

from libc.math cimport log2


def effective_channels(h_direct, h_ris, phi, h_uav):
    """h_direct + h_ris @ phi @ h_uav, shapes (K,N) + (K,n)(n,n)(n,N)."""
    cdef const double complex[:, ::1] hd = np.ascontiguousarray(h_direct, dtype=np.complex128)
    cdef const double complex[:, ::1] hr = np.ascontiguousarray(h_ris, dtype=np.complex128)
    cdef const double complex[:, ::1] ph = np.ascontiguousarray(phi, dtype=np.complex128)
    cdef const double complex[:, ::1] hu = np.ascontiguousarray(h_uav, dtype=np.complex128)
    cdef Py_ssize_t K = hd.shape[0], N = hd.shape[1], n = hr.shape[1]
    out = np.empty((K, N), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    tmp = np.empty((K, n), dtype=np.complex128)
    cdef double complex[:, ::1] t = tmp
    cdef Py_ssize_t k, i, j
    cdef double complex acc
    for k in range(K):
        for j in range(n):
            acc = 0
            for i in range(n):
                acc = acc + hr[k, i] * ph[i, j]
            t[k, j] = acc
    for k in range(K):
        for j in range(N):
            acc = hd[k, j]
            for i in range(n):
                acc = acc + t[k, i] * hu[i, j]
            o[k, j] = acc
    return out


def stream_rates(heff, precoders, double noise_w):
    """Per-user SINRs and spectral efficiencies for one group.

    Same contract as the numpy backend: heff (K,N), precoders (N,K+1) with
    column 0 the common stream; returns (gamma_c, gamma_p, rate_c, rate_p).
    """
    cdef const double complex[:, ::1] h = np.ascontiguousarray(heff, dtype=np.complex128)
    cdef const double complex[:, ::1] tm = np.ascontiguousarray(precoders, dtype=np.complex128)
    cdef Py_ssize_t K = h.shape[0], N = h.shape[1], S = tm.shape[1]
    gamma_c = np.empty(K, dtype=np.float64)
    gamma_p = np.empty(K, dtype=np.float64)
    rate_c = np.empty(K, dtype=np.float64)
    rate_p = np.empty(K, dtype=np.float64)
    cdef double[::1] gc = gamma_c, gp = gamma_p, rc = rate_c, rp = rate_p
    cdef Py_ssize_t k, s, j
    cdef double complex a
    cdef double p_common, total_priv, own, p, g
    for k in range(K):
        p_common = 0.0
        total_priv = 0.0
        own = 0.0
        for s in range(S):
            a = 0
            for j in range(N):
                a = a + h[k, j] * tm[j, s]
            p = a.real * a.real + a.imag * a.imag
            if s == 0:
                p_common = p
            else:
                total_priv += p
                if s == k + 1:
                    own = p
        gc[k] = p_common / (total_priv + noise_w)
        g = total_priv - own
        if g < 0.0:
            g = 0.0
        gp[k] = own / (g + noise_w)
        rc[k] = log2(1.0 + gc[k])
        rp[k] = log2(1.0 + gp[k])
    return gamma_c, gamma_p, rate_c, rate_p
