# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels; must stay bit-identical to _pykernels.py."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def mix_distribution(
    cnp.ndarray[cnp.float64_t, ndim=1] uni_probs,
    cnp.ndarray[cnp.int64_t, ndim=1] bi_ids,
    cnp.ndarray[cnp.float64_t, ndim=1] bi_counts,
    double bi_total,
    cnp.ndarray[cnp.int64_t, ndim=1] tri_ids,
    cnp.ndarray[cnp.float64_t, ndim=1] tri_counts,
    double tri_total,
    double lam3,
    double lam2,
    double lam1,
):
    cdef double w3 = lam3 if tri_total > 0 else 0.0
    cdef double w2 = lam2 if bi_total > 0 else 0.0
    cdef double w1 = 1.0 - w3 - w2
    cdef Py_ssize_t n = uni_probs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] probs = np.empty(n, dtype=np.float64)
    cdef double[::1] pv = probs
    cdef double[::1] uv = uni_probs
    cdef Py_ssize_t i
    for i in range(n):
        pv[i] = w1 * uv[i]
    cdef double coef
    cdef long[::1] ids
    cdef double[::1] counts
    if w2 > 0:
        coef = w2 / bi_total
        ids = bi_ids
        counts = bi_counts
        for i in range(ids.shape[0]):
            pv[ids[i]] += coef * counts[i]
    if w3 > 0:
        coef = w3 / tri_total
        ids = tri_ids
        counts = tri_counts
        for i in range(ids.shape[0]):
            pv[ids[i]] += coef * counts[i]
    return probs


def nucleus_pick(cnp.ndarray[cnp.float64_t, ndim=1] probs, double top_p,
                 double temperature, double u):
    # Sort/cumsum go through numpy so float accumulation matches the
    # pure-Python path exactly; the selection scan is a C loop.
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q
    if temperature != 1.0:
        q = probs ** (1.0 / temperature)
        q = q / q.sum()
    else:
        q = probs
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order = np.argsort(-q, kind="stable")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sorted_q = q[order]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cum = np.cumsum(sorted_q)
    cdef Py_ssize_t cutoff = np.searchsorted(cum, top_p, side="left")
    if cutoff > cum.shape[0] - 1:
        cutoff = cum.shape[0] - 1
    cdef double kept_sum = sorted_q[: cutoff + 1].sum()
    cdef double target = u * kept_sum
    cdef double acc = 0.0
    cdef double[::1] sq = sorted_q
    cdef long[::1] ov = order
    cdef Py_ssize_t j
    for j in range(cutoff + 1):
        acc += sq[j]
        if acc > target:
            return int(ov[j])
    return int(ov[cutoff])
