# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the lattice hot path and exact subset enumeration.

Same contract as `_kernels_py`: a bin's load distribution is a cumulative row
prefix[j] = P(load <= j * eps); element n_steps carries 1 - overflow.
"""

import numpy as np


cpdef void prefix_add(double[::1] prefix, double p, Py_ssize_t k):
    cdef Py_ssize_t n = prefix.shape[0] - 1
    cdef double q = 1.0 - p
    cdef Py_ssize_t j, lo
    lo = k if k <= n else n + 1
    # Descending so prefix[j - k] is still the pre-update value.
    for j in range(n, lo - 1, -1):
        prefix[j] = q * prefix[j] + p * prefix[j - k]
    for j in range(lo - 1, -1, -1):
        prefix[j] = q * prefix[j]


cpdef double prefix_overflow_if_added(double[::1] prefix, double p, Py_ssize_t k):
    cdef Py_ssize_t n = prefix.shape[0] - 1
    cdef double pn = prefix[n]
    cdef double tail
    if k > n:
        tail = pn
    else:
        tail = pn - prefix[n - k]
    return (1.0 - pn) + p * tail


cpdef Py_ssize_t lattice_first_fit(double[:, ::1] prefix_mat, Py_ssize_t n_bins,
                                   double p, Py_ssize_t k, double tol):
    cdef Py_ssize_t n = prefix_mat.shape[1] - 1
    cdef Py_ssize_t i
    cdef double pn, tail, of
    for i in range(n_bins):
        pn = prefix_mat[i, n]
        if k > n:
            tail = pn
        else:
            tail = pn - prefix_mat[i, n - k]
        of = (1.0 - pn) + p * tail
        if of <= tol:
            return i
    return -1


cpdef Py_ssize_t combined_first_fit(double[:, ::1] prefix_mat, double[::1] wsums,
                                    Py_ssize_t n_bins, double p, Py_ssize_t k,
                                    double w, double of_tol, double w_tol):
    cdef Py_ssize_t n = prefix_mat.shape[1] - 1
    cdef Py_ssize_t i
    cdef double pn, tail, of
    for i in range(n_bins):
        if wsums[i] + w <= 1.0 + w_tol:
            return i
        pn = prefix_mat[i, n]
        if k > n:
            tail = pn
        else:
            tail = pn - prefix_mat[i, n - k]
        of = (1.0 - pn) + p * tail
        if of <= of_tol:
            return i
    return -1


cdef double _subset_rec(double[::1] probs, double[::1] sizes, double[::1] sfx,
                        Py_ssize_t i, Py_ssize_t n, double load, double acc,
                        double cap):
    if acc == 0.0:
        return 0.0
    if load > cap:
        # Every completion of this branch overflows.
        return acc
    if i == n or load + sfx[i] <= cap:
        return 0.0
    return (_subset_rec(probs, sizes, sfx, i + 1, n, load + sizes[i],
                        acc * probs[i], cap)
            + _subset_rec(probs, sizes, sfx, i + 1, n, load,
                          acc * (1.0 - probs[i]), cap))


def subset_overflow(probs, sizes, double cap_tol):
    """Exact P(sum of active sizes > 1 + cap_tol); descending sizes prune best."""
    order = np.argsort(sizes)[::-1]
    cdef double[::1] pv = np.ascontiguousarray(np.asarray(probs, dtype=np.float64)[order])
    cdef double[::1] sv = np.ascontiguousarray(np.asarray(sizes, dtype=np.float64)[order])
    cdef Py_ssize_t n = sv.shape[0]
    sfx_arr = np.zeros(n + 1)
    sfx_arr[:n] = np.cumsum(np.asarray(sv)[::-1])[::-1]
    cdef double[::1] sfx = sfx_arr
    return _subset_rec(pv, sv, sfx, 0, n, 0.0, 1.0, 1.0 + cap_tol)
