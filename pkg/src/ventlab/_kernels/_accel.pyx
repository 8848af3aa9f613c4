# cython: boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot kernels: CSR matvec, level-of-fill incomplete Cholesky
and sparse triangular solves.  Mirrors ``_pyref`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from libcpp.queue cimport priority_queue
from libcpp.vector cimport vector

cnp.import_array()

IMPLEMENTATION = "compiled"


def csr_matvec(const long long[:] indptr, const int[:] indices,
               const double[:] data, const double[:] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef double[:] y = out
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        y[i] = acc
    return out


def ic_symbolic(Py_ssize_t n, const long long[:] indptr, const int[:] indices,
                int level):
    """Level-of-fill pattern of the incomplete Cholesky factor."""
    cdef vector[vector[int]] upper = vector[vector[int]](n)
    cdef vector[int] lower_cols
    cdef cnp.ndarray[long long, ndim=1] out_indptr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[short, ndim=1] lev_arr = np.full(n, 32767, dtype=np.int16)
    cdef short[:] lev = lev_arr
    cdef vector[int] touched
    cdef vector[int] L_all
    cdef priority_queue[int] heap  # max-heap over negated columns
    cdef Py_ssize_t i, p, t
    cdef int j, k, lk, lnew, packed, lkj
    cdef size_t u

    for i in range(n):
        touched.clear()
        lev[i] = 0
        touched.push_back(<int> i)
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if lev[j] == 32767:
                touched.push_back(j)
                lev[j] = 0
                if j < i:
                    heap.push(-j)
        while not heap.empty():
            k = -heap.top()
            heap.pop()
            # skip stale duplicates
            while not heap.empty() and -heap.top() == k:
                heap.pop()
            lk = lev[k]
            for u in range(upper[k].size()):
                packed = upper[k][u]
                j = packed >> 4
                lkj = packed & 15
                lnew = lk + lkj + 1
                if lnew <= level and lnew < lev[j]:
                    if lev[j] == 32767:
                        touched.push_back(j)
                        if j < i:
                            heap.push(-j)
                    lev[j] = <short> lnew
        lower_cols.clear()
        for t in range(<Py_ssize_t> touched.size()):
            j = touched[t]
            if lev[j] <= level:
                if j <= i:
                    lower_cols.push_back(j)
                else:
                    upper[i].push_back((j << 4) | lev[j])
        _sort_ints(lower_cols)
        _sort_ints(upper[i])
        for t in range(<Py_ssize_t> lower_cols.size()):
            L_all.push_back(lower_cols[t])
        out_indptr[i + 1] = out_indptr[i] + <long long> lower_cols.size()
        for t in range(<Py_ssize_t> touched.size()):
            lev[touched[t]] = 32767

    cdef cnp.ndarray[int, ndim=1] out_cols = np.empty(L_all.size(), dtype=np.int32)
    for i in range(<Py_ssize_t> L_all.size()):
        out_cols[i] = L_all[i]
    return out_indptr, out_cols


cdef void _sort_ints(vector[int]& v) noexcept:
    cdef Py_ssize_t i, j
    cdef int key
    # insertion sort: rows are nearly sorted already and short
    for i in range(1, <Py_ssize_t> v.size()):
        key = v[i]
        j = i - 1
        while j >= 0 and v[j] > key:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = key


def ic_numeric(const long long[:] indptr, const int[:] indices,
               const double[:] data,
               const long long[:] L_indptr, const int[:] L_indices,
               double shift):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(L_indices.shape[0])
    cdef double[:] L_data = out
    cdef Py_ssize_t i, lo, hi, idx, pa, pl, enda, jlo, jhi, p, q
    cdef int j, ca, cl, cp, cq
    cdef double s, d, v

    for i in range(n):
        lo = L_indptr[i]
        hi = L_indptr[i + 1]
        # seed with lower-triangular entries of A's row i
        pa = indptr[i]
        enda = indptr[i + 1]
        pl = lo
        while pa < enda and pl < hi:
            ca = indices[pa]
            if ca > i:
                break
            cl = L_indices[pl]
            if ca == cl:
                L_data[pl] = data[pa]
                pa += 1
                pl += 1
            elif ca < cl:
                pa += 1
            else:
                pl += 1
        L_data[hi - 1] += shift
        for idx in range(hi - lo - 1):
            j = L_indices[lo + idx]
            jlo = L_indptr[j]
            jhi = L_indptr[j + 1]
            s = 0.0
            p = lo
            q = jlo
            while p < lo + idx and q < jhi - 1:
                cp = L_indices[p]
                cq = L_indices[q]
                if cp == cq:
                    s += L_data[p] * L_data[q]
                    p += 1
                    q += 1
                elif cp < cq:
                    p += 1
                else:
                    q += 1
            L_data[lo + idx] = (L_data[lo + idx] - s) / L_data[jhi - 1]
        d = L_data[hi - 1]
        for p in range(lo, hi - 1):
            d -= L_data[p] * L_data[p]
        if d <= 0.0:
            return out, i
        L_data[hi - 1] = sqrt(d)
    return out, -1


def solve_lower(const long long[:] L_indptr, const int[:] L_indices,
                const double[:] L_data, const double[:] b):
    cdef Py_ssize_t n = L_indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[:] x = out
    cdef Py_ssize_t i, p, hi
    cdef double acc
    for i in range(n):
        acc = b[i]
        hi = L_indptr[i + 1]
        for p in range(L_indptr[i], hi - 1):
            acc -= L_data[p] * x[L_indices[p]]
        x[i] = acc / L_data[hi - 1]
    return out


def solve_lower_transpose(const long long[:] L_indptr, const int[:] L_indices,
                          const double[:] L_data, const double[:] b):
    cdef Py_ssize_t n = L_indptr.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] out = np.array(b, dtype=np.float64)
    cdef double[:] x = out
    cdef Py_ssize_t i, p, hi
    cdef double xi
    for i in range(n - 1, -1, -1):
        hi = L_indptr[i + 1]
        xi = x[i] / L_data[hi - 1]
        x[i] = xi
        for p in range(L_indptr[i], hi - 1):
            x[L_indices[p]] -= L_data[p] * xi
    return out
