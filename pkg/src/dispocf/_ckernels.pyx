# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.  Same signatures and results as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport calloc, free, malloc

cnp.import_array()

NAME = "cython"


cdef void _msd_row(const cnp.int32_t[::1] indptr, const cnp.int32_t[::1] indices,
                   const double[::1] data, const cnp.int32_t[::1] t_indptr,
                   const cnp.int32_t[::1] t_indices, const double[::1] t_data,
                   Py_ssize_t u, double* sq, cnp.int64_t* cnt, Py_ssize_t n,
                   long support, double[:, ::1] out, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t p, q, o, v
    cdef double ru, d
    for v in range(n):
        sq[v] = 0.0
        cnt[v] = 0
    for p in range(indptr[u], indptr[u + 1]):
        o = indices[p]
        ru = data[p]
        for q in range(t_indptr[o], t_indptr[o + 1]):
            v = t_indices[q]
            d = ru - t_data[q]
            sq[v] += d * d
            cnt[v] += 1
    for v in range(n):
        if cnt[v] >= support:
            out[b, v] = 1.0 / (sq[v] / <double>cnt[v] + 1.0)
        else:
            out[b, v] = 0.0
    if indptr[u + 1] > indptr[u]:
        out[b, u] = 1.0


def msd_rows(indptr, indices, data, t_indptr, t_indices, t_data,
             Py_ssize_t n_entities, rows, long min_support):
    cdef const cnp.int32_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int32)
    cdef const cnp.int32_t[::1] ix = np.ascontiguousarray(indices, dtype=np.int32)
    cdef const double[::1] dt = np.ascontiguousarray(data, dtype=np.float64)
    cdef const cnp.int32_t[::1] tip = np.ascontiguousarray(t_indptr, dtype=np.int32)
    cdef const cnp.int32_t[::1] tix = np.ascontiguousarray(t_indices, dtype=np.int32)
    cdef const double[::1] tdt = np.ascontiguousarray(t_data, dtype=np.float64)
    cdef const cnp.int64_t[::1] rw = np.ascontiguousarray(rows, dtype=np.int64)
    cdef Py_ssize_t nb = rw.shape[0], b
    result = np.empty((nb, n_entities), dtype=np.float64)
    cdef double[:, ::1] out = result
    cdef long support = min_support if min_support > 1 else 1
    cdef double* sq = <double*> malloc(max(n_entities, 1) * sizeof(double))
    cdef cnp.int64_t* cnt = <cnp.int64_t*> malloc(max(n_entities, 1) * sizeof(cnp.int64_t))
    if sq == NULL or cnt == NULL:
        free(sq)
        free(cnt)
        raise MemoryError()
    try:
        with nogil:
            for b in range(nb):
                _msd_row(ip, ix, dt, tip, tix, tdt, rw[b], sq, cnt, n_entities, support, out, b)
    finally:
        free(sq)
        free(cnt)
    return result


def knn_aggregate(sim, row_of_query, seg_ptr, nbr_idx, nbr_vals, nbr_means,
                  Py_ssize_t max_k, Py_ssize_t min_k):
    cdef const double[:, ::1] s = np.ascontiguousarray(sim, dtype=np.float64)
    cdef const cnp.int64_t[::1] rq = np.ascontiguousarray(row_of_query, dtype=np.int64)
    cdef const cnp.int64_t[::1] sp = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] ni = np.ascontiguousarray(nbr_idx, dtype=np.int64)
    cdef const double[::1] nv = np.ascontiguousarray(nbr_vals, dtype=np.float64)
    cdef const double[::1] nm = np.ascontiguousarray(nbr_means, dtype=np.float64)
    cdef Py_ssize_t nq = rq.shape[0]
    dev_arr = np.zeros(nq, dtype=np.float64)
    used_arr = np.zeros(nq, dtype=np.int64)
    cdef double[::1] dev = dev_arr
    cdef cnp.int64_t[::1] used = used_arr
    cdef Py_ssize_t q, lo, hi, j, t, npos, best, row, maxlen = 0
    cdef double w, bw, num, den
    for q in range(nq):
        if sp[q + 1] - sp[q] > maxlen:
            maxlen = sp[q + 1] - sp[q]
    cdef Py_ssize_t* cand = <Py_ssize_t*> malloc(max(maxlen, 1) * sizeof(Py_ssize_t))
    cdef char* taken = <char*> calloc(max(maxlen, 1), sizeof(char))
    if cand == NULL or taken == NULL:
        free(cand)
        free(taken)
        raise MemoryError()
    try:
        with nogil:
            for q in range(nq):
                lo = sp[q]
                hi = sp[q + 1]
                row = rq[q]
                npos = 0
                for j in range(hi - lo):
                    if s[row, ni[lo + j]] > 0.0:
                        cand[npos] = j
                        taken[npos] = 0
                        npos += 1
                if npos == 0:
                    continue
                if npos > max_k:
                    used[q] = max_k
                else:
                    used[q] = npos
                if used[q] < min_k:
                    continue
                num = 0.0
                den = 0.0
                for t in range(used[q]):
                    best = -1
                    bw = 0.0
                    for j in range(npos):
                        if not taken[j]:
                            w = s[row, ni[lo + cand[j]]]
                            if best < 0 or w > bw:
                                best = j
                                bw = w
                    taken[best] = 1
                    j = cand[best]
                    num += bw * (nv[lo + j] - nm[ni[lo + j]])
                    den += bw
                dev[q] = num / den
    finally:
        free(cand)
        free(taken)
    return dev_arr, used_arr


def sgd_epoch(users, items, values, order, double mu, double[::1] bu, double[::1] bi,
              double[:, ::1] p, double[:, ::1] q, double lr, double reg):
    cdef const cnp.int64_t[::1] us = np.ascontiguousarray(users, dtype=np.int64)
    cdef const cnp.int64_t[::1] it = np.ascontiguousarray(items, dtype=np.int64)
    cdef const double[::1] vs = np.ascontiguousarray(values, dtype=np.float64)
    cdef const cnp.int64_t[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = od.shape[0], nf = p.shape[1], t, k, u, i, f
    cdef double dot, err, puf, qif
    with nogil:
        for t in range(n):
            k = od[t]
            u = us[k]
            i = it[k]
            dot = 0.0
            for f in range(nf):
                dot += q[i, f] * p[u, f]
            err = vs[k] - (mu + bu[u] + bi[i] + dot)
            bu[u] += lr * (err - reg * bu[u])
            bi[i] += lr * (err - reg * bi[i])
            for f in range(nf):
                puf = p[u, f]
                qif = q[i, f]
                p[u, f] = puf + lr * (err * qif - reg * puf)
                q[i, f] = qif + lr * (err * puf - reg * qif)


def predict_dot(p_row, q_row):
    cdef const double[::1] pr = np.ascontiguousarray(p_row, dtype=np.float64)
    cdef const double[::1] qr = np.ascontiguousarray(q_row, dtype=np.float64)
    cdef double dot = 0.0
    cdef Py_ssize_t f
    for f in range(pr.shape[0]):
        dot += qr[f] * pr[f]
    return dot
