"""Pure-Python/NumPy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature.
Results must agree bit-for-bit, so floating-point reductions that depend on
order (neighbor sums, dot products in SGD) are written as sequential loops in
the same order as the compiled code.  The MSD sums are computed with sparse
products in a different order, which is still exact: ratings are multiples of
0.5, so every squared difference and partial sum is an exactly representable
multiple of 0.25.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

NAME = "python"


def msd_rows(indptr, indices, data, t_indptr, t_indices, t_data, n_entities, rows, min_support):
    """MSD similarity of the entities in ``rows`` against all entities.

    ``(indptr, indices, data)`` is the CSR matrix entity x other;
    ``(t_indptr, t_indices, t_data)`` is its transpose in CSR form.
    Returns a ``len(rows) x n_entities`` float64 array.
    """
    n_other = len(t_indptr) - 1
    x = sparse.csr_matrix((data, indices, indptr), shape=(n_entities, n_other))
    rows = np.asarray(rows, dtype=np.int64)
    xb = x[rows]
    mask = x.copy()
    mask.data = np.ones_like(mask.data)
    mask_b = mask[rows]
    sq2 = x.multiply(x).tocsr()
    sq2_b = sq2[rows]
    cnt = (mask_b @ mask.T).toarray()
    sq = (sq2_b @ mask.T).toarray() + (mask_b @ sq2.T).toarray() - 2.0 * (xb @ x.T).toarray()
    support = max(int(min_support), 1)
    out = np.zeros((len(rows), n_entities), dtype=np.float64)
    ok = cnt >= support
    out[ok] = 1.0 / (sq[ok] / cnt[ok] + 1.0)
    has = np.diff(np.asarray(indptr))[rows] > 0
    out[np.flatnonzero(has), rows[has]] = 1.0
    return out


def knn_aggregate(sim, row_of_query, seg_ptr, nbr_idx, nbr_vals, nbr_means, max_k, min_k):
    """Weighted mean-centered neighbor deviation for a batch of queries.

    Query ``q`` looks at candidate neighbors ``nbr_idx[seg_ptr[q]:seg_ptr[q+1]]``
    (their ratings in ``nbr_vals``), with similarities read from
    ``sim[row_of_query[q], :]``.  Up to ``max_k`` candidates with positive
    similarity are used, highest first, ties to the earlier candidate.
    Returns ``(deviation, n_used)``; deviation is 0 when ``n_used < min_k``.
    """
    nq = len(row_of_query)
    dev = np.zeros(nq, dtype=np.float64)
    used = np.zeros(nq, dtype=np.int64)
    for q in range(nq):
        lo, hi = int(seg_ptr[q]), int(seg_ptr[q + 1])
        if hi == lo:
            continue
        idx = nbr_idx[lo:hi]
        s = sim[row_of_query[q], idx]
        pos = np.flatnonzero(s > 0.0)
        if len(pos) == 0:
            continue
        sel = pos[np.argsort(-s[pos], kind="stable")[:max_k]]
        used[q] = len(sel)
        if len(sel) < min_k:
            continue
        num = 0.0
        den = 0.0
        for j in sel.tolist():
            w = float(s[j])
            num += w * (float(nbr_vals[lo + j]) - float(nbr_means[idx[j]]))
            den += w
        dev[q] = num / den
    return dev, used


def sgd_epoch(users, items, values, order, mu, bu, bi, p, q, lr, reg):
    """One pass of biased Funk-SVD SGD over ``order``; updates arrays in place."""
    pl = p.tolist()
    ql = q.tolist()
    bul = bu.tolist()
    bil = bi.tolist()
    ul = users.tolist()
    il = items.tolist()
    vl = values.tolist()
    nf = p.shape[1]
    rf = range(nf)
    for k in order.tolist():
        u = ul[k]
        i = il[k]
        pu = pl[u]
        qi = ql[i]
        dot = 0.0
        for f in rf:
            dot += qi[f] * pu[f]
        err = vl[k] - (mu + bul[u] + bil[i] + dot)
        bul[u] += lr * (err - reg * bul[u])
        bil[i] += lr * (err - reg * bil[i])
        for f in rf:
            puf = pu[f]
            qif = qi[f]
            pu[f] = puf + lr * (err * qif - reg * puf)
            qi[f] = qif + lr * (err * puf - reg * qif)
    p[...] = pl
    q[...] = ql
    bu[...] = bul
    bi[...] = bil


def predict_dot(p_row, q_row):
    """Sequential dot product, same order as the SGD kernel."""
    dot = 0.0
    for a, b in zip(q_row.tolist(), p_row.tolist()):
        dot += a * b
    return dot
