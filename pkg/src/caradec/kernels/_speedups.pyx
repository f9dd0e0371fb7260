# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython twin of ``_purepy``: same arithmetic, same tie-breaks, C loops.

Keep the two implementations in lock-step; the parity test suite compares
them pair by pair.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()

BRANCH_MIN_IN = 0
BRANCH_MAX_OUT = 1
BRANCH_TERMINAL = 2

DEF BR_MIN_IN = 0
DEF BR_MAX_OUT = 1
DEF BR_TERMINAL = 2


cdef void _msort(double* x, int* idx, int* tmp, int lo, int hi) noexcept nogil:
    """Stable mergesort of idx[lo:hi) by (x descending, index ascending)."""
    cdef int mid, i, j, k
    if hi - lo <= 1:
        return
    mid = (lo + hi) >> 1
    _msort(x, idx, tmp, lo, mid)
    _msort(x, idx, tmp, mid, hi)
    i = lo
    j = mid
    k = lo
    while i < mid and j < hi:
        if x[idx[i]] >= x[idx[j]]:
            tmp[k] = idx[i]
            i += 1
        else:
            tmp[k] = idx[j]
            j += 1
        k += 1
    while i < mid:
        tmp[k] = idx[i]
        i += 1
        k += 1
    while j < hi:
        tmp[k] = idx[j]
        j += 1
        k += 1
    for i in range(lo, hi):
        idx[i] = tmp[i]


cdef void _isort(double* x, int* idx, int n) noexcept nogil:
    """Insertion sort by the same strict order (x desc, index asc); the
    renormalization step leaves few inversions, so repairing the previous
    order is near-linear."""
    cdef int i, j, key
    cdef double xk
    for i in range(1, n):
        key = idx[i]
        xk = x[key]
        j = i - 1
        while j >= 0 and (x[idx[j]] < xk or (x[idx[j]] == xk and idx[j] > key)):
            idx[j + 1] = idx[j]
            j -= 1
        idx[j + 1] = key


def decompose_blocks(
    object x0,
    object block_of,
    object budgets,
    double scale,
    double floor,
    double eps,
    int max_iter,
    double guard,
    bint want_tape,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(x0, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] blk = np.ascontiguousarray(block_of, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bud = np.ascontiguousarray(budgets, dtype=np.int64)
    cdef int n = x.shape[0]
    cdef int nb = bud.shape[0]
    cdef long K = 0
    cdef int i
    for i in range(nb):
        K += bud[i]

    cdef int cap = max_iter if max_iter > 0 else 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] probs = np.empty(cap, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qs = np.empty(cap, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] avals = np.empty(cap, np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] verts = np.empty((cap, K), np.int32)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] branch = np.empty(cap, np.int8)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] bind = np.empty(cap, np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aexs = np.empty(cap, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] snaps
    if want_tape:
        snaps = np.empty((cap, n), np.float64)
    else:
        snaps = np.empty((0, 0), np.float64)

    cdef cnp.ndarray[cnp.int32_t, ndim=1] order_arr = np.empty(n, np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] tmp_arr = np.empty(n, np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cnt_arr = np.empty(nb, np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] in_set = np.zeros(n, np.uint8)

    cdef int* order = <int*> order_arr.data
    cdef int* tmp = <int*> tmp_arr.data
    cdef double* xp = <double*> x.data

    cdef double q = 1.0
    cdef bint terminal = False
    cdef double residual_inf = 0.0
    cdef int T = 0
    cdef int t, pos, b, rel, bi, br, j
    cdef long kk
    cdef double a_in, a_out, a_exact, a_scaled, a, om, mx, ss
    cdef bint exact_step

    for i in range(n):
        order[i] = i

    for t in range(max_iter):
        if t == 0:
            _msort(xp, order, tmp, 0, n)
        else:
            _isort(xp, order, n)
        for i in range(nb):
            cnt_arr[i] = 0
        pos = 0
        for i in range(n):
            if pos == K:
                break
            b = blk[order[i]]
            if cnt_arr[b] < bud[b]:
                cnt_arr[b] += 1
                verts[T, pos] = order[i]
                pos += 1
        # sort the vertex indices ascending (insertion sort; K is small-ish)
        for i in range(1, K):
            kk = verts[T, i]
            j = i - 1
            while j >= 0 and verts[T, j] > kk:
                verts[T, j + 1] = verts[T, j]
                j -= 1
            verts[T, j + 1] = <cnp.int32_t> kk
        for i in range(n):
            in_set[i] = 0
        for i in range(K):
            in_set[verts[T, i]] = 1

        a_in = INFINITY
        bi = -1
        for i in range(K):
            if xp[verts[T, i]] < a_in:
                a_in = xp[verts[T, i]]
                bi = verts[T, i]
        a_out = INFINITY
        rel = -1
        mx = -INFINITY
        for i in range(n):
            if not in_set[i] and xp[i] > mx:
                mx = xp[i]
                rel = i
        if rel >= 0:
            a_out = 1.0 - mx

        if a_in <= a_out:
            a_exact = a_in
            br = BR_MIN_IN
        else:
            a_exact = a_out
            br = BR_MAX_OUT
            bi = rel
        if a_exact < 0.0:
            a_exact = 0.0

        a_scaled = scale * a_exact
        if a_scaled >= floor:
            a = a_scaled
            exact_step = scale == 1.0
        else:
            a = a_exact
            exact_step = True

        if a > 1.0 - guard or q * (1.0 - a) < guard:
            probs[T] = q
            qs[T] = q
            avals[T] = 1.0
            aexs[T] = 1.0
            branch[T] = BR_TERMINAL
            bind[T] = -1
            if want_tape:
                for i in range(n):
                    snaps[T, i] = xp[i]
            mx = 0.0
            for i in range(n):
                ss = xp[i] - (1.0 if in_set[i] else 0.0)
                if fabs(ss) > mx:
                    mx = fabs(ss)
            residual_inf = q * mx
            terminal = True
            T += 1
            break

        probs[T] = a * q
        qs[T] = q
        avals[T] = a
        aexs[T] = a_exact
        branch[T] = <cnp.int8_t> br
        bind[T] = bi

        om = 1.0 - a
        for i in range(K):
            xp[verts[T, i]] -= a
        for i in range(n):
            xp[i] /= om
        if exact_step:
            xp[bi] = 0.0 if br == BR_MIN_IN else 1.0
        for i in range(n):
            if xp[i] < 0.0:
                xp[i] = 0.0
            elif xp[i] > 1.0:
                xp[i] = 1.0
        q *= om
        if want_tape:
            for i in range(n):
                snaps[T, i] = xp[i]
        T += 1

        mx = 0.0
        ss = 0.0
        for i in range(n):
            if xp[i] > mx:
                mx = xp[i]
            ss += xp[i] * xp[i]
        residual_inf = q * mx
        if eps > 0.0 and q * sqrt(ss) <= eps:
            break

    out_snaps = snaps[:T].copy() if want_tape else None
    return (
        probs[:T].copy(),
        qs[:T].copy(),
        avals[:T].copy(),
        verts[:T].copy(),
        branch[:T].copy(),
        bind[:T].copy(),
        out_snaps,
        aexs[:T].copy(),
        residual_inf,
        terminal,
    )


def backprop_blocks(
    int n,
    object probs,
    object qs,
    object avals,
    object verts,
    object branch,
    object bind,
    object snaps,
    object aex,
    object fvals,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(probs, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qq = np.ascontiguousarray(qs, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(avals, np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] v = np.ascontiguousarray(verts, np.int32)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] br = np.ascontiguousarray(branch, np.int8)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] bi = np.ascontiguousarray(bind, np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sn = np.ascontiguousarray(snaps, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ax = np.ascontiguousarray(aex, np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f = np.ascontiguousarray(fvals, np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.zeros(n, np.float64)
    cdef double R = 0.0
    cdef int T = p.shape[0]
    cdef long K = v.shape[1]
    cdef int t, i
    cdef double om, s, vsum, dot, coeff

    for t in range(T - 1, -1, -1):
        if br[t] == BR_TERMINAL:
            R += p[t] * f[t]
            continue
        om = 1.0 - a[t]
        s = qq[t] * f[t] - R / om
        vsum = 0.0
        for i in range(K):
            vsum += g[v[t, i]]
        dot = 0.0
        for i in range(n):
            dot += g[i] * sn[t, i]
        dot -= vsum
        coeff = dot / om + s
        if ax[t] > 0.0 and a[t] != ax[t]:
            coeff *= a[t] / ax[t]
        for i in range(n):
            g[i] /= om
        if br[t] == BR_MIN_IN:
            g[bi[t]] += coeff
        else:
            g[bi[t]] -= coeff
        R += p[t] * f[t]
    return g
