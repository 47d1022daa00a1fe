# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``.

Signatures and results match the NumPy versions exactly; see that module
for the tie rule.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, fabs, rint, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "compiled"

DEF MAXDIM = 64


cdef inline bint _lex_less(const double* a, const double* b, Py_ssize_t n, double tol) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        if fabs(a[j] - b[j]) > tol:
            return a[j] < b[j]
    return False


cdef inline double _sqdist(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0, t
    cdef Py_ssize_t j
    for j in range(n):
        t = a[j] - b[j]
        s += t * t
    return s


cdef inline void _zn_row(const double* x, double* out, Py_ssize_t n, double tol) noexcept nogil:
    cdef Py_ssize_t j
    cdef double r
    for j in range(n):
        r = ceil(x[j] - 0.5)
        if x[j] - r <= -0.5 + tol:
            r -= 1.0
        out[j] = r


cdef void _dn_row(const double* x, double* out, Py_ssize_t n, double tol) noexcept nogil:
    cdef double e[MAXDIM]
    cdef Py_ssize_t j, last_tie = -1, first_down = -1, last_up = -1
    cdef long parity = 0
    cdef double r, ej, amax = 0.0
    for j in range(n):
        r = ceil(x[j] - 0.5)
        ej = x[j] - r
        if ej <= -0.5 + tol:
            r -= 1.0
            ej += 1.0
        out[j] = r
        e[j] = ej
        parity += <long>r
        if ej >= 0.5 - tol:
            last_tie = j
        if fabs(ej) > amax:
            amax = fabs(ej)
    if (parity & 1) == 0:
        return
    if last_tie >= 0:
        out[last_tie] += 1.0
        return
    for j in range(n):
        if fabs(e[j]) >= amax - tol:
            if e[j] <= tol:
                if first_down < 0:
                    first_down = j
            else:
                last_up = j
    if first_down >= 0:
        out[first_down] -= 1.0
    else:
        out[last_up] += 1.0


cdef void _e8_row(const double* x, double* out, double tol) noexcept nogil:
    cdef double sh[8]
    cdef double y1[8]
    cdef Py_ssize_t j
    cdef double d0, d1
    _dn_row(x, out, 8, tol)
    for j in range(8):
        sh[j] = x[j] - 0.5
    _dn_row(sh, y1, 8, tol)
    for j in range(8):
        y1[j] += 0.5
    d0 = _sqdist(x, out, 8)
    d1 = _sqdist(x, y1, 8)
    if d1 < d0 - tol or (fabs(d1 - d0) <= tol and _lex_less(y1, out, 8, tol)):
        for j in range(8):
            out[j] = y1[j]


cdef void _bw16_row(const double* x, double* out, const double* cw, Py_ssize_t ncw,
                    double tol) noexcept nogil:
    cdef double z[16]
    cdef double y[16]
    cdef double d, bestd = INFINITY
    cdef Py_ssize_t w, j
    cdef bint first = True
    for w in range(ncw):
        for j in range(16):
            z[j] = (x[j] - cw[w * 16 + j]) * 0.5
        _dn_row(z, y, 16, tol * 0.25)
        for j in range(16):
            y[j] = cw[w * 16 + j] + 2.0 * y[j]
        d = _sqdist(x, y, 16)
        if first or d < bestd - tol or (fabs(d - bestd) <= tol and _lex_less(y, out, 16, tol)):
            bestd = d
            first = False
            for j in range(16):
                out[j] = y[j]


def zn_nearest(x, double tol):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty((xv.shape[0], xv.shape[1]))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            _zn_row(&xv[i, 0], &ov[i, 0], xv.shape[1], tol)
    return out


def dn_nearest(x, double tol):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    if xv.shape[1] > MAXDIM:
        raise ValueError("dimension above compiled limit")
    out = np.empty((xv.shape[0], xv.shape[1]))
    if xv.shape[1] == 0:
        return out
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            _dn_row(&xv[i, 0], &ov[i, 0], xv.shape[1], tol)
    return out


def e8_nearest(x, double tol):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty((xv.shape[0], 8))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            _e8_row(&xv[i, 0], &ov[i, 0], tol)
    return out


def bw16_nearest(x, codewords, double tol):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] cv = np.ascontiguousarray(codewords, dtype=np.float64)
    out = np.empty((xv.shape[0], 16))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            _bw16_row(&xv[i, 0], &ov[i, 0], &cv[0, 0], cv.shape[0], tol)
    return out


cdef struct SEState:
    Py_ssize_t n
    const double* r      # upper-triangular factor, row-major n x n
    const double* gen    # generator, row-major n x n
    const double* y      # rotated target
    double* z
    double* pt
    double* best_pt
    double best
    double tol
    bint found


cdef void _se_visit(Py_ssize_t k, double partial, SEState* st) noexcept nogil:
    cdef Py_ssize_t n = st.n, j, t = 0, i
    cdef double c = st.y[k], rkk = st.r[k * n + k], base, first, zk, dk, diff, s
    for j in range(k + 1, n):
        c -= st.r[k * n + j] * st.z[j]
    c /= rkk
    base = floor(c + 0.5)
    first = 1.0 if c >= base else -1.0
    while True:
        if t == 0:
            zk = base
        elif t & 1:
            zk = base + first * ((t + 1) // 2)
        else:
            zk = base - first * (t // 2)
        t += 1
        diff = rkk * (zk - c)
        dk = partial + diff * diff
        if dk > st.best + st.tol:
            return
        st.z[k] = zk
        if k > 0:
            _se_visit(k - 1, dk, st)
            continue
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += st.gen[i * n + j] * st.z[j]
            st.pt[i] = s
        if (not st.found) or dk < st.best - st.tol:
            st.best = dk
            st.found = True
            for i in range(n):
                st.best_pt[i] = st.pt[i]
        elif _lex_less(st.pt, st.best_pt, n, st.tol):
            if dk < st.best:
                st.best = dk
            for i in range(n):
                st.best_pt[i] = st.pt[i]


def sphere_nearest(x, gen, double tol):
    x = np.ascontiguousarray(x, dtype=np.float64)
    gen = np.ascontiguousarray(gen, dtype=np.float64)
    cdef Py_ssize_t n = gen.shape[0]
    q, r = np.linalg.qr(gen)
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    q = q * sgn
    r = np.ascontiguousarray((r.T * sgn).T)
    cdef const double[:, ::1] yv = np.ascontiguousarray(x @ q)
    cdef double[:, ::1] rv = r
    cdef const double[:, ::1] gv = gen
    out = np.empty_like(x)
    cdef double[:, ::1] ov = out
    cdef double* z = <double*>malloc(n * sizeof(double))
    cdef double* pt = <double*>malloc(n * sizeof(double))
    cdef SEState st
    cdef Py_ssize_t i
    st.n = n
    st.r = &rv[0, 0]
    st.gen = &gv[0, 0]
    st.z = z
    st.pt = pt
    st.tol = tol
    try:
        with nogil:
            for i in range(yv.shape[0]):
                st.y = &yv[i, 0]
                st.best_pt = &ov[i, 0]
                st.best = INFINITY
                st.found = False
                _se_visit(n - 1, 0.0, &st)
    finally:
        free(z)
        free(pt)
    return out


def sysenc(indptr, indices, data, c):
    cdef const long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t B = cv.shape[0], n = cv.shape[1], b, i, p
    x = np.zeros((B, n))
    k = np.zeros((B, n))
    cdef double[:, ::1] xv = x
    cdef double[:, ::1] kv = k
    cdef double s, hii, rs
    with nogil:
        for b in range(B):
            for i in range(n):
                s = 0.0
                hii = 0.0
                for p in range(ip[i], ip[i + 1]):
                    if ix[p] == i:
                        hii = dv[p]
                    else:
                        s += dv[p] * xv[b, ix[p]]
                rs = rint(s)
                kv[b, i] = -rs
                xv[b, i] = (cv[b, i] - (s - rs)) / hii
    return x, k


def forward_solve(indptr, indices, data, w):
    cdef const long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t B = wv.shape[0], n = wv.shape[1], b, i, p
    x = np.zeros((B, n))
    cdef double[:, ::1] xv = x
    cdef double s, hii
    with nogil:
        for b in range(B):
            for i in range(n):
                s = 0.0
                hii = 0.0
                for p in range(ip[i], ip[i + 1]):
                    if ix[p] == i:
                        hii = dv[p]
                    else:
                        s += dv[p] * xv[b, ix[p]]
                xv[b, i] = (wv[b, i] - s) / hii
    return x


cdef void _quant_row(int kind, const double* x, double* out, Py_ssize_t m,
                     const double* cw, Py_ssize_t ncw, double tol) noexcept nogil:
    if kind == 0:
        _zn_row(x, out, m, tol)
    elif kind == 1:
        _dn_row(x, out, m, tol)
    elif kind == 2:
        _e8_row(x, out, tol)
    else:
        _bw16_row(x, out, cw, ncw, tol)


def mixed_encode(indptr, indices, data, Py_ssize_t m, int kind, qscale, codewords, c, hd,
                 double tol):
    cdef const long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef const double[::1] qs = np.ascontiguousarray(qscale, dtype=np.float64)
    cw_arr = np.ascontiguousarray(codewords, dtype=np.float64).reshape(-1, 16) \
        if codewords is not None and len(codewords) else np.zeros((1, 16))
    cdef const double[:, ::1] cw = cw_arr
    cdef const double[:, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[:, ::1] hv = np.ascontiguousarray(hd, dtype=np.float64)
    cdef Py_ssize_t B = cv.shape[0], n = cv.shape[1], b, r, a, i, p
    if m > MAXDIM:
        raise ValueError("block dimension above compiled limit")
    xp = np.zeros((B, n))
    k = np.zeros((B, n))
    cdef double[:, ::1] xv = xp
    cdef double[:, ::1] kv = k
    cdef double v[MAXDIM]
    cdef double q[MAXDIM]
    cdef double hr[MAXDIM]
    cdef double s, t, sc
    with nogil:
        for b in range(B):
            for r in range(n // m):
                sc = qs[r]
                for a in range(m):
                    i = r * m + a
                    t = 0.0
                    for p in range(ip[i], ip[i + 1]):
                        if ix[p] == i:
                            hr[a] = dv[p]
                        else:
                            t += dv[p] * xv[b, ix[p]]
                    v[a] = cv[b, i] - hv[b, i] - t
                    q[a] = v[a] / sc
                _quant_row(kind, q, &kv[b, r * m], m, &cw[0, 0], cw.shape[0], tol)
                for a in range(m):
                    i = r * m + a
                    kv[b, i] = rint(sc * kv[b, i])
                    xv[b, i] = (v[a] - kv[b, i]) / hr[a]
    return xp, k


ctypedef fused num_t:
    double
    double complex


cdef void _loo(num_t[:, ::1] vals, num_t[:, ::1] out, const long* ptr, const long* order,
               Py_ssize_t groups, num_t* acc) noexcept nogil:
    cdef Py_ssize_t g, p, e, j, K = vals.shape[1]
    for g in range(groups):
        for j in range(K):
            acc[j] = 1.0
        for p in range(ptr[g], ptr[g + 1]):
            e = order[p]
            for j in range(K):
                out[e, j] = acc[j]
                acc[j] = acc[j] * vals[e, j]
        for j in range(K):
            acc[j] = 1.0
        for p in range(ptr[g + 1] - 1, ptr[g] - 1, -1):
            e = order[p]
            for j in range(K):
                out[e, j] = out[e, j] * acc[j]
                acc[j] = acc[j] * vals[e, j]


def loo_product(values, ptr, order):
    """Product over the other members of each edge's group (leave-one-out)."""
    vals = np.ascontiguousarray(values)
    cdef const long[::1] pv = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef const long[::1] ov = np.ascontiguousarray(order, dtype=np.int64)
    out = np.empty_like(vals)
    cdef Py_ssize_t K = vals.shape[1], groups = pv.shape[0] - 1
    cdef double* accd
    cdef double complex* accc
    cdef double[:, ::1] vd, od
    cdef double complex[:, ::1] vc, oc
    if vals.dtype == np.complex128:
        vc = vals
        oc = out
        accc = <double complex*>malloc(K * sizeof(double complex))
        with nogil:
            _loo(vc, oc, &pv[0], &ov[0], groups, accc)
        free(accc)
    else:
        vd = vals.astype(np.float64, copy=False)
        od = out
        accd = <double*>malloc(K * sizeof(double))
        with nogil:
            _loo(vd, od, &pv[0], &ov[0], groups, accd)
        free(accd)
    return out


KIND_ZN, KIND_DN, KIND_E8, KIND_BW16 = 0, 1, 2, 3
