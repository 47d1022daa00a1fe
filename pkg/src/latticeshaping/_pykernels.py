"""Pure NumPy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_kernels`` extension.  The two must agree; ``tests/test_backends.py``
checks that.  Arrays are float64, C-contiguous, one vector per row.

Tie rule used by all quantizers: among equidistant lattice points return
the lexicographically smallest one.  Distances, rounding remainders and
coordinates closer than ``tol`` count as equal.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _round_half_down(x: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    r = np.ceil(x - 0.5)
    e = x - r
    up = e <= -0.5 + tol
    r[up] -= 1.0
    e[up] += 1.0
    return r, e


def zn_nearest(x: np.ndarray, tol: float) -> np.ndarray:
    r, _ = _round_half_down(np.asarray(x, dtype=float), tol)
    return r


def dn_nearest(x: np.ndarray, tol: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    B, n = x.shape
    r, e = _round_half_down(x, tol)
    out = r.copy()
    if n == 0:
        return out
    idx = np.arange(n)
    rows = np.arange(B)
    odd = (np.sum(r, axis=1) % 2) != 0
    tie = e >= 0.5 - tol
    anytie = tie.any(axis=1)

    # odd parity with a tied coordinate: raising the last tie keeps the
    # distance and yields the lexicographically smallest even point
    sel = odd & anytie
    last_tie = np.where(tie, idx, -1).max(axis=1)
    out[rows[sel], last_tie[sel]] += 1.0

    sel = odd & ~anytie
    ae = np.abs(e)
    cand = ae >= ae.max(axis=1, keepdims=True) - tol
    down = cand & (e <= tol)
    first_down = np.where(down, idx, n).min(axis=1)
    last_up = np.where(cand & ~down, idx, -1).max(axis=1)
    has_down = first_down < n
    a = sel & has_down
    out[rows[a], first_down[a]] -= 1.0
    b = sel & ~has_down
    out[rows[b], last_up[b]] += 1.0
    return out


def lex_less(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """Row-wise ``a < b`` in lexicographic order, with coordinates equal within tol."""
    diff = np.abs(a - b) > tol
    first = diff.argmax(axis=1)
    rows = np.arange(a.shape[0])
    return diff.any(axis=1) & (a[rows, first] < b[rows, first])


def _pick(best, bestd, cand, d, tol):
    take = (d < bestd - tol) | ((np.abs(d - bestd) <= tol) & lex_less(cand, best, tol))
    best = np.where(take[:, None], cand, best)
    bestd = np.where(take, d, bestd)
    return best, bestd


def e8_nearest(x: np.ndarray, tol: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y0 = dn_nearest(x, tol)
    y1 = dn_nearest(x - 0.5, tol) + 0.5
    d0 = np.sum((x - y0) ** 2, axis=1)
    d1 = np.sum((x - y1) ** 2, axis=1)
    best, _ = _pick(y0, d0, y1, d1, tol)
    return best


def bw16_nearest(x: np.ndarray, codewords: np.ndarray, tol: float) -> np.ndarray:
    # integer form: union over RM(1,4) codewords c of c + 2 D16
    x = np.asarray(x, dtype=float)
    best = None
    bestd = None
    for c in np.asarray(codewords, dtype=float):
        y = c + 2.0 * dn_nearest((x - c) / 2.0, tol / 4.0)
        d = np.sum((x - y) ** 2, axis=1)
        if best is None:
            best, bestd = y, d
        else:
            best, bestd = _pick(best, bestd, y, d, tol)
    return best


def sphere_nearest(x: np.ndarray, gen: np.ndarray, tol: float) -> np.ndarray:
    """Exhaustive Schnorr-Euchner enumeration of the closest point of ``gen @ Z^n``."""
    x = np.asarray(x, dtype=float)
    gen = np.asarray(gen, dtype=float)
    n = gen.shape[0]
    q, r = np.linalg.qr(gen)
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    q = q * sgn
    r = (r.T * sgn).T
    out = np.empty_like(x)
    for row in range(x.shape[0]):
        out[row] = _sphere_one(x[row], q.T @ x[row], r, gen, n, tol)
    return out


def _sphere_one(xv, y, r, gen, n, tol):
    best = [np.inf, None]
    z = np.zeros(n)

    def visit(k, partial):
        c = (y[k] - r[k, k + 1:] @ z[k + 1:]) / r[k, k]
        # zig-zag order has non-decreasing |zk - c|, so the first miss ends the level
        for zk in _zigzag(np.round(c), c):
            dk = partial + (r[k, k] * (zk - c)) ** 2
            if dk > best[0] + tol:
                return
            z[k] = zk
            if k > 0:
                visit(k - 1, dk)
                continue
            pt = gen @ z
            if best[1] is None or dk < best[0] - tol:
                best[0], best[1] = dk, pt
            elif _lex_less_1d(pt, best[1], tol):
                best[0], best[1] = min(best[0], dk), pt

    visit(n - 1, 0.0)
    return best[1]


def _zigzag(base, c):
    yield base
    first = 1.0 if c >= base else -1.0
    k = 1
    while True:
        yield base + first * k
        yield base - first * k
        k += 1


def _lex_less_1d(a, b, tol):
    for u, v in zip(a, b):
        if abs(u - v) > tol:
            return u < v
    return False


def sysenc(indptr, indices, data, c):
    """Row-recursive systematic encoding for a batch of integer vectors.

    ``c`` has shape (B, n).  Returns ``(x, k)`` with ``H x = c - k``.
    """
    c = np.asarray(c, dtype=float)
    B, n = c.shape
    x = np.zeros((B, n))
    k = np.zeros((B, n))
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        off = cols != i
        hii = vals[~off][0]
        s = x[:, cols[off]] @ vals[off] if off.any() else np.zeros(B)
        rs = np.round(s)
        k[:, i] = -rs
        x[:, i] = (c[:, i] - (s - rs)) / hii
    return x, k


def forward_solve(indptr, indices, data, w):
    """Solve ``H x = w`` for each row of ``w`` (H lower-triangular in CSR)."""
    w = np.asarray(w, dtype=float)
    B, n = w.shape
    x = np.zeros((B, n))
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        off = cols != i
        s = x[:, cols[off]] @ vals[off] if off.any() else 0.0
        x[:, i] = (w[:, i] - s) / vals[~off][0]
    return x


def mixed_encode(indptr, indices, data, m, kind, qscale, codewords, c, hd, tol):
    """Block-recursive mixed nested encoder for the named lattice families.

    ``qscale[r]`` is the factor that maps the reference lattice onto
    ``h_r * Lambda_s``; ``hd`` holds the scaled dither ``h_r d``.
    Returns ``(xp, k)``.
    """
    c = np.asarray(c, dtype=float)
    hd = np.asarray(hd, dtype=float)
    B, n = c.shape
    xp = np.zeros((B, n))
    k = np.zeros((B, n))
    quant = _QUANT[kind]
    for r in range(n // m):
        lo_i = r * m
        t = np.zeros((B, m))
        hr = np.empty(m)
        for a in range(m):
            i = lo_i + a
            lo, hi = indptr[i], indptr[i + 1]
            cols = indices[lo:hi]
            vals = data[lo:hi]
            off = cols != i
            hr[a] = vals[~off][0]
            if off.any():
                t[:, a] = xp[:, cols[off]] @ vals[off]
        v = c[:, lo_i:lo_i + m] - hd[:, lo_i:lo_i + m] - t
        s = qscale[r]
        kr = np.round(s * quant(v / s, tol, codewords))
        k[:, lo_i:lo_i + m] = kr
        xp[:, lo_i:lo_i + m] = (v - kr) / hr
    return xp, k


def loo_product(values, ptr, order):
    """Product over the other members of each edge's group (leave-one-out).

    Group ``g`` consists of edges ``order[ptr[g]:ptr[g + 1]]``.
    """
    values = np.asarray(values)
    ptr = np.asarray(ptr)
    order = np.asarray(order)
    sizes = np.diff(ptr)
    G = sizes.size
    group = np.repeat(np.arange(G), sizes)
    slot = np.arange(order.size) - np.repeat(ptr[:-1], sizes)
    D = int(sizes.max()) if G else 0
    buf = np.ones((D + 2, G) + values.shape[1:], dtype=values.dtype)
    buf[slot + 1, group] = values[order]
    pre = np.cumprod(buf, axis=0)
    suf = np.cumprod(buf[::-1], axis=0)[::-1]
    out = np.empty_like(values)
    out[order] = pre[slot, group] * suf[slot + 2, group]
    return out


def _q_zn(x, tol, cw):
    return zn_nearest(x, tol)


def _q_dn(x, tol, cw):
    return dn_nearest(x, tol)


def _q_e8(x, tol, cw):
    return e8_nearest(x, tol)


def _q_bw16(x, tol, cw):
    return bw16_nearest(x, cw, tol)


# kind codes shared with the compiled kernels
KIND_ZN, KIND_DN, KIND_E8, KIND_BW16 = 0, 1, 2, 3
_QUANT = {KIND_ZN: _q_zn, KIND_DN: _q_dn, KIND_E8: _q_e8, KIND_BW16: _q_bw16}
