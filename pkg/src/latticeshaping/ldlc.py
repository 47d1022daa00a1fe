"""Low-density lattice codes: parity-check construction, Gaussian priors for
the decoder, and a sampled-PDF message-passing decoder.

Decoder outline
---------------
Each variable keeps a density sampled on a uniform grid around its prior
mean.  A check row ``sum_j h_j x_j in Z`` sends variable ``k`` the density
of ``x_k`` implied by the other variables; by Poisson summation that is

    m(x) = 1 + 2 Re sum_{q>=1} prod_{j != k} phi_j(2 pi q h_j) exp(i 2 pi q h_k x)

where ``phi_j`` is the characteristic function of the incoming density.
Working with characteristic functions makes the periodic extension exact
(no truncated replica sum).  A Gaussian taper on ``q`` smooths the result
by a fraction of the grid step and bounds the number of terms.  Variables
multiply the check messages with their prior.  The schedule is flooding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from .coding import CodingLatticeSpec, as_coding_spec
from .errors import ArgumentError, ConstructionError, NumericalRegimeError
from .sysenc import systematic_round

__all__ = [
    "CodingLatticeSpec",
    "DecodeResult",
    "DecoderConfig",
    "DecoderPrior",
    "LdlcDecoder",
    "PdfMessage",
    "build_ldlc",
    "cf_prior",
    "decode",
    "flat_prior",
    "map_prior_p2p",
]


def build_ldlc(
    n: int,
    d: int,
    seed: int,
    diag_profile=None,
    block_size: int | None = None,
    warmup: int | None = None,
) -> CodingLatticeSpec:
    """Random sparse lower-triangular parity-check matrix.

    Row ``i`` gets up to ``d - 1`` off-diagonal entries ``+-1/sqrt(d)`` in
    columns ``< i`` (columns before its own block in the block variant),
    never pushing a column past ``d - 1`` off-diagonal entries.

    The first ``warmup`` rows ramp their off-diagonal count up linearly.
    Without the ramp every row grabs the lowest open columns and the matrix
    collapses into a narrow band, which decodes poorly.  Default warm-up is
    ``n // 16``.

    ``diag_profile`` is a scalar, one value per row, or one value per block.
    """
    n = int(n)
    d = int(d)
    if n < 1:
        raise ArgumentError("n must be positive")
    if d < 2:
        raise ArgumentError("degree must be at least 2")
    m = None if block_size is None else int(block_size)
    if m is not None and (m < 1 or n % m):
        raise ArgumentError(f"n={n} is not a multiple of block size {block_size}")
    reach = n - (m or 1)
    if d - 1 > reach:
        raise ConstructionError(f"degree {d} needs at least {d - 1} earlier columns; n={n} offers {reach}")
    diag = _diag_profile(diag_profile, n, m)
    S = max(n // 16, 0) if warmup is None else int(warmup)

    rng = np.random.default_rng(seed)
    col_deg = np.zeros(n, dtype=np.int64)
    rows, cols, vals = [], [], []
    scale = 1.0 / np.sqrt(d)
    for i in range(n):
        limit = i if m is None else (i // m) * m
        want = d - 1 if i >= S else ((d - 1) * i) // max(S, 1)
        if want and limit:
            avail = np.flatnonzero(col_deg[:limit] < d - 1)
            k = min(want, avail.size)
            if k:
                chosen = np.sort(rng.choice(avail, k, replace=False))
                col_deg[chosen] += 1
                rows.extend([i] * k)
                cols.extend(chosen.tolist())
                vals.extend((scale * rng.choice((-1.0, 1.0), k)).tolist())
        rows.append(i)
        cols.append(i)
        vals.append(diag[i])
    H = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return CodingLatticeSpec(H, degree=d, block_size=m)


def _diag_profile(profile, n: int, m: int | None) -> np.ndarray:
    if profile is None:
        return np.ones(n)
    p = np.atleast_1d(np.asarray(profile, dtype=float))
    if p.size == 1:
        out = np.full(n, p[0])
    elif p.size == n:
        out = p.copy()
    elif m is not None and p.size == n // m:
        out = np.repeat(p, m)
    else:
        raise ArgumentError(f"diag_profile has {p.size} entries; expected 1, n or n/m")
    if np.any(out == 0) or not np.all(np.isfinite(out)):
        raise ArgumentError("diagonal entries must be finite and non-zero")
    return out


@dataclass(frozen=True, eq=False)
class DecoderPrior:
    """Independent Gaussian prior per symbol."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        var = np.broadcast_to(np.asarray(self.variance, dtype=float), mean.shape).copy()
        if np.any(~(var > 0)):
            raise NumericalRegimeError("prior variance must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    def shifted(self, offset) -> "DecoderPrior":
        """Prior of ``x + offset`` (used to put known dither shifts back)."""
        return DecoderPrior(self.mean + np.asarray(offset, dtype=float), self.variance)


def map_prior_p2p(y, r: float, sigma_x2: float, sigma_z2: float) -> DecoderPrior:
    """Posterior of ``x ~ N(0, sigma_x2)`` given ``y = r x + z``, ``z ~ N(0, sigma_z2)``."""
    if sigma_x2 <= 0 or sigma_z2 <= 0:
        raise ArgumentError("variances must be positive")
    y = np.asarray(y, dtype=float)
    den = sigma_z2 + sigma_x2 * r * r
    return DecoderPrior(r * sigma_x2 * y / den, np.full(y.shape, sigma_x2 * sigma_z2 / den))


def flat_prior(y, r: float, sigma_z2: float) -> DecoderPrior:
    """Channel likelihood alone: ``x ~ N(y / r, sigma_z2 / r^2)``."""
    if r == 0 or sigma_z2 <= 0:
        raise ArgumentError("need r != 0 and sigma_z2 > 0")
    y = np.asarray(y, dtype=float)
    return DecoderPrior(y / r, np.full(y.shape, sigma_z2 / (r * r)))


def cf_prior(y, a, r, sigma_x2: float, sigma_z2: float) -> DecoderPrior:
    """Posterior of ``u = sum_l a_l x_l`` given ``y = sum_l r_l x_l + z``.

    Users send i.i.d. ``N(0, sigma_x2)`` symbols; ``(u, y)`` is jointly
    Gaussian, so the prior is the usual conditional Gaussian.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if a.shape != r.shape:
        raise ArgumentError("a and r need the same length")
    if not np.any(a):
        raise ArgumentError("coefficient vector must be non-zero")
    if sigma_x2 <= 0 or sigma_z2 <= 0:
        raise ArgumentError("variances must be positive")
    y = np.asarray(y, dtype=float)
    ra = float(r @ a)
    den = sigma_x2 * float(r @ r) + sigma_z2
    var = sigma_x2 * float(a @ a) - sigma_x2 ** 2 * ra * ra / den
    # cancellation floor: the exact value is sigma_x2 sigma_z2 |a|^2 / den when a || r
    if var <= 1e-12 * sigma_x2 * float(a @ a):
        raise NumericalRegimeError(
            f"conditional variance {var:g} is not positive; coefficients and SNR are inconsistent"
        )
    return DecoderPrior(sigma_x2 * ra * y / den, np.full(y.shape, var))


@dataclass(frozen=True, eq=False)
class PdfMessage:
    """Density sampled at ``origin + step * arange(len(weights))``."""

    origin: float
    step: float
    weights: np.ndarray

    @classmethod
    def gaussian(cls, mean: float, std: float, step: float, span: float = 6.0) -> "PdfMessage":
        half = int(np.ceil(span * std / step))
        origin = (np.round(mean / step) - half) * step
        grid = origin + step * np.arange(2 * half + 1)
        w = np.exp(-0.5 * ((grid - mean) / std) ** 2)
        return cls(float(origin), float(step), w / w.sum())

    @property
    def grid(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.weights.size)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def mean(self) -> float:
        return float(self.weights @ self.grid / self.mass)

    @property
    def variance(self) -> float:
        g = self.grid
        mu = self.mean
        return float(self.weights @ (g - mu) ** 2 / self.mass)


@dataclass(frozen=True)
class DecoderConfig:
    """Knobs of the sampled-PDF decoder.

    ``samples_per_sigma`` sets the grid step as a fraction of the prior
    standard deviation; ``span`` is the half-width of each variable's grid in
    standard deviations.  ``min_sigma`` floors the prior width so that
    near-noiseless inputs do not need absurdly fine grids.  Iteration stops
    when posterior means move less than ``tol`` or when the rounded integer
    estimate has been stable for ``stable_iterations`` rounds with residual
    below ``stable_residual`` (0 disables that rule).
    """

    iterations: int = 100
    samples_per_sigma: int = 8
    span: float = 6.0
    smoothing: float = 2.0
    taper_floor: float = 1e-12
    min_sigma: float = 0.02
    tol: float = 1e-6
    stable_iterations: int = 5
    stable_residual: float = 0.05
    failure_residual: float = 0.25
    trace: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ArgumentError("iterations must be >= 1")
        if self.samples_per_sigma < 2 or self.span <= 0 or self.smoothing < 0:
            raise ArgumentError("grid settings out of range")


@dataclass(frozen=True, eq=False)
class DecodeResult:
    """``x``: lattice point estimate; ``w = H x`` as integers; ``c``: rounded ``h_ii x_i``."""

    x: np.ndarray
    w: np.ndarray
    c: np.ndarray
    posterior_mean: np.ndarray
    failed: bool
    converged: bool
    iterations: int
    residual: float
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def trace_csv(self) -> str:
        lines = ["iteration,mean_posterior_variance"]
        lines += [f"{i + 1},{v:.12g}" for i, v in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


class LdlcDecoder:
    """Message-passing decoder bound to one parity-check matrix.

    Graph bookkeeping is computed once; phase tables are cached per grid.
    """

    def __init__(self, H, config: DecoderConfig | None = None):
        self.spec = as_coding_spec(H)
        self.config = config or DecoderConfig()
        coo = self.spec.H.tocoo()
        # edges grouped by coefficient value so each class is a contiguous slice
        hkey = np.round(coo.data, 12)
        order = np.lexsort((coo.col, coo.row, hkey))
        er = coo.row[order].astype(np.int64)
        ek = coo.col[order].astype(np.int64)
        eh = coo.data[order].astype(float)
        hk = hkey[order]
        n = self.spec.n
        rdeg = np.bincount(er, minlength=n)
        cdeg = np.bincount(ek, minlength=n)
        self._row_ptr = np.concatenate([[0], np.cumsum(rdeg)]).astype(np.int64)
        self._row_order = np.lexsort((ek, er)).astype(np.int64)
        self._col_ptr = np.concatenate([[0], np.cumsum(cdeg)]).astype(np.int64)
        self._col_order = np.lexsort((er, ek)).astype(np.int64)
        # one representative edge per variable, used to rebuild its posterior
        self._col_first = self._col_order[self._col_ptr[:-1]]
        self._er, self._ek, self._eh = er, ek, eh
        hv, starts = np.unique(hk, return_index=True)
        bounds = list(starts) + [er.size]
        self._hclasses = [(float(h), slice(int(bounds[u]), int(bounds[u + 1]))) for u, h in enumerate(hv)]
        # (grid key, tables) swapped as one object so threads never see a mixed pair
        self._cached = None

    def _grid_tables(self, step: float, npts: int):
        key = (step, npts)
        cached = self._cached
        if cached is not None and cached[0] == key:
            return cached[1]
        cfg = self.config
        st = cfg.smoothing * step
        amin = np.min(np.abs(self._eh))
        # taper exp(-(2 pi q h st)^2 / 2) drops below taper_floor here
        qcut = np.sqrt(-2.0 * np.log(cfg.taper_floor)) / (2 * np.pi * max(st, 1e-300))
        Q = max(1, int(np.ceil(qcut / amin)))
        q = np.arange(1, Q + 1, dtype=float)
        g = step * np.arange(npts)
        taper = np.exp(-0.5 * (2 * np.pi * np.outer(np.abs(self._eh), q) * st) ** 2)
        taper[taper < cfg.taper_floor] = 0.0
        # real forms of exp(i 2 pi q h g): analysis [cos | sin] (N x 2Q) and
        # synthesis [cos ; -sin] (2Q x N)
        analysis, synthesis = {}, {}
        for h, _ in self._hclasses:
            ang = 2 * np.pi * np.outer(g, q * h)
            analysis[h] = np.hstack([np.cos(ang), np.sin(ang)])
            synthesis[h] = np.ascontiguousarray(np.vstack([np.cos(ang).T, -np.sin(ang).T]))
        tables = (q, taper, analysis, synthesis)
        self._cached = (key, tables)
        return tables

    def decode(self, prior: DecoderPrior) -> DecodeResult:
        cfg = self.config
        spec = self.spec
        n = spec.n
        if prior.mean.shape != (n,):
            raise ArgumentError(f"prior has {prior.mean.size} symbols, code length is {n}")
        mu = prior.mean
        sig = np.sqrt(np.maximum(prior.variance, cfg.min_sigma ** 2))
        step = float(sig.min()) / cfg.samples_per_sigma
        half = int(np.ceil(cfg.span * sig.max() / step))
        npts = 2 * half + 1
        q, taper, analysis, synthesis = self._grid_tables(step, npts)
        Q = q.size
        er, ek, eh = self._er, self._ek, self._eh
        E = er.size

        origin = (np.round(mu / step) - half) * step
        X = origin[:, None] + step * np.arange(npts)[None, :]
        prior_pdf = np.exp(-0.5 * ((X - mu[:, None]) / sig[:, None]) ** 2)
        prior_pdf /= prior_pdf.sum(axis=1, keepdims=True)
        # each variable's grid starts at its own origin: phase factor per edge
        phase = {}
        for h, sel in self._hclasses:
            phase[h] = np.exp(2j * np.pi * np.outer(origin[ek[sel]] * h, q))

        v = prior_pdf[ek].copy()
        prev_mean = None
        prev_w = None
        stable = 0
        converged = False
        trace = []
        phi = np.empty((E, Q), dtype=complex)
        m = np.empty((E, npts))
        loo = kernels.loo_product
        first = self._col_first
        it = 0
        for it in range(1, cfg.iterations + 1):
            for h, sel in self._hclasses:
                cs_part = v[sel] @ analysis[h]
                phi[sel] = (cs_part[:, :Q] + 1j * cs_part[:, Q:]) * phase[h]
            coef = loo(phi, self._row_ptr, self._row_order) * taper
            for h, sel in self._hclasses:
                cc = coef[sel] * phase[h]
                m[sel] = 1.0 + 2.0 * (np.hstack([cc.real, cc.imag]) @ synthesis[h])
            np.maximum(m, 0.0, out=m)
            m /= m.max(axis=1, keepdims=True) + 1e-300

            others = loo(m, self._col_ptr, self._col_order)
            post = others[first] * m[first] * prior_pdf
            v = _normalize_rows(others * prior_pdf[ek], prior_pdf[ek])
            post = _normalize_rows(post, prior_pdf)
            mean = np.sum(post * X, axis=1)
            if cfg.trace:
                var = np.sum(post * (X - mean[:, None]) ** 2, axis=1)
                trace.append(float(var.mean()))
            if prev_mean is not None and np.max(np.abs(mean - prev_mean)) < cfg.tol:
                converged = True
                break
            prev_mean = mean
            if cfg.stable_iterations:
                hx = spec.multiply(mean)
                w_now = np.rint(hx)
                if prev_w is not None and np.array_equal(w_now, prev_w) \
                        and np.max(np.abs(hx - w_now)) < cfg.stable_residual:
                    stable += 1
                    if stable >= cfg.stable_iterations:
                        converged = True
                        break
                else:
                    stable = 0
                prev_w = w_now
        return self._finish(mean, converged, it, np.array(trace))

    def _finish(self, mean, converged, iterations, trace) -> DecodeResult:
        spec = self.spec
        hx = spec.multiply(mean)
        w = np.rint(hx)
        residual = float(np.max(np.abs(hx - w))) if hx.size else 0.0
        x = spec.solve(w)
        c = systematic_round(x, spec.diagonal)
        failed = (not converged) or residual > self.config.failure_residual
        return DecodeResult(x, w.astype(np.int64), c, mean, failed, converged, iterations, residual, trace)


def _normalize_rows(p: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    s = p.sum(axis=1, keepdims=True)
    ok = s[:, 0] > 0
    out = np.where(ok[:, None], p / np.where(s > 0, s, 1.0), fallback)
    return out


def decode(prior: DecoderPrior, H, config: DecoderConfig | None = None) -> DecodeResult:
    """One-shot decode; build an :class:`LdlcDecoder` to reuse graph tables."""
    return LdlcDecoder(H, config).decode(prior)
