"""Mixed nested lattice codes: a block lower-triangular coding lattice whose
codewords are folded block by block into the Voronoi cell of a
low-dimensional shaping lattice.

For block ``r`` with diagonal scale ``h_r`` and partial sum ``t^r`` over the
already emitted blocks, the encoder picks

    k^r = Q_{h_r Lambda}(c^r - h_r d^r - t^r)
    x'^r = (c^r - h_r d^r - t^r - k^r) / h_r

so that ``H x' = c - k - Hbar d``.  The partial sums act as a dither of
their own, which is why the shaping gain holds up without an explicit one.

Compute-and-forward relies on ``phi_inverse``: for any integer combination
``u`` of lattice points ``x' + H^{-1} Hbar d`` the integers ``H u`` reduce,
block by block, to the modulo sum of the messages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from .coding import CodingLatticeSpec, as_coding_spec
from .errors import ArgumentError, CorruptionError
from .lattices import TOL, LatticeKind, quantize_nearest, reed_muller_codewords
from .ldlc import DecoderConfig, DecoderPrior, LdlcDecoder, cf_prior, flat_prior, map_prior_p2p
from .shaping import ShapingLatticeSpec, as_shaping_spec, map_to_parallelepiped, solve_unit_lower

_KIND_CODE = {
    LatticeKind.INTEGER: 0,
    LatticeKind.CHECKERBOARD: 1,
    LatticeKind.E8: 2,
    LatticeKind.BW16: 3,
}


def block_alphabets(H: CodingLatticeSpec, theta: ShapingLatticeSpec) -> np.ndarray:
    """Alphabet size of every coordinate: ``h_r * theta_ii`` repeated per block."""
    hs = block_scales(H, theta.m)
    return np.concatenate([theta.alphabet(h) for h in hs])


def block_scales(H: CodingLatticeSpec, m: int) -> np.ndarray:
    """Diagonal scale of each length-``m`` block; the diagonal must be constant per block."""
    diag = H.diagonal
    if H.n % m:
        raise ArgumentError(f"code length {H.n} is not a multiple of the shaping dimension {m}")
    blocks = diag.reshape(-1, m)
    if np.any(blocks != blocks[:, :1]):
        raise ArgumentError("diagonal of H must be constant on every shaping block")
    return blocks[:, 0].copy()


def _check_block_code(H, theta) -> tuple[CodingLatticeSpec, ShapingLatticeSpec]:
    spec = as_coding_spec(H)
    th = as_shaping_spec(theta)
    if spec.block_size is None:
        raise ArgumentError("mixed nested codes need a block-structured parity-check matrix")
    if spec.block_size != th.m:
        raise ArgumentError(f"block size {spec.block_size} differs from shaping dimension {th.m}")
    th.check_scaling(spec.block_scales)
    return spec, th


def messages_to_integers(b, H: CodingLatticeSpec, theta: ShapingLatticeSpec) -> np.ndarray:
    """Blockwise ``map_to_parallelepiped``: integers ``c`` (rows are codewords)."""
    b2 = np.atleast_2d(np.asarray(b))
    m = theta.m
    hs = block_scales(H, m)
    if b2.shape[1] != H.n:
        raise ArgumentError(f"message length {b2.shape[1]} differs from n={H.n}")
    c = np.empty(b2.shape, dtype=np.int64)
    for r, h in enumerate(hs):
        c[:, r * m:(r + 1) * m] = map_to_parallelepiped(b2[:, r * m:(r + 1) * m], h, theta)
    return c


def reverse_blocks(w, H: CodingLatticeSpec, theta: ShapingLatticeSpec) -> np.ndarray:
    """``(R^{-1} w^r) mod alphabet`` per block; ``w`` must already be integral."""
    w2 = np.atleast_2d(np.asarray(w, dtype=np.int64))
    m = theta.m
    alph = block_alphabets(H, theta)
    out = np.empty_like(w2)
    ratio = theta.unit_ratio
    for r in range(H.n // m):
        sl = slice(r * m, (r + 1) * m)
        out[:, sl] = solve_unit_lower(ratio, w2[:, sl])
    out = np.mod(out, alph[None, :])
    return out[0] if np.ndim(w) == 1 else out


def dither_per_coordinate(d, n: int, m: int, rows: int = 1) -> np.ndarray:
    """Expand a per-block dither (``(n/m, m)`` or ``(m,)``) into a length-``n`` vector."""
    if d is None:
        return np.zeros(n)
    arr = np.asarray(getattr(d, "d", d), dtype=float)
    if arr.ndim == 1 and arr.size == m:
        return np.tile(arr, n // m)
    if arr.shape == (n // m, m):
        return arr.reshape(-1)
    if arr.shape == (n,):
        return arr.copy()
    raise ArgumentError(f"dither shape {arr.shape} does not fit n={n}, m={m}")


@dataclass(frozen=True, eq=False)
class MixedEncodeState:
    """Codeword ``x_prime`` plus the bookkeeping of the block recursion.

    ``t`` holds the partial sums from earlier blocks, ``k`` the fold
    integers and ``c`` the parallelepiped integers.
    """

    x_prime: np.ndarray
    k: np.ndarray
    c: np.ndarray
    t: np.ndarray


def mixed_encode(b, H, theta, d=None) -> MixedEncodeState:
    """Encode message(s) ``b`` (length n, or rows of a batch)."""
    spec, th = _check_block_code(H, theta)
    n, m = spec.n, th.m
    single = np.ndim(b) == 1
    c = messages_to_integers(b, spec, th)
    B = c.shape[0]
    hs = spec.block_scales
    dvec = dither_per_coordinate(d, n, m)
    hd = np.broadcast_to(np.repeat(hs, m) * dvec, (B, n))
    kind = th.lattice.kind
    if kind in _KIND_CODE:
        qscale = hs * th.lattice.scale
        cw = reed_muller_codewords() if kind is LatticeKind.BW16 else np.zeros((1, 16))
        xp, k = kernels.mixed_encode(
            *spec.csr_arrays, m, _KIND_CODE[kind], qscale, cw,
            np.ascontiguousarray(c, dtype=float), np.ascontiguousarray(hd), TOL,
        )
    else:
        xp, k = _mixed_encode_generic(spec, th, c.astype(float), hd)
    t = spec.multiply(xp) - spec.diagonal[None, :] * xp
    k = np.rint(k).astype(np.int64)
    if single:
        return MixedEncodeState(xp[0], k[0], c[0], t[0])
    return MixedEncodeState(xp, k, c, t)


def _mixed_encode_generic(spec, th, c, hd):
    n, m = spec.n, th.m
    B = c.shape[0]
    xp = np.zeros((B, n))
    k = np.zeros((B, n))
    offdiag = (spec.H - sp.diags(spec.diagonal)).tocsr()
    for r, h in enumerate(spec.block_scales):
        sl = slice(r * m, (r + 1) * m)
        t = (offdiag[sl] @ xp.T).T
        v = c[:, sl] - hd[:, sl] - t
        kr = np.rint(quantize_nearest(v, th.scaled_lattice(h)))
        k[:, sl] = kr
        xp[:, sl] = (v - kr) / h
    return xp, k


def lattice_offset(H, theta, d) -> np.ndarray:
    """``H^{-1} Hbar d``: shift from a transmitted codeword to its lattice point."""
    spec = as_coding_spec(H)
    th = as_shaping_spec(theta)
    dvec = dither_per_coordinate(d, spec.n, th.m)
    return spec.solve(spec.diagonal * dvec)


def phi_inverse(u, H, theta) -> np.ndarray:
    """Modulo-sum integers of an integer combination ``u`` of lattice points."""
    spec = as_coding_spec(H)
    th = as_shaping_spec(theta)
    hu = spec.multiply(np.asarray(u, dtype=float))
    w = np.rint(hu)
    if not np.all(np.isfinite(hu)) or np.max(np.abs(hu - w)) > 1e-6:
        raise CorruptionError("H u is not integral; u is not a lattice point")
    return reverse_blocks(w.astype(np.int64), spec, th)


def modulo_sum(messages, a, alphabet) -> np.ndarray:
    """``(sum_l a_l b_l) mod alphabet``, coordinate-wise."""
    msgs = np.asarray(messages, dtype=np.int64)
    coeffs = np.asarray(a, dtype=np.int64)
    return np.mod(np.tensordot(coeffs, msgs, axes=(0, 0)), np.asarray(alphabet, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class MixedDecodeResult:
    b: np.ndarray
    w: np.ndarray
    failed: bool
    iterations: int


def mixed_decode_p2p(
    y,
    H,
    theta,
    d=None,
    r: float = 1.0,
    sigma_z2: float = 1e-4,
    sigma_x2: float | None = None,
    config: DecoderConfig | None = None,
    decoder: LdlcDecoder | None = None,
) -> MixedDecodeResult:
    """Decode ``y = r x' + z``.  With ``sigma_x2`` set the shaped-power prior is used,
    otherwise the channel likelihood alone."""
    spec, th = _check_block_code(H, theta)
    y = np.asarray(y, dtype=float)
    if sigma_x2 is None:
        prior = flat_prior(y, r, sigma_z2)
    else:
        prior = map_prior_p2p(y, r, sigma_x2, sigma_z2)
    prior = prior.shifted(lattice_offset(spec, th, d))
    dec = decoder or LdlcDecoder(spec, config)
    res = dec.decode(prior)
    return MixedDecodeResult(reverse_blocks(res.w, spec, th), res.w, res.failed, res.iterations)


def cf_decode(
    y,
    H,
    theta,
    a,
    r,
    dithers,
    sigma_x2: float,
    sigma_z2: float,
    config: DecoderConfig | None = None,
    decoder: LdlcDecoder | None = None,
) -> MixedDecodeResult:
    """Recover ``sum_l a_l b_l`` (mod alphabet) from ``y = sum_l r_l x'_l + z``."""
    spec, th = _check_block_code(H, theta)
    a = np.atleast_1d(np.asarray(a, dtype=np.int64))
    if dithers is None:
        dithers = [None] * a.size
    if len(dithers) != a.size:
        raise ArgumentError("need one dither per user")
    offset = sum(int(al) * lattice_offset(spec, th, dl) for al, dl in zip(a, dithers))
    prior: DecoderPrior = cf_prior(y, a, r, sigma_x2, sigma_z2).shifted(offset)
    dec = decoder or LdlcDecoder(spec, config)
    res = dec.decode(prior)
    return MixedDecodeResult(reverse_blocks(res.w, spec, th), res.w, res.failed, res.iterations)
