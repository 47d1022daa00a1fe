"""The two end-to-end code constructions behind one interface.

``SystematicVoronoiCode``: Voronoi integers of the shaping lattice, block by
block, then systematic encoding into the coding lattice.

``MixedNestedCode``: block-recursive nested encoding (see :mod:`.mixed`).

Both map messages ``b`` (one integer per coordinate, alphabet
``h_r * theta_ii``) to transmit vectors ``x'`` and back.  The lattice point
behind ``x'`` has integer coordinates ``w = H x``; these are the symbols the
decoder actually estimates, and ``b`` is a block-wise relabelling of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import CodingLatticeSpec, as_coding_spec
from .errors import ArgumentError
from .ldlc import DecoderConfig, DecoderPrior, LdlcDecoder, flat_prior, map_prior_p2p
from .mixed import (
    block_alphabets,
    block_scales,
    lattice_offset,
    mixed_encode,
    reverse_blocks,
)
from .shaping import DitherMode, ShapingLatticeSpec, as_shaping_spec, make_dither, voronoi_encode, voronoi_reverse
from .sysenc import systematic_encode


@dataclass(frozen=True, eq=False)
class Decoded:
    b: np.ndarray
    w: np.ndarray
    failed: bool
    iterations: int


class _CodeBase:
    construction = ""

    def __init__(self, H, theta, dither="none", dither_seed: int | None = 0):
        self.H: CodingLatticeSpec = as_coding_spec(H)
        self.theta: ShapingLatticeSpec = as_shaping_spec(theta)
        m = self.theta.m
        self.scales = block_scales(self.H, m)
        self.theta.check_scaling(self.scales)
        self.alphabet = block_alphabets(self.H, self.theta)
        try:
            self.dither_mode = DitherMode(dither)
        except ValueError:
            raise ArgumentError(f"unknown dither mode {dither!r}; use none, random or best") from None
        nb = self.H.n // m
        dv = make_dither(self.theta, self.dither_mode, dither_seed, blocks=nb)
        self.dither_blocks = dv.d
        self.dither = dv.d.reshape(-1)
        self._decoders: dict = {}

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def m(self) -> int:
        return self.theta.m

    @property
    def rate(self) -> float:
        """Bits per dimension."""
        return float(np.mean(np.log2(self.alphabet)))

    def random_messages(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.integers(0, self.alphabet, size=(count, self.n))

    def decoder(self, config: DecoderConfig | None = None) -> LdlcDecoder:
        key = config or DecoderConfig()
        if key not in self._decoders:
            self._decoders[key] = LdlcDecoder(self.H, key)
        return self._decoders[key]

    def prior(self, y, r: float, sigma_z2: float, sigma_x2: float | None) -> DecoderPrior:
        """Gaussian prior of the lattice point given ``y = r x' + z``."""
        if sigma_x2 is None:
            base = flat_prior(y, r, sigma_z2)
        else:
            base = map_prior_p2p(y, r, sigma_x2, sigma_z2)
        return base.shifted(self.offset)

    def decode(self, y, r: float, sigma_z2: float, sigma_x2: float | None = None,
               config: DecoderConfig | None = None) -> Decoded:
        """Decode one received vector; ``sigma_x2=None`` selects the flat prior."""
        res = self.decoder(config).decode(self.prior(y, r, sigma_z2, sigma_x2))
        return Decoded(self._messages_from(res), res.w, res.failed, res.iterations)

    # subclass hooks
    offset: np.ndarray

    def encode(self, b) -> np.ndarray:
        return self.encode_with_integers(b)[0]

    def encode_with_integers(self, b) -> tuple[np.ndarray, np.ndarray]:
        """``(x', w)``: transmit vectors and the integer coordinates of their lattice points."""
        raise NotImplementedError

    def _messages_from(self, res) -> np.ndarray:
        raise NotImplementedError


class SystematicVoronoiCode(_CodeBase):
    construction = "systematic"

    def __init__(self, H, theta, dither="none", dither_seed: int | None = 0):
        super().__init__(H, theta, dither, dither_seed)
        # the lattice point is x = x' + d
        self.offset = self.dither.copy()

    def voronoi_integers(self, b) -> np.ndarray:
        b2 = np.atleast_2d(np.asarray(b))
        if b2.shape[1] != self.n:
            raise ArgumentError(f"message length {b2.shape[1]} differs from n={self.n}")
        B, m = b2.shape[0], self.m
        nb = self.n // m
        blocks = b2.reshape(B, nb, m)
        c = np.empty((B, nb, m), dtype=np.int64)
        for h in np.unique(self.scales):
            idx = np.flatnonzero(self.scales == h)
            sub = blocks[:, idx].reshape(-1, m)
            d = np.broadcast_to(self.dither_blocks[idx], (B, idx.size, m)).reshape(-1, m)
            c[:, idx] = voronoi_encode(sub, h, self.theta, d).reshape(B, idx.size, m)
        return c.reshape(B, self.n)

    def encode_with_integers(self, b) -> tuple[np.ndarray, np.ndarray]:
        """Transmit vectors ``x' = x - d``; the integers are ``w = c - k``."""
        single = np.ndim(b) == 1
        c = self.voronoi_integers(b)
        res = systematic_encode(c, self.H)
        xp = res.x - self.dither[None, :]
        w = c - res.k
        return (xp[0], w[0]) if single else (xp, w)

    def _messages_from(self, res) -> np.ndarray:
        m = self.m
        out = np.empty(self.n, dtype=np.int64)
        for r, h in enumerate(self.scales):
            sl = slice(r * m, (r + 1) * m)
            out[sl] = voronoi_reverse(res.c[sl], h, self.theta)
        return out


class MixedNestedCode(_CodeBase):
    construction = "mixed"

    def __init__(self, H, theta, dither="none", dither_seed: int | None = 0):
        super().__init__(H, theta, dither, dither_seed)
        # the lattice point is x' + H^{-1} Hbar d
        self.offset = lattice_offset(self.H, self.theta, self.dither_blocks)

    def encode_with_integers(self, b) -> tuple[np.ndarray, np.ndarray]:
        st = mixed_encode(b, self.H, self.theta, self.dither_blocks)
        return st.x_prime, st.c - st.k

    def _messages_from(self, res) -> np.ndarray:
        return reverse_blocks(res.w, self.H, self.theta)


def make_code(construction: str, H, theta, dither="none", dither_seed: int | None = 0) -> _CodeBase:
    kinds = {"systematic": SystematicVoronoiCode, "mixed": MixedNestedCode}
    try:
        cls = kinds[construction]
    except KeyError:
        raise ArgumentError(f"unknown construction {construction!r}; use one of {sorted(kinds)}") from None
    return cls(H, theta, dither, dither_seed)
