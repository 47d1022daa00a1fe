"""Lattice algebra: bases, named lattice families, nearest-point quantizers,
reduction modulo a lattice and Monte Carlo shaping metrics.

Conventions
-----------
A lattice is ``G @ Z^n`` where the columns of ``G`` are basis vectors.
Every named family has a lower-triangular generator whose columns satisfy
``G[i, j] / G[j, j] in Z``; the shaping module relies on that.

* ``IntegerZ``: ``Z^n``.
* ``DCheckerboard``: ``D_n``, integer vectors with even coordinate sum.
* ``E8``: ``D_8 U (D_8 + 1/2)``, determinant 1, covering radius 1.
* ``BW16``: the integer form ``RM(1,4) + 2 D_16`` of the Barnes-Wall
  lattice (a rotation-free copy of ``sqrt(2)`` times the unimodular-scaled
  one), determinant ``2**12``, covering radius ``sqrt(6)``.

``NamedLattice(kind, scale)`` is ``scale`` times the unit lattice above.

Quantizers return the closest lattice point; among equidistant points the
lexicographically smallest coordinate vector wins.  Distances within
``TOL`` are considered equal.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .errors import ArgumentError, SpecificationError

TOL = 1e-9


class LatticeKind(str, enum.Enum):
    INTEGER = "IntegerZ"
    CHECKERBOARD = "DCheckerboard"
    E8 = "E8"
    BW16 = "BW16"
    GENERIC = "Generic"


_FIXED_DIM = {LatticeKind.E8: 8, LatticeKind.BW16: 16}


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Generator matrix with columns as basis vectors."""

    generator: np.ndarray
    lower_triangular: bool = False

    def __post_init__(self):
        g = np.array(self.generator, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
            raise SpecificationError(f"generator must be a non-empty square matrix, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise SpecificationError("generator has non-finite entries")
        if self.lower_triangular and np.any(np.triu(g, 1) != 0):
            raise SpecificationError("generator flagged lower-triangular has entries above the diagonal")
        if abs(np.linalg.det(g)) <= 0:
            raise SpecificationError("generator is singular")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @property
    def dimension(self) -> int:
        return self.generator.shape[0]

    @property
    def parity_check(self) -> np.ndarray:
        return np.linalg.inv(self.generator)

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.generator)))


def dn_generator(n: int) -> np.ndarray:
    """Lower-triangular generator of ``D_n``: columns ``e_j + e_{j+1}`` then ``2 e_n``."""
    g = np.zeros((n, n))
    for j in range(n - 1):
        g[j, j] = 1.0
        g[j + 1, j] = 1.0
    g[n - 1, n - 1] = 2.0
    return g


def e8_generator() -> np.ndarray:
    """Lower-triangular generator of the determinant-one E8 (diagonal 1/2, 1 x6, 2)."""
    g = np.zeros((8, 8))
    g[:, 0] = 0.5
    for j in range(1, 7):
        g[j, j] = 1.0
        g[j + 1, j] = 1.0
    g[7, 7] = 2.0
    return g


@lru_cache(maxsize=1)
def reed_muller_codewords() -> np.ndarray:
    """All 32 codewords of the first-order Reed-Muller code RM(1,4), as 0/1 floats."""
    rows = _rm_rows()
    words = []
    for bits in itertools.product((0, 1), repeat=5):
        w = np.zeros(16, dtype=np.int64)
        for b, row in zip(bits, rows):
            if b:
                w ^= row
        words.append(w)
    out = np.array(words, dtype=float)
    out.setflags(write=False)
    return out


def _rm_rows() -> list[np.ndarray]:
    idx = np.arange(16)
    return [np.ones(16, dtype=np.int64)] + [((idx >> k) & 1).astype(np.int64) for k in range(4)]


@lru_cache(maxsize=1)
def _bw16_generator_cached() -> np.ndarray:
    # reduced row echelon form of RM(1,4) over GF(2); pivot columns take the
    # code rows, the rest are filled by 2 D_16 so the result stays triangular
    mat = np.array(_rm_rows()) % 2
    pivots: list[int] = []
    rank = 0
    for col in range(16):
        cand = [i for i in range(rank, 5) if mat[i, col]]
        if not cand:
            continue
        mat[[rank, cand[0]]] = mat[[cand[0], rank]]
        for i in range(5):
            if i != rank and mat[i, col]:
                mat[i] ^= mat[rank]
        pivots.append(col)
        rank += 1
        if rank == 5:
            break
    g = np.zeros((16, 16))
    for j in range(16):
        if j in pivots:
            g[:, j] = mat[pivots.index(j)]
        elif j < 15:
            g[j, j] = 2.0
            g[15, j] = 2.0
        else:
            g[15, 15] = 4.0
    g.setflags(write=False)
    return g


def bw16_generator() -> np.ndarray:
    """Lower-triangular generator of ``RM(1,4) + 2 D_16`` (determinant 2**12)."""
    return _bw16_generator_cached().copy()


@dataclass(frozen=True, eq=False)
class NamedLattice:
    """A scaled member of a lattice family.

    For ``kind == GENERIC`` pass ``basis``; ``scale`` multiplies it.
    """

    kind: LatticeKind
    scale: float = 1.0
    dimension: int | None = None
    basis: LatticeBasis | None = field(default=None, repr=False)

    def __post_init__(self):
        kind = LatticeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ArgumentError(f"scale must be positive, got {self.scale}")
        dim = self.dimension
        if kind in _FIXED_DIM:
            if dim is None:
                dim = _FIXED_DIM[kind]
            if dim != _FIXED_DIM[kind]:
                raise ArgumentError(f"{kind.value} has dimension {_FIXED_DIM[kind]}, got {dim}")
        elif kind is LatticeKind.GENERIC:
            if self.basis is None:
                raise ArgumentError("generic lattice needs a basis")
            if dim is None:
                dim = self.basis.dimension
            if dim != self.basis.dimension:
                raise ArgumentError("dimension does not match basis")
        elif dim is None or dim < 1:
            raise ArgumentError(f"{kind.value} needs a positive dimension")
        object.__setattr__(self, "dimension", int(dim))

    @property
    def unit_generator(self) -> np.ndarray:
        n = self.dimension
        if self.kind is LatticeKind.INTEGER:
            return np.eye(n)
        if self.kind is LatticeKind.CHECKERBOARD:
            return dn_generator(n) if n > 1 else np.array([[2.0]])
        if self.kind is LatticeKind.E8:
            return e8_generator()
        if self.kind is LatticeKind.BW16:
            return bw16_generator()
        return np.array(self.basis.generator)

    @property
    def generator(self) -> np.ndarray:
        return self.scale * self.unit_generator

    @property
    def volume(self) -> float:
        return float(abs(np.linalg.det(self.unit_generator))) * self.scale ** self.dimension

    @property
    def covering_radius(self) -> float | None:
        """Exact covering radius for the named families, ``None`` for generic bases."""
        n = self.dimension
        unit = {
            LatticeKind.INTEGER: np.sqrt(n) / 2,
            LatticeKind.CHECKERBOARD: max(1.0, np.sqrt(n) / 2) if n > 1 else 1.0,
            LatticeKind.E8: 1.0,
            LatticeKind.BW16: np.sqrt(6.0),
        }.get(self.kind)
        return None if unit is None else float(unit * self.scale)

    def scaled(self, factor: float) -> "NamedLattice":
        return NamedLattice(self.kind, self.scale * factor, self.dimension, self.basis)

    def contains(self, x, tol: float = 1e-7) -> np.ndarray:
        """Membership test via the integer coordinates ``G^{-1} x``."""
        x2, single = _as_batch(x, self.dimension)
        z = np.linalg.solve(self.generator, x2.T).T
        ok = np.all(np.abs(z - np.round(z)) <= tol, axis=1)
        return bool(ok[0]) if single else ok


def _as_batch(x, n: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr)
    if arr2.ndim != 2 or arr2.shape[1] != n:
        raise ArgumentError(f"expected vectors of dimension {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr2)):
        raise ArgumentError("input has non-finite entries")
    return np.ascontiguousarray(arr2), single


def _unit_quantize(z: np.ndarray, lattice: NamedLattice, tol: float) -> np.ndarray:
    kind = lattice.kind
    if kind is LatticeKind.INTEGER:
        return kernels.zn_nearest(z, tol)
    if kind is LatticeKind.CHECKERBOARD:
        if lattice.dimension == 1:
            return 2.0 * kernels.zn_nearest(z / 2.0, tol / 2.0)
        return kernels.dn_nearest(z, tol)
    if kind is LatticeKind.E8:
        return kernels.e8_nearest(z, tol)
    if kind is LatticeKind.BW16:
        return kernels.bw16_nearest(z, reed_muller_codewords(), tol)
    return kernels.sphere_nearest(z, lattice.unit_generator, tol)


def quantize_nearest(x, lattice: NamedLattice, tol: float = TOL) -> np.ndarray:
    """Closest point of ``lattice`` to each row of ``x`` (or to the vector ``x``)."""
    x2, single = _as_batch(x, lattice.dimension)
    s = lattice.scale
    out = s * _unit_quantize(x2 / s, lattice, tol / s)
    return out[0] if single else out


def quantize_scaled(x, lattice: NamedLattice, alpha: float, tol: float = TOL) -> np.ndarray:
    """Closest point of ``alpha * lattice``, computed as ``alpha * Q(x / alpha)``."""
    if alpha == 0 or not np.isfinite(alpha):
        raise ArgumentError("alpha must be a finite non-zero number")
    return alpha * quantize_nearest(np.asarray(x, dtype=float) / alpha, lattice, tol / abs(alpha))


def mod_lattice(x, lattice: NamedLattice, tol: float = TOL) -> np.ndarray:
    """Quantization error ``x - Q(x)``: the representative of ``x`` in the Voronoi cell."""
    x = np.asarray(x, dtype=float)
    return x - quantize_nearest(x, lattice, tol)


def brute_force_nearest(x, lattice: NamedLattice, tol: float = TOL) -> np.ndarray:
    """Reference quantizer: exhaustive enumeration over the integer basis coordinates.

    Works for any basis (it ignores family-specific structure), so it serves
    as the oracle for the fast decoders.
    """
    x2, single = _as_batch(x, lattice.dimension)
    s = lattice.scale
    out = s * kernels.sphere_nearest(x2 / s, lattice.unit_generator, tol / s)
    return out[0] if single else out


@dataclass(frozen=True)
class LatticeMetrics:
    volume: float
    second_moment: float
    nsm: float
    shaping_gain_db: float
    second_moment_stderr: float = 0.0
    shaping_gain_stderr_db: float = 0.0


def metrics_from_power(power: float, volume: float, dimension: int, power_stderr: float = 0.0) -> LatticeMetrics:
    """Build metrics from a measured per-dimension second moment."""
    nsm = power / volume ** (2.0 / dimension)
    gain = 10.0 * np.log10((1.0 / 12.0) / nsm)
    gain_se = 10.0 / np.log(10.0) * power_stderr / power if power > 0 else 0.0
    return LatticeMetrics(volume, power, nsm, float(gain), power_stderr, float(gain_se))


def estimate_metrics(lattice: NamedLattice, samples: int, seed: int = 0, batch: int = 200_000) -> LatticeMetrics:
    """Monte Carlo second moment of the Voronoi cell.

    Points uniform on the fundamental parallelepiped are folded into the
    Voronoi cell with :func:`mod_lattice`; the fold preserves uniformity.
    """
    if samples < 1:
        raise ArgumentError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    gen = lattice.generator
    n = lattice.dimension
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        u = rng.random((b, n)) @ gen.T
        e = mod_lattice(u, lattice)
        per = np.sum(e * e, axis=1) / n
        total += per.sum()
        total_sq += (per * per).sum()
        done += b
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return metrics_from_power(mean, lattice.volume, n, float(np.sqrt(var / samples)))
