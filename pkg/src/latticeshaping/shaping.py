"""Bijective maps between integer messages and Voronoi integers of a
low-dimensional shaping lattice, plus dither generation.

A shaping lattice is ``Theta @ Z^m`` with ``Theta`` lower-triangular and
``Theta[i, j] / Theta[j, j]`` integral.  Write ``R = Theta @ diag(1/theta_jj)``;
``R`` is an integer unit lower-triangular matrix, and for a scaling ``h``
the per-coordinate alphabet is ``h * theta_ii``.

All maps here work on integers:

* ``map_to_parallelepiped(b) = R @ b``
* ``voronoi_encode(b, d) = R @ b - Q_{h Lambda}(R @ b - h d)``
* ``voronoi_reverse(c) = (R^{-1} @ c) mod (h * theta_ii)``

The last line holds because every point of ``h Lambda`` equals
``R @ diag(h theta_jj) @ z`` for an integer ``z``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, CorruptionError, SpecificationError
from .lattices import (
    LatticeBasis,
    LatticeKind,
    NamedLattice,
    bw16_generator,
    e8_generator,
    quantize_nearest,
)

# Best fixed dither for the determinant-one E8, one entry per coordinate.
E8_BEST_DITHER = np.array([0.01535, 0.05002, 0.0831, 0.14786, 0.18069, 0.21463, 0.25040, 0.71103])

_INT_TOL = 1e-6


class DitherMode(str, enum.Enum):
    NONE = "none"
    RANDOM = "random"
    FIXED_BEST = "best"


def _is_integral(a: np.ndarray, tol: float = _INT_TOL) -> bool:
    return bool(np.all(np.abs(a - np.round(a)) <= tol))


@dataclass(frozen=True, eq=False)
class ShapingLatticeSpec:
    """Lower-triangular shaping generator with the quantizer for its lattice.

    ``scale`` is the constellation factor ``M`` for presets (1 otherwise).
    """

    theta: np.ndarray
    lattice: NamedLattice = field(default=None, repr=False)
    name: str = "custom"
    scale: float = 1.0

    def __post_init__(self):
        t = np.array(self.theta, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
            raise SpecificationError(f"theta must be square, got shape {t.shape}")
        if np.any(np.triu(t, 1) != 0):
            raise SpecificationError("theta must be lower-triangular")
        diag = np.diag(t)
        if np.any(diag <= 0):
            raise SpecificationError("theta needs a positive diagonal")
        ratio = t / diag[None, :]
        if not _is_integral(ratio):
            i, j = np.argwhere(np.abs(ratio - np.round(ratio)) > _INT_TOL)[0]
            raise SpecificationError(
                f"theta[{i},{j}] / theta[{j},{j}] = {ratio[i, j]:g} is not an integer"
            )
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)
        ratio_int = np.round(ratio).astype(np.int64)
        ratio_int.setflags(write=False)
        object.__setattr__(self, "_ratio", ratio_int)
        if self.lattice is None:
            object.__setattr__(self, "lattice", _lattice_for(t))
        elif self.lattice.dimension != t.shape[0]:
            raise SpecificationError("lattice dimension does not match theta")

    @property
    def m(self) -> int:
        return self.theta.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.theta)

    @property
    def unit_ratio(self) -> np.ndarray:
        """``Theta @ diag(1/theta_jj)`` as an int64 matrix with unit diagonal."""
        return self._ratio

    def alphabet(self, h: float = 1.0) -> np.ndarray:
        """Per-coordinate alphabet sizes ``h * theta_ii``; raises if not integral."""
        a = h * self.diagonal
        if not _is_integral(a) or np.any(np.round(a) < 1):
            raise SpecificationError(f"h * theta_ii must be positive integers for h={h:g}")
        return np.round(a).astype(np.int64)

    def rate(self, h: float = 1.0) -> float:
        """Bits per dimension carried by one block."""
        return float(np.mean(np.log2(self.alphabet(h))))

    def check_scaling(self, h_values) -> None:
        for h in np.unique(np.asarray(h_values, dtype=float)):
            self.alphabet(h)

    def scaled_lattice(self, h: float) -> NamedLattice:
        return self.lattice.scaled(h)


def _lattice_for(theta: np.ndarray) -> NamedLattice:
    m = theta.shape[0]
    d = np.diag(theta)
    if np.allclose(theta, d[0] * np.eye(m), atol=0):
        return NamedLattice(LatticeKind.INTEGER, float(d[0]), m)
    return NamedLattice(LatticeKind.GENERIC, 1.0, m, LatticeBasis(theta, lower_triangular=True))


def shaping_preset(name: str) -> ShapingLatticeSpec:
    """Resolve ``"hypercube:M[:m]"``, ``"E8:M"`` or ``"BW16:M"``.

    ``E8:M`` is ``M`` times the determinant-one E8 (rate ``log2 M``);
    ``BW16:M`` is ``M`` times the integer Barnes-Wall form (rate
    ``log2 M + 0.75``); ``hypercube:M`` is ``M * I_m`` with ``m = 8`` by default.
    """
    parts = name.strip().split(":")
    if len(parts) not in (2, 3):
        raise ArgumentError(f"unknown shaping preset {name!r}")
    family = parts[0].lower()
    try:
        M = float(parts[1])
        m = int(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise ArgumentError(f"bad number in shaping preset {name!r}") from exc
    if M <= 0:
        raise ArgumentError(f"shaping scale must be positive in {name!r}")
    if family == "hypercube":
        m = m or 8
        theta = M * np.eye(m)
        lat = NamedLattice(LatticeKind.INTEGER, M, m)
    elif family == "e8" and m in (None, 8):
        theta = M * e8_generator()
        lat = NamedLattice(LatticeKind.E8, M)
    elif family == "bw16" and m in (None, 16):
        theta = M * bw16_generator()
        lat = NamedLattice(LatticeKind.BW16, M)
    else:
        raise ArgumentError(f"unknown shaping preset {name!r}")
    return ShapingLatticeSpec(theta, lat, f"{parts[0]}:{parts[1]}", M)


def as_shaping_spec(theta) -> ShapingLatticeSpec:
    if isinstance(theta, ShapingLatticeSpec):
        return theta
    if isinstance(theta, str):
        return shaping_preset(theta)
    return ShapingLatticeSpec(np.asarray(theta, dtype=float))


def _as_int_batch(b, m: int, what: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(b)
    single = arr.ndim == 1
    arr2 = np.atleast_2d(arr)
    if arr2.ndim != 2 or arr2.shape[1] != m:
        raise ArgumentError(f"{what} must have length {m}, got shape {arr.shape}")
    if arr2.dtype.kind == "f":
        if not _is_integral(arr2, 0.0):
            raise ArgumentError(f"{what} must be integers")
    return arr2.astype(np.int64), single


def _check_alphabet(b: np.ndarray, alph: np.ndarray) -> None:
    bad = (b < 0) | (b >= alph[None, :])
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ArgumentError(f"message entry {b[row, col]} at position {col} outside [0, {alph[col] - 1}]")


def map_to_parallelepiped(b, h: float, theta) -> np.ndarray:
    """Integer point ``h Theta f`` with ``f_i = b_i / (h theta_ii)``."""
    spec = as_shaping_spec(theta)
    alph = spec.alphabet(h)
    b2, single = _as_int_batch(b, spec.m, "b")
    _check_alphabet(b2, alph)
    out = b2 @ spec.unit_ratio.T
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class DitherVector:
    """Dither ``d = Theta a`` with ``a_i in [0, theta_ii)``; one row per block."""

    d: np.ndarray
    mode: DitherMode


def make_dither(theta, mode="none", seed: int | None = None, blocks: int | None = None) -> DitherVector:
    """Dither for ``blocks`` blocks (a single m-vector when ``blocks`` is None).

    Random dithers are drawn block by block from ``seed``, so block ``r``
    is the same regardless of how many blocks are requested.
    """
    spec = as_shaping_spec(theta)
    mode = DitherMode(mode)
    count = 1 if blocks is None else int(blocks)
    if mode is DitherMode.NONE:
        d = np.zeros((count, spec.m))
    elif mode is DitherMode.FIXED_BEST:
        if spec.lattice.kind is not LatticeKind.E8:
            raise ArgumentError("the fixed best dither is defined for E8 shaping only")
        d = np.tile(spec.lattice.scale * E8_BEST_DITHER, (count, 1))
    else:
        if seed is None:
            raise ArgumentError("random dither needs a seed")
        ss = np.random.SeedSequence(seed)
        rows = []
        for child in ss.spawn(count):
            a = np.random.default_rng(child).random(spec.m) * spec.diagonal
            rows.append(spec.theta @ a)
        d = np.array(rows)
    return DitherVector(d[0] if blocks is None else d, mode)


def _dither_array(d, m: int, rows: int) -> np.ndarray:
    if d is None:
        return np.zeros((rows, m))
    if isinstance(d, DitherVector):
        d = d.d
    arr = np.atleast_2d(np.asarray(d, dtype=float))
    if arr.shape[1] != m or arr.shape[0] not in (1, rows):
        raise ArgumentError(f"dither shape {np.shape(d)} does not match {rows} blocks of length {m}")
    return np.broadcast_to(arr, (rows, m))


def voronoi_encode(b, h: float, theta, d=None) -> np.ndarray:
    """Voronoi integers ``c`` with ``c - h d`` in the Voronoi cell of ``h Lambda``."""
    spec = as_shaping_spec(theta)
    p = map_to_parallelepiped(b, h, spec)
    p2 = np.atleast_2d(p)
    dd = _dither_array(d, spec.m, p2.shape[0])
    target = p2 - h * dd
    k = quantize_nearest(target, spec.scaled_lattice(h))
    k_int = np.round(k)
    if not _is_integral(k):
        raise SpecificationError("shaping lattice point is not integral; check h * theta")
    c = p2 - k_int.astype(np.int64)
    return c[0] if np.ndim(p) == 1 else c


def voronoi_reverse(c, h: float, theta) -> np.ndarray:
    """Recover the message from undithered Voronoi integers (exact inverse of encode)."""
    spec = as_shaping_spec(theta)
    alph = spec.alphabet(h)
    arr = np.asarray(c)
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or not _is_integral(arr, _INT_TOL):
            raise CorruptionError("Voronoi integers are not integral")
        arr = np.round(arr)
    c2, single = _as_int_batch(arr, spec.m, "c")
    u = solve_unit_lower(spec.unit_ratio, c2)
    b = np.mod(u, alph[None, :])
    return b[0] if single else b


def solve_unit_lower(ratio: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Integer forward substitution for ``ratio @ u = c`` (rows of ``c`` are vectors)."""
    u = np.array(c, dtype=np.int64, copy=True)
    for i in range(1, ratio.shape[0]):
        u[:, i] -= u[:, :i] @ ratio[i, :i]
    return u
