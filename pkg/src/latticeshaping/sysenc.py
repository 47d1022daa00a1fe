"""Systematic encoding into a lattice with lower-triangular parity-check matrix.

Row ``i`` fixes ``x_i`` so that ``h_ii x_i`` is within 1/2 of ``c_i``: with
``s = sum_{j<i} h_ij x_j`` we take ``k_i = -round(s)`` and
``x_i = (c_i - (s - round(s))) / h_ii``.  Halves round to even.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .coding import as_coding_spec
from .errors import ArgumentError


@dataclass(frozen=True, eq=False)
class SystematicResult:
    """Lattice point ``x`` with ``H x = c - k``; ``residual = h_ii x_i - c_i``."""

    x: np.ndarray
    k: np.ndarray
    residual: np.ndarray


def systematic_encode(c, H) -> SystematicResult:
    """Encode integer vector(s) ``c`` (length n, or a batch of rows)."""
    spec = as_coding_spec(H)
    arr = np.asarray(c, dtype=float)
    single = arr.ndim == 1
    c2 = np.atleast_2d(arr)
    if c2.ndim != 2 or c2.shape[1] != spec.n:
        raise ArgumentError(f"c must have length {spec.n}, got shape {arr.shape}")
    x, k = kernels.sysenc(*spec.csr_arrays, np.ascontiguousarray(c2))
    res = spec.diagonal[None, :] * x - c2
    k = k.astype(np.int64)
    if single:
        return SystematicResult(x[0], k[0], res[0])
    return SystematicResult(x, k, res)


def systematic_round(x_hat, h_diag) -> np.ndarray:
    """Integers ``round(h_ii * x_i)``, halves to even."""
    x_hat = np.asarray(x_hat, dtype=float)
    return np.rint(np.asarray(h_diag, dtype=float) * x_hat).astype(np.int64)
