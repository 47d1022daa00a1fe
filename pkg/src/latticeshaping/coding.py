"""Sparse lower-triangular parity-check matrices of coding lattices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._backend import kernels
from .errors import ArgumentError, SpecificationError


@dataclass(frozen=True, eq=False)
class CodingLatticeSpec:
    """Coding lattice ``H^{-1} Z^n`` given by its parity-check matrix ``H``.

    ``block_size`` is set for the block-structured variant, whose diagonal
    blocks are ``h_r * I_m`` (no entries inside a diagonal block apart from
    the diagonal).
    """

    H: sp.csr_matrix
    degree: int | None = None
    block_size: int | None = None

    def __post_init__(self):
        H = self.H
        if not sp.issparse(H):
            H = np.asarray(H, dtype=float)
            if H.ndim != 2:
                raise SpecificationError("H must be a matrix")
        H = sp.csr_matrix(H, dtype=float)
        H.eliminate_zeros()
        H.sort_indices()
        n, n2 = H.shape
        if n != n2 or n == 0:
            raise SpecificationError(f"H must be square and non-empty, got {H.shape}")
        coo = H.tocoo()
        if np.any(coo.col > coo.row):
            raise SpecificationError("H must be lower-triangular")
        diag = H.diagonal()
        if np.any(diag == 0):
            raise ArgumentError(f"H has a zero diagonal entry at row {int(np.argmin(np.abs(diag)))}")
        if self.block_size is not None:
            m = int(self.block_size)
            if m < 1 or n % m:
                raise SpecificationError(f"n={n} is not a multiple of block size {m}")
            inside = (coo.row // m == coo.col // m) & (coo.row != coo.col)
            if inside.any():
                raise SpecificationError("diagonal blocks must be scaled identities")
            blocks = diag.reshape(-1, m)
            if np.any(blocks != blocks[:, :1]):
                raise SpecificationError("each diagonal block needs a single scale h_r")
            object.__setattr__(self, "block_size", m)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.H.diagonal()

    @property
    def block_scales(self) -> np.ndarray:
        """Per-block diagonal scale ``h_r`` (block variant only)."""
        if self.block_size is None:
            raise ArgumentError("coding lattice is not block-structured")
        return self.diagonal[:: self.block_size].copy()

    @property
    def volume(self) -> float:
        """Volume of the coding lattice, ``1 / |det H|``."""
        return float(1.0 / np.prod(np.abs(self.diagonal)))

    @property
    def csr_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        H = self.H
        return H.indptr.astype(np.int64), H.indices.astype(np.int64), H.data

    def multiply(self, x: np.ndarray) -> np.ndarray:
        """``H @ x`` for a vector or for each row of a batch."""
        x = np.asarray(x, dtype=float)
        return (self.H @ x.T).T if x.ndim == 2 else self.H @ x

    def solve(self, w: np.ndarray) -> np.ndarray:
        """``H^{-1} @ w`` by sparse forward substitution (rows of a batch are vectors)."""
        w = np.asarray(w, dtype=float)
        out = kernels.forward_solve(*self.csr_arrays, np.atleast_2d(w))
        return out if w.ndim == 2 else out[0]


def as_coding_spec(H) -> CodingLatticeSpec:
    return H if isinstance(H, CodingLatticeSpec) else CodingLatticeSpec(H)
