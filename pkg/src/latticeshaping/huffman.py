"""Prefix codes that turn a bit stream into Gaussian-distributed integers.

The integers are drawn from a sampled Gaussian with rarely used values
dropped, and a Huffman code assigns variable-length bit strings to them.
Parsing source bits with the code yields integers whose empirical
distribution follows the code's dyadic approximation of the Gaussian.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, TruncationError


@dataclass(frozen=True, eq=False)
class HuffmanIntegerCode:
    support: tuple[int, ...]
    probabilities: np.ndarray
    table: dict[int, str]

    @property
    def lengths(self) -> np.ndarray:
        return np.array([len(self.table[z]) for z in self.support])

    @property
    def average_length(self) -> float:
        """Bits consumed per integer when parsing uniform source bits.

        Under uniform bits integer ``z`` occurs with probability
        ``2**-len(z)``, so this is the rate the code actually delivers.
        """
        return float(np.dot(self.dyadic_probabilities, self.lengths))

    @property
    def gaussian_average_length(self) -> float:
        """Expected codeword length under the truncated Gaussian weights."""
        return float(np.dot(self.probabilities, self.lengths))

    @property
    def kraft_sum(self) -> float:
        return float(np.sum(2.0 ** -self.lengths))

    @property
    def dyadic_probabilities(self) -> np.ndarray:
        """Probabilities induced by feeding the code uniform random bits."""
        return 2.0 ** -self.lengths

    def _decoder(self) -> dict[str, int]:
        return {v: k for k, v in self.table.items()}


def huffman_build(sigma2: float, p_min: float = 1e-6) -> HuffmanIntegerCode:
    """Huffman code for integers weighted by the ``N(0, sigma2)`` density.

    Integers whose unnormalised density falls below ``p_min`` are dropped.
    Weight ties are merged in order of the smaller support value, then by
    creation order, so the table is deterministic.
    """
    if not (sigma2 > 0 and np.isfinite(sigma2)):
        raise ArgumentError("sigma2 must be positive")
    if not 0 < p_min < 1:
        raise ArgumentError("p_min must lie in (0, 1)")
    peak = 1.0 / np.sqrt(2 * np.pi * sigma2)
    if peak < p_min:
        raise ArgumentError("no integer has density above p_min")
    zmax = int(np.floor(np.sqrt(2 * sigma2 * np.log(peak / p_min))))
    z = np.arange(-zmax, zmax + 1)
    w = peak * np.exp(-z.astype(float) ** 2 / (2 * sigma2))
    keep = w >= p_min
    z, w = z[keep], w[keep]
    if len(z) < 2:
        raise ArgumentError("support has a single integer; a prefix code needs at least two")
    probs = w / w.sum()

    counter = itertools.count()
    heap = [(p, int(v), next(counter), (int(v),)) for p, v in zip(probs, z)]
    heapq.heapify(heap)
    codes = {int(v): "" for v in z}
    while len(heap) > 1:
        p0, v0, _, leaves0 = heapq.heappop(heap)
        p1, v1, _, leaves1 = heapq.heappop(heap)
        for leaf in leaves0:
            codes[leaf] = "0" + codes[leaf]
        for leaf in leaves1:
            codes[leaf] = "1" + codes[leaf]
        heapq.heappush(heap, (p0 + p1, min(v0, v1), next(counter), leaves0 + leaves1))
    return HuffmanIntegerCode(tuple(int(v) for v in z), probs, codes)


def _bits_to_str(bits) -> str:
    if isinstance(bits, str):
        s = bits
    else:
        arr = np.asarray(bits).ravel()
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ArgumentError("bits must be 0/1")
        s = "".join("1" if v else "0" for v in arr.tolist())
    if s.strip("01"):
        raise ArgumentError("bit string may only contain '0' and '1'")
    return s


def huffman_bits_to_integers(bits, code: HuffmanIntegerCode) -> np.ndarray:
    """Parse the whole bit string into integers; a dangling suffix raises."""
    s = _bits_to_str(bits)
    dec = code._decoder()
    maxlen = max(len(c) for c in dec)
    out = []
    pos = 0
    n = len(s)
    while pos < n:
        for ln in range(1, maxlen + 1):
            sym = dec.get(s[pos:pos + ln])
            if sym is not None:
                out.append(sym)
                pos += ln
                break
        else:
            raise TruncationError(f"bits from position {pos} do not form a codeword")
    return np.array(out, dtype=np.int64)


def huffman_integers_to_bits(ints, code: HuffmanIntegerCode) -> np.ndarray:
    """Concatenate the codewords of ``ints``; returns a uint8 array of bits."""
    try:
        s = "".join(code.table[int(v)] for v in np.asarray(ints).ravel())
    except KeyError as exc:
        raise ArgumentError(f"integer {exc.args[0]} is outside the code support") from None
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def mixture_rate(components: list[tuple[float, int]], p_min: float = 1e-6) -> float:
    """Average bits per dimension when ``count`` coordinates use the code for ``sigma2``."""
    total = sum(c for _, c in components)
    if total <= 0:
        raise ArgumentError("mixture needs a positive number of coordinates")
    return sum(huffman_build(s2, p_min).average_length * c for s2, c in components) / total
