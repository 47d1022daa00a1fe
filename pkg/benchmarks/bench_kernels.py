"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Prints one line per kernel with the best-of-N wall time for each backend
and the speedup.  Both backends are fed identical inputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from latticeshaping import _backend
from latticeshaping.lattices import TOL, e8_generator, reed_muller_codewords
from latticeshaping.ldlc import build_ldlc


def _best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(scale: float):
    rng = np.random.default_rng(0)
    rows = max(1, int(20_000 * scale))
    x8 = rng.uniform(-4, 4, size=(rows, 8))
    x16 = rng.uniform(-4, 4, size=(rows // 4, 16))
    cw = reed_muller_codewords()
    gen = e8_generator()
    xs = rng.uniform(-3, 3, size=(max(1, rows // 40), 8))

    spec = build_ldlc(1000, 7, seed=0)
    arrays = spec.csr_arrays
    c = rng.integers(-8, 9, size=(max(1, int(50 * scale)), 1000)).astype(float)

    mspec = build_ldlc(1008, 7, seed=0, block_size=16)
    mc = rng.integers(0, 16, size=(max(1, int(20 * scale)), 1008)).astype(float)
    hd = rng.uniform(0, 1, size=mc.shape)
    qscale = np.full(1008 // 16, 16.0)

    sizes = rng.integers(1, 8, size=max(1, int(7000 * scale)))
    ptr = np.concatenate([[0], np.cumsum(sizes)])
    order = rng.permutation(int(ptr[-1]))
    vals = rng.normal(size=(int(ptr[-1]), 64)) + 1j * rng.normal(size=(int(ptr[-1]), 64))

    return [
        ("e8_nearest", lambda k: k.e8_nearest(x8, TOL)),
        ("dn_nearest", lambda k: k.dn_nearest(x8, TOL)),
        ("bw16_nearest", lambda k: k.bw16_nearest(x16, cw, TOL)),
        ("sphere_nearest", lambda k: k.sphere_nearest(xs, gen, TOL)),
        ("sysenc", lambda k: k.sysenc(*arrays, c)),
        ("forward_solve", lambda k: k.forward_solve(*arrays, c)),
        ("mixed_encode", lambda k: k.mixed_encode(*mspec.csr_arrays, 16, 3, qscale, cw, mc, hd, TOL)),
        ("loo_product", lambda k: k.loo_product(vals, ptr, order)),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0, help="multiplies every problem size")
    args = parser.parse_args()
    py, cc = _backend.python_kernels, _backend.compiled_kernels
    if cc is None:
        print("compiled kernels are not built; only the fallback is available")
        return
    print(f"{'kernel':<16}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, call in _cases(args.scale):
        t_py = _best_time(lambda: call(py), args.repeat)
        t_cc = _best_time(lambda: call(cc), args.repeat)
        print(f"{name:<16}{1e3 * t_py:>14.2f}{1e3 * t_cc:>16.2f}{t_py / t_cc:>9.1f}x")


if __name__ == "__main__":
    main()
