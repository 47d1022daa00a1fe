import itertools

import numpy as np
import pytest
from scipy import stats

from latticeshaping.errors import ArgumentError, CorruptionError, SpecificationError
from latticeshaping.lattices import LatticeKind, NamedLattice, estimate_metrics, mod_lattice, quantize_nearest
from latticeshaping.shaping import (
    E8_BEST_DITHER,
    DitherMode,
    ShapingLatticeSpec,
    make_dither,
    map_to_parallelepiped,
    shaping_preset,
    solve_unit_lower,
    voronoi_encode,
    voronoi_reverse,
)

E8_NSM = 929 / 12960


def _all_messages(alph):
    return np.array(list(itertools.product(*[range(a) for a in alph])))


def _random_dither(spec, rng, rows):
    a = rng.random((rows, spec.m)) * spec.diagonal
    return a @ spec.theta.T


# ---------------------------------------------------------------- spec and presets


def test_presets_and_rates():
    e8 = shaping_preset("E8:4")
    assert e8.lattice.kind is LatticeKind.E8 and e8.lattice.scale == 4
    assert e8.rate() == pytest.approx(2.0)
    assert np.prod(e8.alphabet()) == 4 ** 8
    bw = shaping_preset("BW16:16")
    assert bw.rate() == pytest.approx(4.75)
    cube = shaping_preset("hypercube:8:4")
    assert cube.m == 4 and np.all(cube.alphabet() == 8)
    assert shaping_preset("hypercube:6").m == 8


@pytest.mark.parametrize("name", ["E9:4", "E8", "E8:x", "E8:-2", "BW16:4:8", "cube:4"])
def test_bad_presets(name):
    with pytest.raises(ArgumentError):
        shaping_preset(name)


def test_theta_constraints_rejected():
    with pytest.raises(SpecificationError):
        ShapingLatticeSpec(np.array([[4.0, 0.0], [2.0, 4.0]]))
    with pytest.raises(SpecificationError):
        ShapingLatticeSpec(np.array([[4.0, 1.0], [0.0, 4.0]]))
    with pytest.raises(SpecificationError):
        ShapingLatticeSpec(np.array([[0.0, 0.0], [0.0, 4.0]]))


def test_alphabet_scaling_must_be_integral():
    e8 = shaping_preset("E8:4")
    assert np.array_equal(e8.alphabet(0.5), e8.alphabet() // 2)
    with pytest.raises(SpecificationError):
        shaping_preset("E8:2").alphabet(0.5)
    with pytest.raises(SpecificationError):
        e8.check_scaling([1.0, 0.3])


# ---------------------------------------------------------------- parallelepiped map


def test_map_to_parallelepiped_examples():
    theta = 4.0 * np.eye(2)
    assert np.array_equal(map_to_parallelepiped([0, 0], 1.0, theta), [0, 0])
    assert np.array_equal(map_to_parallelepiped([3, 2], 1.0, theta), [3, 2])
    with pytest.raises(ArgumentError):
        map_to_parallelepiped([4, 0], 1.0, theta)
    with pytest.raises(ArgumentError):
        map_to_parallelepiped([-1, 0], 1.0, theta)


def test_map_to_parallelepiped_equals_h_theta_f():
    spec = shaping_preset("E8:4")
    rng = np.random.default_rng(0)
    b = rng.integers(0, spec.alphabet(), size=(500, 8))
    f = b / spec.alphabet()[None, :]
    direct = f @ spec.theta.T
    assert np.allclose(map_to_parallelepiped(b, 1.0, spec), direct, atol=1e-9)
    # injective on the full alphabet of a small lattice
    small = shaping_preset("E8:2")
    allb = _all_messages(small.alphabet())
    p = map_to_parallelepiped(allb, 1.0, small)
    assert len({tuple(r) for r in p}) == len(allb)


# ---------------------------------------------------------------- dither


def test_dither_modes():
    e8 = shaping_preset("E8:1")
    assert np.array_equal(make_dither(e8, "none").d, np.zeros(8))
    assert np.allclose(make_dither(e8, DitherMode.FIXED_BEST).d, E8_BEST_DITHER)
    assert np.allclose(make_dither(shaping_preset("E8:4"), "best").d, 4 * E8_BEST_DITHER)
    with pytest.raises(ArgumentError):
        make_dither(shaping_preset("BW16:4"), "best")
    with pytest.raises(ArgumentError):
        make_dither(e8, "random", seed=None)


def test_random_dither_is_uniform_and_blockwise_deterministic():
    spec = shaping_preset("E8:4")
    d = make_dither(spec, "random", seed=3, blocks=100_000).d
    a = np.linalg.solve(spec.theta, d.T).T
    for i, top in enumerate(spec.diagonal):
        assert stats.kstest(a[:, i] / top, "uniform").pvalue > 1e-3
    again = make_dither(spec, "random", seed=3, blocks=10).d
    assert np.array_equal(again, d[:10])


# ---------------------------------------------------------------- Voronoi encode and reverse


def test_hypercube_voronoi_is_centered_residue():
    M = 6
    theta = M * np.eye(3)
    b = _all_messages([M] * 3)
    c = voronoi_encode(b, 1.0, theta)
    want = np.where(b > M // 2, b - M, b)
    assert np.array_equal(c, want)
    assert np.all((c > -M / 2) & (c <= M / 2))


def test_exhaustive_bijectivity_e8_m2():
    spec = shaping_preset("E8:2")
    b = _all_messages(spec.alphabet())
    assert len(b) == 2 ** 8
    c = voronoi_encode(b, 1.0, spec)
    assert len({tuple(r) for r in c}) == len(b)
    assert np.array_equal(voronoi_reverse(c, 1.0, spec), b)
    # every c lies in the Voronoi cell of 2 E8
    assert np.allclose(quantize_nearest(c.astype(float), spec.lattice), 0.0)


@pytest.mark.parametrize("name,h", [("E8:4", 1.0), ("E8:16", 0.5), ("BW16:4", 1.0), ("BW16:16", 2.0), ("hypercube:4", 1.0)])
def test_random_roundtrip_with_dither(name, h):
    spec = shaping_preset(name)
    rng = np.random.default_rng(1)
    alph = spec.alphabet(h)
    b = rng.integers(0, alph, size=(3000, spec.m))
    d = _random_dither(spec, rng, 3000)
    c = voronoi_encode(b, h, spec, d)
    assert c.dtype == np.int64
    assert np.array_equal(voronoi_reverse(c, h, spec), b)
    # c - h d in the Voronoi cell of h Lambda
    e = c - h * d
    assert np.allclose(mod_lattice(e, spec.scaled_lattice(h)), e, atol=1e-9)


def test_reverse_hand_example():
    theta = 4.0 * np.eye(2)
    assert np.array_equal(voronoi_reverse([-1, 2], 1.0, theta), [3, 2])
    b = _all_messages([4, 4])
    assert np.array_equal(voronoi_reverse(voronoi_encode(b, 1.0, theta), 1.0, theta), b)


def test_reverse_without_fold():
    spec = shaping_preset("E8:4")
    rng = np.random.default_rng(2)
    b = rng.integers(0, spec.alphabet(), size=(100, 8))
    assert np.array_equal(voronoi_reverse(map_to_parallelepiped(b, 1.0, spec), 1.0, spec), b)


def test_reverse_rejects_non_integers():
    spec = shaping_preset("E8:4")
    with pytest.raises(CorruptionError):
        voronoi_reverse(np.full(8, 0.5), 1.0, spec)
    with pytest.raises(CorruptionError):
        voronoi_reverse(np.full(8, np.nan), 1.0, spec)


def test_dithered_second_moment_matches_e8():
    spec = shaping_preset("E8:4")
    rng = np.random.default_rng(3)
    rows = 200_000
    b = rng.integers(0, spec.alphabet(), size=(rows, 8))
    d = _random_dither(spec, rng, rows)
    e = voronoi_encode(b, 1.0, spec, d) - d
    per = np.sum(e * e, axis=1) / 8
    nsm = per.mean() / spec.lattice.volume ** (2 / 8)
    se = per.std() / np.sqrt(rows) / spec.lattice.volume ** (2 / 8)
    assert abs(nsm - E8_NSM) < 4 * se


def test_fixed_message_with_random_dither_is_uniform_on_cell():
    spec = shaping_preset("E8:4")
    rng = np.random.default_rng(4)
    rows = 20_000
    b = np.tile(rng.integers(0, spec.alphabet()), (rows, 1))
    d = _random_dither(spec, rng, rows)
    e = voronoi_encode(b, 1.0, spec, d) - d
    # reference: independent uniform samples of the same cell
    u = rng.random((rows, 8)) @ spec.theta.T
    ref = mod_lattice(u, spec.lattice)
    for coord in (0, 3, 7):
        assert stats.ks_2samp(e[:, coord], ref[:, coord]).pvalue > 1e-3


def test_solve_unit_lower_inverts_ratio():
    spec = shaping_preset("BW16:1")
    rng = np.random.default_rng(5)
    u = rng.integers(-50, 50, size=(100, 16))
    assert np.array_equal(solve_unit_lower(spec.unit_ratio, u @ spec.unit_ratio.T), u)


def test_shaping_nsm_matches_lattice_metric():
    # the cell the shaping map folds into is the lattice Voronoi cell
    spec = shaping_preset("E8:4")
    m = estimate_metrics(spec.lattice, 100_000, seed=1)
    assert m.nsm == pytest.approx(E8_NSM, rel=0.02)
    assert NamedLattice(LatticeKind.E8, 4.0).volume == pytest.approx(4.0 ** 8)
