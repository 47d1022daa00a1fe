import numpy as np
import pytest

from latticeshaping.coding import CodingLatticeSpec
from latticeshaping.errors import ArgumentError, ConstructionError, NumericalRegimeError
from latticeshaping.ldlc import (
    DecoderConfig,
    DecoderPrior,
    LdlcDecoder,
    PdfMessage,
    build_ldlc,
    cf_prior,
    decode,
    flat_prior,
    map_prior_p2p,
)
from latticeshaping.sysenc import systematic_encode


def _gaussian_conditional(a, r, sx2, sz2, y):
    """Oracle: condition u = a.x on y = r.x + z via the joint covariance."""
    cov_uy = sx2 * float(a @ r)
    var_y = sx2 * float(r @ r) + sz2
    var_u = sx2 * float(a @ a)
    return cov_uy / var_y * y, var_u - cov_uy ** 2 / var_y


# ---------------------------------------------------------------- construction


def test_small_structure():
    spec = build_ldlc(8, 2, seed=0)
    H = spec.H.toarray()
    assert np.all(np.triu(H, 1) == 0) and np.all(np.diag(H) == 1)
    off = H - np.diag(np.diag(H))
    assert np.allclose(np.abs(off[off != 0]), 1 / np.sqrt(2))
    assert np.all((off != 0).sum(axis=1)[1:] == 1)
    assert np.all((off != 0).sum(axis=0) <= 1)
    assert spec.volume == pytest.approx(1.0)
    assert abs(np.linalg.det(H)) == pytest.approx(1.0)


def test_large_block_structure_mostly_full_degree():
    spec = build_ldlc(10_000, 7, seed=1, block_size=16)
    H = spec.H.tocoo()
    assert np.all(H.row // 16 > H.col // 16) or np.all((H.row // 16 > H.col // 16) | (H.row == H.col))
    row_deg = np.bincount(H.row, minlength=10_000)
    col_deg = np.bincount(H.col, minlength=10_000)
    assert np.mean(row_deg == 7) >= 0.9
    assert row_deg.max() <= 7 and col_deg.max() <= 7
    assert spec.block_size == 16 and np.all(spec.block_scales == 1)


def test_construction_is_deterministic_and_validated():
    a = build_ldlc(64, 5, seed=3).H
    b = build_ldlc(64, 5, seed=3).H
    assert (a != b).nnz == 0
    with pytest.raises(ConstructionError):
        build_ldlc(4, 7, seed=0)
    with pytest.raises(ConstructionError):
        build_ldlc(16, 10, seed=0, block_size=8)
    with pytest.raises(ArgumentError):
        build_ldlc(10, 3, seed=0, block_size=4)
    with pytest.raises(ArgumentError):
        build_ldlc(10, 1, seed=0)
    with pytest.raises(ArgumentError):
        build_ldlc(16, 3, seed=0, diag_profile=[1.0, 0.0])


def test_diag_profile_per_block():
    spec = build_ldlc(32, 3, seed=0, diag_profile=[1, 1, 0.5, 2], block_size=8)
    assert np.array_equal(spec.block_scales, [1, 1, 0.5, 2])
    assert spec.volume == pytest.approx(1.0)


# ---------------------------------------------------------------- priors


def test_p2p_prior_values_and_limits():
    p = map_prior_p2p(np.array([2.0]), 1.0, 10.0, 1.0)
    assert p.mean[0] == pytest.approx(20 / 11) and p.variance[0] == pytest.approx(10 / 11)
    big = map_prior_p2p(np.array([2.0]), 1.0, 10.0, 1e12)
    assert abs(big.mean[0]) < 1e-9 and big.variance[0] == pytest.approx(10.0)
    small = map_prior_p2p(np.array([2.0]), 1.0, 10.0, 1e-12)
    assert small.mean[0] == pytest.approx(2.0) and small.variance[0] < 1e-11
    f = flat_prior(np.array([4.2]), 2.1, 0.441)
    assert f.mean[0] == pytest.approx(2.0) and f.variance[0] == pytest.approx(0.1)


def test_cf_prior_against_conditioning_oracle():
    rng = np.random.default_rng(0)
    y = rng.normal(size=20)
    for a, r in [((21, 10), (2.1, 1.0)), ((1, 2), (0.3, 1.7)), ((3, -1, 2), (1.0, 0.5, 2.0))]:
        a, r = np.array(a, float), np.array(r, float)
        got = cf_prior(y, a, r, 7.0, 0.3)
        mean, var = _gaussian_conditional(a, r, 7.0, 0.3, y)
        assert np.allclose(got.mean, mean) and np.allclose(got.variance, var)


def test_cf_prior_reduces_to_p2p():
    y = np.linspace(-3, 3, 7)
    cf = cf_prior(y, [1], [1.0], 5.0, 0.2)
    p2p = map_prior_p2p(y, 1.0, 5.0, 0.2)
    assert np.allclose(cf.mean, p2p.mean, atol=1e-12) and np.allclose(cf.variance, p2p.variance, atol=1e-12)


def test_cf_prior_fixture_and_limits():
    sx2 = 49.5
    sz2 = sx2 / 10 ** (48.21 / 10)
    p = cf_prior(np.ones(3), [21, 10], [2.1, 1.0], sx2, sz2)
    assert np.all(np.isfinite(p.variance)) and np.all(p.variance > 0)
    far = cf_prior(np.ones(3), [21, 10], [2.1, 1.0], sx2, 1e14)
    assert np.allclose(far.mean, 0, atol=1e-9)
    assert far.variance[0] == pytest.approx(sx2 * (21 ** 2 + 10 ** 2), rel=1e-6)
    with pytest.raises(NumericalRegimeError):
        cf_prior(np.ones(3), [21, 10], [2.1, 1.0], sx2, 1e-30)
    with pytest.raises(ArgumentError):
        cf_prior(np.ones(3), [0, 0], [2.1, 1.0], sx2, 1.0)


def test_prior_requires_positive_variance():
    with pytest.raises(NumericalRegimeError):
        DecoderPrior(np.zeros(2), np.array([1.0, 0.0]))
    shifted = DecoderPrior(np.zeros(2), 1.0).shifted([1.0, 2.0])
    assert np.array_equal(shifted.mean, [1.0, 2.0])


# ---------------------------------------------------------------- messages


def test_pdf_message_gaussian_moments():
    msg = PdfMessage.gaussian(0.3, 0.2, 0.01)
    assert msg.mass == pytest.approx(1.0, abs=1e-9)
    assert msg.mean == pytest.approx(0.3, abs=1e-6)
    assert msg.variance == pytest.approx(0.04, rel=1e-3)
    g = msg.grid
    assert g[0] <= 0.3 - 6 * 0.2 + 0.01 and g[-1] >= 0.3 + 6 * 0.2 - 0.01


def test_decoder_config_validation():
    with pytest.raises(ArgumentError):
        DecoderConfig(iterations=0)
    with pytest.raises(ArgumentError):
        DecoderConfig(samples_per_sigma=1)


# ---------------------------------------------------------------- decoding


def test_single_variable_rounds_the_prior():
    H = CodingLatticeSpec(np.array([[1.0]]))
    res = decode(DecoderPrior(np.array([2.3]), np.array([0.01])), H)
    assert res.c[0] == 2 and res.w[0] == 2 and not res.failed


def test_noiseless_codewords_decode_exactly():
    spec = build_ldlc(100, 5, seed=2)
    dec = LdlcDecoder(spec)
    rng = np.random.default_rng(2)
    c = rng.integers(-8, 9, (1000, 100))
    x = systematic_encode(c, spec).x
    for i in range(1000):
        res = dec.decode(DecoderPrior(x[i], np.full(100, 1e-8)))
        assert np.array_equal(res.c, c[i]) and not res.failed


def test_noisy_decoding_well_above_threshold():
    spec = build_ldlc(100, 5, seed=4)
    dec = LdlcDecoder(spec)
    rng = np.random.default_rng(4)
    sigma = 0.08
    errors = symbols = 0
    for _ in range(1000):
        c = rng.integers(-8, 9, 100)
        x = systematic_encode(c, spec).x
        y = x + sigma * rng.standard_normal(100)
        res = dec.decode(flat_prior(y, 1.0, sigma ** 2))
        errors += int(np.count_nonzero(res.c != c))
        symbols += 100
    assert errors / symbols < 1e-3


def test_sign_symmetry_and_trace():
    spec = build_ldlc(200, 7, seed=5)
    dec = LdlcDecoder(spec, DecoderConfig(trace=True))
    rng = np.random.default_rng(5)
    c = rng.integers(-8, 9, 200)
    x = systematic_encode(c, spec).x
    z = 0.12 * rng.standard_normal(200)
    plus = dec.decode(flat_prior(x + z, 1.0, 0.0144))
    minus = dec.decode(flat_prior(-x - z, 1.0, 0.0144))
    assert np.array_equal(plus.w, -minus.w)
    assert np.allclose(plus.posterior_mean, -minus.posterior_mean, atol=1e-9)
    text = plus.trace_csv().splitlines()
    assert text[0] == "iteration,mean_posterior_variance" and len(text) == plus.iterations + 1


def test_prior_shape_mismatch():
    dec = LdlcDecoder(build_ldlc(16, 3, seed=0))
    with pytest.raises(ArgumentError):
        dec.decode(DecoderPrior(np.zeros(5), 1.0))


def test_hopeless_noise_is_flagged():
    spec = build_ldlc(200, 7, seed=6)
    dec = LdlcDecoder(spec, DecoderConfig(iterations=20))
    rng = np.random.default_rng(6)
    x = systematic_encode(rng.integers(-8, 9, 200), spec).x
    res = dec.decode(flat_prior(x + 0.6 * rng.standard_normal(200), 1.0, 0.36))
    assert res.failed
