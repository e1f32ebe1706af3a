import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roast.dct import basis, dct2, fix, idct2, round_half_away, tru
from roast.jpeg_io import CoefficientImage, PixelImage, QuantTable, build_qtable, decode_to_pixels
from roast.transform import (
    FULL_CHANNEL, QUANTIZATION_ONLY, AblationFlags, fix_quantize, quantize_round, recompress,
    restore_coefficients, rounding_survival_probability, transcode,
)

blocks = arrays(np.float64, (8, 8), elements=st.floats(-300, 300, allow_nan=False))


def test_flat_block_dct():
    d = dct2(np.full((8, 8), 8.0))
    assert d[0, 0] == pytest.approx(64)
    d[0, 0] = 0
    assert np.abs(d).max() < 1e-12


def test_dc_only_idct():
    c = np.zeros((8, 8))
    c[0, 0] = 64
    assert np.allclose(idct2(c), 8.0)
    assert not dct2(np.zeros((8, 8))).any()


def test_basis_is_scaled_cosine_product():
    u, v = 2, 5
    x = np.arange(8)
    cu, cv = (1 / np.sqrt(2) if u == 0 else 1), (1 / np.sqrt(2) if v == 0 else 1)
    ref = 0.25 * cu * cv * np.outer(np.cos((2 * x + 1) * u * np.pi / 16),
                                    np.cos((2 * x + 1) * v * np.pi / 16))
    assert np.allclose(basis(u, v), ref)


def test_scipy_orthonormal_dct_agrees():
    from scipy.fft import dctn

    b = np.random.default_rng(0).normal(0, 50, (8, 8))
    assert np.allclose(dct2(b), dctn(b, norm="ortho"))


@settings(max_examples=200, deadline=None)
@given(blocks)
def test_round_trip_and_parseval(b):
    d = dct2(b)
    assert np.abs(idct2(d) - b).max() < 1e-9
    assert np.sum(d**2) == pytest.approx(np.sum(b**2), rel=1e-6, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(blocks, blocks, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(x, y, a, b):
    assert np.allclose(dct2(a * x + b * y), a * dct2(x) + b * dct2(y), atol=1e-9)


def test_tru_examples():
    assert tru(130) == 127 and tru(-200) == -128 and tru(5) == 5


def test_quantize_round_ties_away():
    q = np.full((8, 8), 10)
    for dt, want in ((34, 3), (35, 4), (-35, -4)):
        assert quantize_round(np.full((8, 8), dt), q)[0, 0] == want


def test_fix_examples():
    assert fix(3.7) == 3 and fix(-3.7) == -3 and fix(4.0) == 4
    assert round_half_away(-2.5) == -3


@settings(max_examples=200, deadline=None)
@given(blocks, st.integers(1, 64))
def test_fix_never_grows(dt, q):
    assert np.all(np.abs(fix_quantize(dt, np.full((8, 8), q))) <= np.abs(dt / q) + 1e-12)


def _single(d, q):
    coeffs = np.zeros((1, 1, 8, 8), dtype=np.int32)
    coeffs[0, 0, 0, 1] = d
    steps = np.full((8, 8), q)
    return CoefficientImage(8, 8, coeffs, QuantTable(steps))


def test_requantization_arithmetic():
    out = transcode(_single(2, 10), QuantTable(np.full((8, 8), 7)), QUANTIZATION_ONLY)
    assert out.coeffs[0, 0, 0, 1] == 3


def test_identity_channel(camera_cover):
    out = transcode(camera_cover, camera_cover.qtable, QUANTIZATION_ONLY)
    assert out == camera_cover


def test_divisible_tables_quantization_only(camera_cover):
    fine = QuantTable(np.ones((8, 8), dtype=int))
    down = transcode(camera_cover, fine, QUANTIZATION_ONLY)
    back = transcode(down, camera_cover.qtable, QUANTIZATION_ONLY)
    assert back == camera_cover


def test_upward_exactness_grid():
    d = np.arange(-64, 65)
    for q in range(2, 33):
        for qp in range(1, q):
            restored = round_half_away(round_half_away(d * q / qp) * qp / q)
            assert np.array_equal(restored, d)


def test_truncation_dominates_on_overflowing_block():
    steps = build_qtable(65).steps
    s = np.full((8, 8), 100.0)
    s[2:5, 2:5] = 170
    s[6, :] = -150
    d = np.clip(round_half_away(dct2(s) / steps), -1024, 1023).astype(np.int32)
    img = CoefficientImage(8, 8, d[None, None], build_qtable(65))
    full = recompress(img, 65)
    no_trunc = recompress(img, 65, AblationFlags(False, True))
    mid = np.add.outer(np.arange(8), np.arange(8)) >= 3
    diff_full = np.abs(full.coeffs - img.coeffs)[0, 0][mid].sum()
    diff_nt = np.abs(no_trunc.coeffs - img.coeffs)[0, 0][mid].sum()
    assert diff_full > 0 and diff_nt < diff_full


def test_restore_flat_and_gray():
    img = restore_coefficients(PixelImage.from_array(np.full((16, 24), 128, np.uint8)), build_qtable(65))
    assert not img.coeffs.any()


def test_restore_pads_partial_blocks():
    px = np.random.default_rng(0).integers(0, 256, (13, 21)).astype(np.uint8)
    img = restore_coefficients(PixelImage.from_array(px), build_qtable(90))
    assert img.block_shape == (2, 3)
    assert (img.width, img.height) == (21, 13)


def test_restore_inverts_decode_without_overflow(corpus_images):
    """Blocks without overflow at QF-65 steps (all >= 3) survive decode + restore."""
    from roast.overflow import image_omega

    for img in corpus_images[:10]:
        clean = image_omega(img) == 0
        back = restore_coefficients(decode_to_pixels(img), img.qtable)
        assert np.array_equal(back.coeffs[clean], img.coeffs[clean])


def test_full_channel_same_table_identity_without_overflow(corpus_images):
    from roast.overflow import image_omega

    img = next(i for i in corpus_images if not image_omega(i).any())
    assert recompress(img, 65, FULL_CHANNEL) == img


@pytest.mark.parametrize("q,lo,hi", [(1, 0.911, 0.921), (2, 0.9985, 1.0), (3, 0.9999, 1.0)])
def test_rounding_survival(q, lo, hi):
    est = rounding_survival_probability(q, trials=50_000, seed=3)
    assert lo <= est.probability <= hi


def test_rounding_survival_validates():
    with pytest.raises(ValueError):
        rounding_survival_probability(0)
