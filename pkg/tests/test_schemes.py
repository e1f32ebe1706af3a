import math

import numpy as np
import pytest

from roast.codes import StegoKey
from roast.costs import uerd_costs
from roast.jpeg_io import CoefficientImage, build_qtable, decode_jpeg, decode_to_pixels, encode_jpeg
from roast.overflow import OS, image_omega, suppress_image
from roast.schemes import (
    AC_MASK, DMAS, GMAS, MID_BAND_MASK, ROAST_OS, ROAST_ST, SCHEMES, CapacityError,
    SchemeParams, capacity, domain_indices, embed, extract, frame_message, gmas_embed,
    max_message_bytes, message_for_payload, rs_decode_bits, rs_encode_bits, used_domain,
)
from roast.transform import QUANTIZATION_ONLY, recompress, restore_coefficients, transcode

from conftest import synthetic_cover


def _key(scheme, seed=1):
    return StegoKey(seed=seed, scheme=scheme)


def test_mid_band_mask_count():
    pairs = [(u, v) for u in range(8) for v in range(8) if u + v in (7, 8, 9)]
    assert len(pairs) == 21 == MID_BAND_MASK.sum()
    assert all(MID_BAND_MASK[u, v] for u, v in pairs)
    assert AC_MASK.sum() == 63 and not AC_MASK[0, 0]


def test_params_validation():
    with pytest.raises(ValueError):
        SchemeParams("lsb")
    with pytest.raises(ValueError):
        SchemeParams(GMAS, payload=-0.1)
    assert SchemeParams(GMAS).domain_mask is MID_BAND_MASK
    assert SchemeParams(ROAST_ST).domain_mask is AC_MASK
    assert not SchemeParams(DMAS).ternary
    for bad in (0.0, -0.1, 0.3):
        with pytest.raises(ValueError):
            SchemeParams(ROAST_ST, min_rate=bad)


def test_framing():
    bits = frame_message(b"\x01\x02", 15)
    assert bits.size % 75 == 0
    assert int("".join(map(str, bits[:32])), 2) == 2
    coded, n = rs_encode_bits(bits, StegoKey(0, GMAS).rs)
    assert n == bits.size // 75 and coded.size == n * 155
    back, fails = rs_decode_bits(coded, n, StegoKey(0, GMAS).rs)
    assert fails == 0 and np.array_equal(back, bits)


def test_interleaving_spreads_burst():
    rs = StegoKey(0, GMAS).rs
    bits = np.random.default_rng(0).integers(0, 2, 75 * 4).astype(np.uint8)
    coded, n = rs_encode_bits(bits, rs)
    coded[:5 * 4 * 8] ^= 1  # 32 consecutive symbols wrong: 8 per codeword
    back, fails = rs_decode_bits(coded, n, rs)
    assert fails == 0 and np.array_equal(back, bits)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_round_trip_no_channel(scheme):
    cover = synthetic_cover(3)
    msg = message_for_payload(cover, 0.1, np.random.default_rng(0))
    res = embed(cover, msg, _key(scheme), SchemeParams(scheme, 0.1))
    assert len(msg) > 0
    assert extract(res.stego, res.key).message == msg
    assert extract(decode_to_pixels(res.stego), res.key).message == msg
    assert decode_jpeg(encode_jpeg(res.stego)) == res.stego


@pytest.mark.parametrize("scheme", SCHEMES)
def test_upward_requantization_exact(scheme):
    cover = synthetic_cover(4)
    msg = message_for_payload(cover, 0.2, np.random.default_rng(1))
    res = embed(cover, msg, _key(scheme, 5), SchemeParams(scheme, 0.2))
    for qf in (75, 90, 100):
        received = transcode(res.stego, build_qtable(qf), QUANTIZATION_ONLY)
        out = extract(received, res.key, QUANTIZATION_ONLY)
        assert out.message == msg and out.error_rate(msg) == 0


def test_payload_zero_on_clean_cover(corpus_images):
    clean = next(i for i in corpus_images if not image_omega(i).any())
    res = embed(clean, b"", _key(ROAST_OS), SchemeParams(ROAST_OS, 0.0))
    assert res.stego == res.robust_cover == clean
    assert extract(res.stego, res.key).message == b""


def test_account_uses_original_cover(corpus_images):
    img = corpus_images[0]
    msg = message_for_payload(img, 0.1, np.random.default_rng(0))
    res = embed(img, msg, _key(ROAST_ST), SchemeParams(ROAST_ST, 0.1))
    assert res.account.n_nzac == img.nzac() != res.robust_cover.nzac()
    assert res.account.relative == pytest.approx(8 * len(msg) / img.nzac())
    assert res.preprocessing_changes > 0


def test_st_t2_infinite_is_identity(corpus_images):
    img = corpus_images[0]
    params = SchemeParams(ROAST_ST, 0.1, t2=math.inf)
    msg = message_for_payload(img, 0.1, np.random.default_rng(2))
    res = embed(img, msg, _key(ROAST_ST), params)
    assert res.robust_cover == img and res.preprocessing_changes == 0
    assert extract(res.stego, res.key).message == msg


def test_stego_validity_and_domain(corpus_images):
    img = corpus_images[0]
    for scheme in SCHEMES:
        msg = message_for_payload(img, 0.1, np.random.default_rng(3))
        res = embed(img, msg, _key(scheme, 9), SchemeParams(scheme, 0.1))
        diff = res.stego.coeffs != res.robust_cover.coeffs
        mask = SchemeParams(scheme).domain_mask
        assert not diff[..., ~mask].any()
        assert np.abs(res.stego.coeffs.astype(int) - res.robust_cover.coeffs).max() <= 1
        assert decode_jpeg(encode_jpeg(res.stego)) == res.stego


def test_domain_stable_across_channel(camera_cover):
    received = recompress(camera_cover, 85)
    restored = restore_coefficients(decode_to_pixels(received), camera_cover.qtable)
    a = domain_indices(camera_cover, AC_MASK, 7)
    b = domain_indices(restored, AC_MASK, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, domain_indices(camera_cover, AC_MASK, 8))


def test_gmas_centre_unmoved():
    cover = synthetic_cover(6)
    key = _key(GMAS, 3).with_codewords(0)
    msg = message_for_payload(cover, 0.1, np.random.default_rng(4))
    res = gmas_embed(cover, msg, key, SchemeParams(GMAS, 0.1))
    again = gmas_embed(res.stego, msg, _key(GMAS, 3), SchemeParams(GMAS, 0.1))
    assert again.stego == res.stego and again.embedding_changes == 0


def test_gmas_lands_on_segment_centres():
    cover = synthetic_cover(7)
    steps = cover.qtable.steps
    r = np.random.default_rng(0)
    unq = cover.coeffs * steps + r.uniform(-0.45, 0.45, cover.coeffs.shape) * steps
    msg = message_for_payload(cover, 0.1, r)
    res = gmas_embed(cover, msg, _key(GMAS), SchemeParams(GMAS, 0.1), unquantized=unq)
    k = np.sign(unq / steps) * np.floor(np.abs(unq / steps) + 0.5)
    moved = res.stego.coeffs != k
    assert moved.any()
    assert np.all(np.abs(res.stego.coeffs[moved] - k[moved]) == 1)
    assert extract(res.stego, res.key).message == msg


def test_unsuppressed_errors_sit_in_overflow_blocks(corpus_images):
    img = corpus_images[0]
    restored = restore_coefficients(decode_to_pixels(recompress(img, 85)), img.qtable)
    changed = (restored.coeffs != img.coeffs).any(axis=(-2, -1))
    overflow = image_omega(img) > 0
    assert changed.any()
    assert (changed & overflow).sum() >= 0.9 * changed.sum()


def test_capacity_values():
    empty = CoefficientImage(0, 0, np.zeros((0, 0, 8, 8), np.int32), build_qtable(65))
    assert capacity(empty, SchemeParams(ROAST_ST)) == 0
    big = CoefficientImage(512, 512, np.zeros((64, 64, 8, 8), np.int32), build_qtable(65))
    # 4096 blocks: ternary rate 1 coded bit per element, RS(31,15) on 5-bit symbols
    assert capacity(big, SchemeParams(ROAST_ST)) == (4096 * 63 // 155) * 75 == 124800
    assert capacity(big, SchemeParams(GMAS)) == (4096 * 21 // 155) * 75
    assert capacity(big, SchemeParams(DMAS)) == (4096 * 21 // 2 // 155) * 75
    half = CoefficientImage(512, 256, np.zeros((32, 64, 8, 8), np.int32), build_qtable(65))
    c1, c2 = capacity(half, SchemeParams(ROAST_ST)), capacity(big, SchemeParams(ROAST_ST))
    assert 2 * c1 <= c2 <= 2 * c1 + 75


def test_capacity_error():
    cover = synthetic_cover(1, shape=(32, 32))
    limit = max_message_bytes(cover, SchemeParams(DMAS))
    msg = bytes(limit)
    embed(cover, msg, _key(DMAS), SchemeParams(DMAS))
    with pytest.raises(CapacityError):
        embed(cover, bytes(limit + 10), _key(DMAS), SchemeParams(DMAS))


def test_extract_best_effort_counts_failures(camera_cover):
    msg = message_for_payload(camera_cover, 0.1, np.random.default_rng(0))
    res = embed(camera_cover, msg, _key(GMAS), SchemeParams(GMAS, 0.1))
    noisy = res.stego.coeffs.copy()
    mid = noisy[..., MID_BAND_MASK]
    mid += np.random.default_rng(1).integers(-2, 3, mid.shape)
    noisy[..., MID_BAND_MASK] = mid
    out = extract(res.stego.with_coeffs(noisy), res.key)
    assert out.rs_failures > 0
    assert 0 < out.error_rate(msg) <= 1
    assert out.payload_bits.size >= 8 * len(msg)


def test_deterministic(camera_cover):
    msg = b"determinism"
    a = embed(camera_cover, msg, _key(ROAST_ST, 3), SchemeParams(ROAST_ST))
    b = embed(camera_cover, msg, _key(ROAST_ST, 3), SchemeParams(ROAST_ST))
    assert a.stego == b.stego and a.key == b.key


def test_os_and_st_suppress_before_embedding(corpus_images):
    img = corpus_images[0]
    res = embed(img, b"x" * 50, _key(ROAST_OS), SchemeParams(ROAST_OS))
    assert res.robust_cover == suppress_image(img, OS)
    assert uerd_costs(res.robust_cover).shape == img.coeffs.shape


def test_used_domain_prefix():
    assert used_domain(64512, 155, SchemeParams(ROAST_ST)) == 64512
    assert used_domain(64512, 155, SchemeParams(ROAST_ST, min_rate=0.1)) == 780
    assert used_domain(64512, 155, SchemeParams(DMAS, min_rate=0.1)) == 1550
    assert used_domain(500, 155, SchemeParams(ROAST_ST, min_rate=0.1)) == 500
    assert used_domain(64512, 0, SchemeParams(ROAST_ST, min_rate=0.1)) == 64512


def test_min_rate_confines_changes(camera_cover):
    params = SchemeParams(ROAST_ST, min_rate=0.1)
    res = embed(camera_cover, b"hello", _key(ROAST_ST, 2), params)
    assert res.domain_size == 780 and res.key.params["min_rate"] == 0.1
    prefix = domain_indices(res.robust_cover, AC_MASK, 2)[:780]
    changed = np.flatnonzero(res.stego.coeffs.reshape(-1) != res.robust_cover.coeffs.reshape(-1))
    assert changed.size > 0 and np.isin(changed, prefix).all()
    assert extract(res.stego, res.key).message == b"hello"


@pytest.mark.slow
@pytest.mark.parametrize("scheme", [ROAST_OS, ROAST_ST])
def test_short_message_survives_with_min_rate(corpus_images, scheme):
    for img in corpus_images[:10]:
        res = embed(img, b"hello", _key(scheme, 4), SchemeParams(scheme, min_rate=0.1))
        assert extract(recompress(res.stego, 85), res.key).message == b"hello"
