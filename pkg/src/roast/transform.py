"""Quantizers, the JPEG recompression channel and coefficient restoration."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dct import dct2, fix, idct2, round_half_away, tru
from .jpeg_io import CoefficientImage, PixelImage, build_qtable, clip_coefficients


@dataclass(frozen=True)
class AblationFlags:
    """Which lossy spatial stages the channel applies."""

    apply_truncation: bool = True
    apply_rounding: bool = True


FULL_CHANNEL = AblationFlags()
QUANTIZATION_ONLY = AblationFlags(False, False)


def _steps(q):
    return q.steps if hasattr(q, "steps") else np.asarray(q)


def quantize_round(dct_coeffs, qtable):
    """``[d / q]`` with ties away from zero, clamped to the JPEG range."""
    q = round_half_away(np.asarray(dct_coeffs, dtype=np.float64) / _steps(qtable))
    return clip_coefficients(q).astype(np.int32)


def fix_quantize(dct_coeffs, qtable):
    """``FIX(d / q)``: quantize toward zero so magnitudes never grow."""
    q = fix(np.asarray(dct_coeffs, dtype=np.float64) / _steps(qtable))
    return clip_coefficients(q).astype(np.int32)


def spatial_blocks(img):
    """Level-shifted spatial values ``IDCT(D x Q)`` for every block (no clamping)."""
    return idct2(img.coeffs * img.qtable.steps)


def channel_spatial(spatial, flags=FULL_CHANNEL):
    """Apply the decoder-side spatial stages (TRU, then rounding) as enabled."""
    s = spatial
    if flags.apply_truncation:
        s = tru(s)
    if flags.apply_rounding:
        s = round_half_away(s + 128.0) - 128.0
    return s


def transcode(img, qtable, flags=FULL_CHANNEL):
    """Decode ``img`` through the enabled spatial stages and requantize with ``qtable``."""
    s = channel_spatial(spatial_blocks(img), flags)
    return img.with_coeffs(quantize_round(dct2(s), qtable), qtable)


def recompress(img, target_qf, flags=FULL_CHANNEL):
    """Simulate channel recompression of ``img`` at quality ``target_qf``."""
    return transcode(img, build_qtable(target_qf), flags)


def restore_coefficients(pixels, q_embed):
    """Recover quantized coefficients from decoded pixels using the embedding table."""
    px = np.asarray(pixels.pixels, dtype=np.float64)
    rows, cols = (pixels.height + 7) // 8, (pixels.width + 7) // 8
    px = px[:rows * 8, :cols * 8]
    if px.shape != (rows * 8, cols * 8):
        px = np.pad(px, ((0, rows * 8 - px.shape[0]), (0, cols * 8 - px.shape[1])), mode="edge")
    blocks = px.reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3) - 128.0
    coeffs = quantize_round(dct2(blocks), q_embed)
    return CoefficientImage(pixels.width, pixels.height, coeffs, q_embed)


def restore_from_jpeg(img, q_embed, flags=FULL_CHANNEL):
    """Restoration straight from a received JPEG; ``flags`` ablate the receiver's own decode."""
    return transcode(img, q_embed, flags)


def encode_pixels(pixels, quality_factor):
    """Plain JPEG compression of a pixel image (used to prepare covers)."""
    if not isinstance(pixels, PixelImage):
        pixels = PixelImage.from_array(pixels)
    return restore_coefficients(pixels, build_qtable(quality_factor))


@dataclass(frozen=True)
class SurvivalEstimate:
    q: int
    probability: float
    stderr: float
    trials: int


def rounding_survival_probability(q, trials=1_000_000, seed=0, chunk=100_000):
    """Monte-Carlo estimate of ``P{[w/q] = 0}`` where ``W = DCT(E)``.

    ``E`` is an 8x8 block of i.i.d. uniform rounding errors on [-0.5, 0.5);
    every one of the 64 coefficients of each block counts as a sample.
    """
    if q < 1 or trials < 1:
        raise ValueError("q and trials must be positive")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        e = rng.random((n, 8, 8)) - 0.5
        w = dct2(e)
        hits += int(np.count_nonzero(round_half_away(w / q) == 0))
        done += n
    total = 64 * trials
    p = hits / total
    # Samples within a block are not independent; the per-block count is used
    # as the effective sample size for a conservative standard error.
    stderr = math.sqrt(max(p * (1 - p), 0.0) / trials)
    return SurvivalEstimate(q, p, stderr, trials)
