"""Spatial overflow measurement and removal (Overall Scale, Specific Truncation)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dct import dct2, idct2
from .transform import fix_quantize

# Spatial values closer than this to the range boundary are float noise,
# not overflow (e.g. a flat block whose exact value is 127).
OVERFLOW_EPS = 1e-9

OS = "OS"
ST = "ST"


@dataclass(frozen=True)
class SuppressionParams:
    t1: int = 8
    t2: float = 0.0

    def __post_init__(self):
        if not 0 <= self.t1 <= 127:
            raise ValueError("T1 must lie in 0..127")
        if self.t2 < 0:
            raise ValueError("T2 must be nonnegative")


@dataclass(frozen=True)
class OverflowReport:
    omega: float
    positions: list = field(default_factory=list)
    excesses: list = field(default_factory=list)
    s_absmax: float = 0.0

    @property
    def count(self):
        return len(self.positions)


@dataclass(frozen=True)
class CoverPair:
    robust_cover: object
    reference_cover: object


def excess(spatial):
    """Per-position overflow ``delta``: |s|-127 above the range, |s|-128 below."""
    s = np.asarray(spatial, dtype=np.float64)
    over = np.where(s > 127 + OVERFLOW_EPS, s - 127, 0.0)
    under = np.where(s < -128 - OVERFLOW_EPS, -s - 128, 0.0)
    return over + under


def block_omega(coeffs, steps):
    """Omega for every block of a ``(..., 8, 8)`` coefficient array."""
    return excess(idct2(np.asarray(coeffs) * steps)).sum(axis=(-2, -1))


def image_omega(img):
    """Per-block Omega as a ``(block_rows, block_cols)`` array."""
    return block_omega(img.coeffs, img.qtable.steps)


def inspect_block(d, qtable):
    steps = qtable.steps if hasattr(qtable, "steps") else np.asarray(qtable)
    s = idct2(np.asarray(d) * steps)
    delta = excess(s)
    idx = np.argwhere(delta > 0)
    return OverflowReport(
        omega=float(delta.sum()),
        positions=[(int(i), int(j)) for i, j in idx],
        excesses=[float(delta[i, j]) for i, j in idx],
        s_absmax=float(np.abs(s).max()),
    )


def overall_scale_factor(spatial):
    """Scale that brings the largest-magnitude spatial value onto the boundary."""
    flat = np.asarray(spatial).reshape(-1)
    s = flat[np.argmax(np.abs(flat))]
    if s == 0:
        return 1.0
    return (127.0 if s > 0 else 128.0) / abs(s)


def overall_scale_block(d, qtable):
    """Scale an overflowing block as a whole and requantize with FIX."""
    steps = qtable.steps if hasattr(qtable, "steps") else np.asarray(qtable)
    d = np.asarray(d)
    unq = d * steps
    s = idct2(unq)
    if not excess(s).any():
        return d.astype(np.int32).copy()
    alpha = overall_scale_factor(s)
    return fix_quantize(alpha * unq, steps)


def truncation_targets(spatial, t1):
    """Out-of-range values replaced by 127-T1 / -128+T1; the rest untouched."""
    s = np.asarray(spatial, dtype=np.float64)
    out = np.where(s > 127 + OVERFLOW_EPS, 127.0 - t1, s)
    return np.where(s < -128 - OVERFLOW_EPS, -128.0 + t1, out)


def specific_truncate_block(d, qtable, t1):
    steps = qtable.steps if hasattr(qtable, "steps") else np.asarray(qtable)
    d = np.asarray(d)
    s = idct2(d * steps)
    if not excess(s).any():
        return d.astype(np.int32).copy()
    return fix_quantize(dct2(truncation_targets(s, t1)), steps)


def _suppress_blocks(coeffs, steps, method, t1):
    """Vectorized suppression of a stack of blocks ``(n, 8, 8)``."""
    unq = coeffs * steps
    s = idct2(unq)
    if method == OS:
        flat = s.reshape(len(s), 64)
        smax = flat[np.arange(len(s)), np.argmax(np.abs(flat), axis=1)]
        alpha = np.where(smax > 0, 127.0, 128.0) / np.abs(smax)
        return fix_quantize(alpha[:, None, None] * unq, steps)
    if method == ST:
        return fix_quantize(dct2(truncation_targets(s, t1)), steps)
    raise ValueError(f"unknown suppression method {method!r}")


def suppress_image(img, method, params=SuppressionParams()):
    """Suppress overflow in every block whose Omega exceeds the gate.

    OS processes any overflowing block; ST only blocks with Omega > T2.
    """
    omega = image_omega(img)
    threshold = 0.0 if method == OS else params.t2
    if math.isinf(threshold):
        return img
    mask = omega > threshold
    if not mask.any():
        return img
    coeffs = img.coeffs.copy()
    coeffs[mask] = _suppress_blocks(coeffs[mask], img.qtable.steps, method, params.t1)
    return img.with_coeffs(coeffs)


def build_cover_pair(img, params=SuppressionParams()):
    """Robust cover = one ST pass; reference cover = a second ST pass on it."""
    robust = suppress_image(img, ST, params)
    reference = suppress_image(robust, ST, params)
    return CoverPair(robust, reference)


def overflow_rows(img, image_id=""):
    """CSV-ready rows ``(image_id, block_index, omega, count)`` for overflowing blocks."""
    s = idct2(img.coeffs * img.qtable.steps)
    delta = excess(s)
    omega = delta.sum(axis=(-2, -1)).reshape(-1)
    count = np.count_nonzero(delta, axis=(-2, -1)).reshape(-1)
    return [(image_id, int(b), float(omega[b]), int(count[b]))
            for b in np.flatnonzero(omega > 0)]
