"""Embedding costs: UERD base costs and the asymmetric adjustments."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter

from .dct import dct2
from .jpeg_io import AC_MIN, COEF_MAX, decode_to_pixels

# Cost assigned where UERD's block energy vanishes; large but finite so that
# such coefficients are merely expensive, not forbidden.
WET_COST = 1e13
ENERGY_EPS = 1e-10
# Reference values within this distance of the coefficient count as equal.
REFERENCE_EPS = 1e-9

DEFAULT_LAMBDA = 0.5
DEFAULT_MU = 0.5


@dataclass(frozen=True, eq=False)
class CostMap:
    """Per-coefficient costs of a +1 / -1 change; ``inf`` marks wet elements."""

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        plus = np.asarray(self.plus, dtype=np.float64)
        minus = np.asarray(self.minus, dtype=np.float64)
        if plus.shape != minus.shape:
            raise ValueError("cost_plus and cost_minus differ in shape")
        if (plus < 0).any() or (minus < 0).any():
            raise ValueError("costs must be nonnegative")
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @classmethod
    def symmetric(cls, rho):
        return cls(rho, rho)

    def scaled(self, c):
        return CostMap(self.plus * c, self.minus * c)

    def dump(self, path):
        """Row-major float64 pairs ``(plus, minus)``."""
        pairs = np.stack([self.plus.reshape(-1), self.minus.reshape(-1)], axis=1)
        Path(path).write_bytes(pairs.astype("<f8").tobytes())

    @classmethod
    def load(cls, path, shape):
        pairs = np.frombuffer(Path(path).read_bytes(), dtype="<f8").reshape(-1, 2)
        return cls(pairs[:, 0].reshape(shape), pairs[:, 1].reshape(shape))


def block_energy(img):
    """UERD block energy: sum of |d| * q over the AC coefficients of each block."""
    weighted = np.abs(img.coeffs) * img.qtable.steps
    return weighted.sum(axis=(-2, -1)) - weighted[..., 0, 0]


def uerd_costs(img):
    """Symmetric UERD costs for every coefficient, shape ``(rows, cols, 8, 8)``.

    cost = q / (D_center + 0.25 * sum of the 8 neighbouring block energies),
    with the DC step replaced by the mean of its two nearest AC steps.
    """
    energy = block_energy(img).astype(np.float64)
    padded = np.pad(energy, 1, mode="edge")
    neighbours = (
        padded[:-2, :-2] + padded[:-2, 1:-1] + padded[:-2, 2:]
        + padded[1:-1, :-2] + padded[1:-1, 2:]
        + padded[2:, :-2] + padded[2:, 1:-1] + padded[2:, 2:]
    )
    denom = energy + 0.25 * neighbours
    steps = img.qtable.steps.astype(np.float64).copy()
    steps[0, 0] = 0.5 * (steps[0, 1] + steps[1, 0])
    with np.errstate(divide="ignore"):
        rho = steps[None, None] / denom[..., None, None]
    rho = np.where(denom[..., None, None] > ENERGY_EPS, rho, WET_COST)
    return np.minimum(rho, WET_COST)


base_costs = uerd_costs


def mean_filter(pixels):
    """3x3 averaging with replicated borders."""
    return uniform_filter(np.asarray(pixels, dtype=np.float64), size=3, mode="nearest")


def gmas_reference(img):
    """Deblocked reference: decoded pixels after 3x3 mean filtering, on the block grid."""
    px = decode_to_pixels(img).pixels.astype(np.float64)
    if img.width % 8 or img.height % 8:
        h, w = img.height, img.width
        px = np.pad(px[:h, :w], ((0, px.shape[0] - h), (0, px.shape[1] - w)), mode="edge")
    return mean_filter(px)


def reference_coefficients(reference_pixels, block_shape):
    """Unquantized block DCT of a reference pixel image."""
    rows, cols = block_shape
    blocks = reference_pixels.reshape(rows, 8, cols, 8).transpose(0, 2, 1, 3) - 128.0
    return dct2(blocks)


def _range_guard(coeffs, plus, minus):
    plus = np.where(coeffs >= COEF_MAX, np.inf, plus)
    minus = np.where(coeffs <= AC_MIN, np.inf, minus)
    return plus, minus


def gmas_asymmetric_costs(img, rho, lam=DEFAULT_LAMBDA, reference=None):
    """Cheaper changes toward the deblocked reference image.

    A +1 change costs ``lam * rho`` where the coefficient lies below the
    reference's quantized value, a -1 change where it lies above.
    """
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    if reference is None:
        reference = gmas_reference(img)
    dbar = reference_coefficients(reference, img.block_shape) / img.qtable.steps
    d = img.coeffs
    plus = np.where(d < dbar - REFERENCE_EPS, lam * rho, rho)
    minus = np.where(d > dbar + REFERENCE_EPS, lam * rho, rho)
    return CostMap(*_range_guard(d, plus, minus))


def generalized_dm_costs(unquantized, q, rho_plus, rho_minus):
    """Costs of moving an unquantized coefficient to the neighbouring segment centres.

    Returns ``(xi_plus, xi_minus, k)`` where ``k`` is the nearest centre index.
    """
    d = np.asarray(unquantized, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    k = np.sign(d / q) * np.floor(np.abs(d / q) + 0.5)
    h_plus = (k + 1) * q - d
    h_minus = d - (k - 1) * q
    return rho_plus / q * h_plus, rho_minus / q * h_minus, k.astype(np.int64)


def roast_asymmetric_costs(robust, reference, costs, mu=DEFAULT_MU):
    """Favour changes that move the robust cover toward the reference cover."""
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    if robust.coeffs.shape != reference.coeffs.shape:
        raise ValueError("robust and reference covers are not aligned")
    de, do = reference.coeffs, robust.coeffs
    plus = np.where(de > do, mu * costs.plus, costs.plus)
    minus = np.where(de < do, mu * costs.minus, costs.minus)
    return CostMap(plus, minus)


def wet_dc(costs):
    """Mark every DC coefficient as unmodifiable."""
    plus = costs.plus.copy()
    minus = costs.minus.copy()
    plus[..., 0, 0] = np.inf
    minus[..., 0, 0] = np.inf
    return CostMap(plus, minus)
