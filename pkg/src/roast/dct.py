"""8x8 block DCT-II / inverse with the JPEG (ITU T.81) normalization.

All functions accept arrays shaped ``(..., 8, 8)`` and transform the last
two axes, so whole block grids go through a single matmul.
"""
import numpy as np

N = 8

# Tie-break tolerance: float noise of the matrix transform is ~1e-13, so any
# quotient within this distance of a .5 boundary is treated as an exact tie.
TIE_EPS = 1e-9


def _dct_matrix():
    m = np.empty((N, N))
    for u in range(N):
        c = np.sqrt(0.5) if u == 0 else 1.0
        for i in range(N):
            m[u, i] = 0.5 * c * np.cos((2 * i + 1) * u * np.pi / 16)
    return m


DCT_MATRIX = _dct_matrix()
DCT_MATRIX.flags.writeable = False


def dct2(block):
    """Forward 2-D DCT of level-shifted spatial values."""
    b = np.asarray(block, dtype=np.float64)
    return DCT_MATRIX @ b @ DCT_MATRIX.T


def idct2(coeffs):
    """Inverse of :func:`dct2`."""
    c = np.asarray(coeffs, dtype=np.float64)
    return DCT_MATRIX.T @ c @ DCT_MATRIX


def basis(u, v):
    """Spatial block produced by a unit coefficient at frequency (u, v)."""
    c = np.zeros((N, N))
    c[u, v] = 1.0
    return idct2(c)


def round_half_away(x):
    """Nearest integer, ties away from zero (the ``[.]`` bracket)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5 + TIE_EPS)


def fix(x):
    """Round toward zero: floor for x >= 0, ceil otherwise."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + TIE_EPS)


def tru(x):
    """Clamp level-shifted spatial values to [-128, 127]."""
    return np.clip(x, -128.0, 127.0)
