"""Binary syndrome-trellis codes and the double-layered ternary embedder.

The parity-check matrix is banded: message bit ``b`` owns a run of
consecutive cover columns (widths differ by at most one so any ``n >= m``
is usable), and each column touches syndrome rows ``b .. b+h-1`` with a
key-derived h-bit pattern.  Embedding is a Viterbi search over the ``2^h``
partial-syndrome states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np


class EmbeddingError(Exception):
    """No stego vector with the required syndrome avoids the wet elements."""


@dataclass(frozen=True)
class StcKey:
    h: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.h <= 20:
            raise ValueError("constraint height h must lie in 2..20")

    def derive(self, tag):
        """Independent sub-key (e.g. one per ternary layer)."""
        state = np.random.SeedSequence([self.seed & (2**64 - 1), int(tag)]).generate_state(1, np.uint64)
        return StcKey(self.h, int(state[0]))


def _structure(n, m, key):
    """Per-column block index and masked h-bit pattern."""
    if m > n:
        raise EmbeddingError(f"message of {m} bits does not fit {n} cover elements")
    j = np.arange(n, dtype=np.int64)
    block = (j * m) // n
    starts = -(-np.arange(m, dtype=np.int64) * n // m)  # ceil(b*n/m)
    offset = j - starts[block]
    width = -(-n // m)
    rng = np.random.default_rng([key.seed & (2**64 - 1), key.h, width])
    table = rng.integers(0, 1 << key.h, size=width, dtype=np.int64)
    table |= 1 | (1 << (key.h - 1))
    patterns = table[offset]
    rows_left = m - block
    mask = np.where(rows_left >= key.h, (1 << key.h) - 1, (1 << np.minimum(rows_left, key.h)) - 1)
    return block, patterns & mask


def parity_check_matrix(n, m, key):
    """Dense ``m x n`` matrix H (for tests and small instances)."""
    block, patterns = _structure(n, m, key)
    H = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for i in range(key.h):
            if patterns[j] >> i & 1:
                H[block[j] + i, j] = 1
    return H


@numba.njit(cache=True)
def _viterbi(x, costs, msg, block, patterns, h):
    n = x.shape[0]
    ns = 1 << h
    nbytes = (ns + 7) // 8
    path = np.zeros((n, nbytes), dtype=np.uint8)
    cost = np.full(ns, np.inf)
    cost[0] = 0.0
    new = np.empty(ns)
    for j in range(n):
        p = patterns[j]
        c = costs[j]
        c0 = c if x[j] == 1 else 0.0
        c1 = c if x[j] == 0 else 0.0
        for s in range(ns):
            a = cost[s] + c0
            b = cost[s ^ p] + c1
            if b < a or (b == a and x[j] == 1):
                new[s] = b
                path[j, s >> 3] |= np.uint8(1 << (s & 7))
            else:
                new[s] = a
        cost, new = new, cost
        if j == n - 1 or block[j + 1] != block[j]:
            bit = msg[block[j]]
            half = ns >> 1
            for s in range(half):
                new[s] = cost[(s << 1) | bit]
            for s in range(half, ns):
                new[s] = np.inf
            cost, new = new, cost
    total = cost[0]
    y = np.zeros(n, dtype=np.uint8)
    if not np.isfinite(total):
        return y, total
    s = 0
    for j in range(n - 1, -1, -1):
        if j == n - 1 or block[j + 1] != block[j]:
            s = (s << 1) | msg[block[j]]
        if path[j, s >> 3] >> (s & 7) & 1:
            y[j] = 1
            s ^= patterns[j]
    return y, total


@numba.njit(cache=True)
def _syndrome(y, block, patterns, m, h):
    syn = np.zeros(m, dtype=np.uint8)
    for j in range(y.shape[0]):
        if y[j]:
            p = patterns[j]
            b = block[j]
            for i in range(h):
                if p >> i & 1:
                    syn[b + i] ^= 1
    return syn


def stc_embed(cover_bits, costs, msg_bits, key):
    """Minimum-cost ``y`` with ``H y = msg``; returns ``(stego_bits, total_cost)``."""
    x = np.ascontiguousarray(cover_bits, dtype=np.uint8)
    c = np.ascontiguousarray(costs, dtype=np.float64)
    msg = np.ascontiguousarray(msg_bits, dtype=np.uint8)
    if x.shape != c.shape:
        raise ValueError("cover and cost vectors differ in length")
    if (c < 0).any() or np.isnan(c).any():
        raise ValueError("costs must be nonnegative")
    if msg.size == 0:
        return x.copy(), 0.0
    block, patterns = _structure(x.size, msg.size, key)
    y, total = _viterbi(x, c, msg, block, patterns, key.h)
    if not math.isfinite(total):
        raise EmbeddingError("wet elements make the requested syndrome unreachable")
    return y, float(total)


def stc_extract(stego_bits, m, key):
    y = np.ascontiguousarray(stego_bits, dtype=np.uint8)
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    block, patterns = _structure(y.size, m, key)
    return _syndrome(y, block, patterns, m, key.h)


# --------------------------------------------------------------------------
# Ternary (+-1) embedding with two binary layers.
#
# Layer 1 carries the second-lowest bit plane. For any integer x exactly one
# of x-1, x+1 flips that bit: -1 when x is even, +1 when x is odd. Layer 2
# then carries the LSB plane; an element untouched by layer 1 can flip its
# LSB, without disturbing layer 1, only by moving the opposite way. Elements
# already changed by layer 1 are wet in layer 2.

def _bit2(v):
    return (np.floor_divide(v, 2) % 2).astype(np.uint8)


def _lsb(v):
    return (np.asarray(v) % 2).astype(np.uint8)


def layer_split(n_bits):
    m1 = (n_bits + 1) // 2
    return m1, n_bits - m1


def ternary_embed(cover, cost_plus, cost_minus, msg_bits, key):
    """+-1 embedding of ``msg_bits`` into an integer vector; returns the stego vector."""
    x = np.asarray(cover, dtype=np.int64)
    plus = np.asarray(cost_plus, dtype=np.float64)
    minus = np.asarray(cost_minus, dtype=np.float64)
    msg = np.asarray(msg_bits, dtype=np.uint8)
    m1, m2 = layer_split(msg.size)
    toggle = np.where(x % 2 == 0, -1, 1)  # direction that flips the second bit
    cost_toggle = np.where(toggle > 0, plus, minus)
    cost_lsb = np.where(toggle > 0, minus, plus)

    b2 = _bit2(x)
    z, _ = stc_embed(b2, cost_toggle, msg[:m1], key.derive(1))
    moved = z != b2
    y = x + np.where(moved, toggle, 0)

    lsb = _lsb(y)
    z2, _ = stc_embed(lsb, np.where(moved, np.inf, cost_lsb), msg[m1:], key.derive(2))
    y = y - np.where(z2 != lsb, toggle, 0)
    return y


def ternary_extract(stego, n_bits, key):
    y = np.asarray(stego, dtype=np.int64)
    m1, m2 = layer_split(n_bits)
    first = stc_extract(_bit2(y), m1, key.derive(1))
    second = stc_extract(_lsb(y), m2, key.derive(2))
    return np.concatenate([first, second])


def ternary_cost(cover, stego, cost_plus, cost_minus):
    d = np.asarray(stego) - np.asarray(cover)
    if np.abs(d).max(initial=0) > 1:
        raise ValueError("not a +-1 change pattern")
    return float(np.where(d > 0, cost_plus, 0).sum() + np.where(d < 0, cost_minus, 0).sum())


def binary_embed(cover, cost_plus, cost_minus, msg_bits, key, tie_direction=None):
    """Single-layer LSB embedding; each flipped element moves toward its cheaper side.

    ``tie_direction`` (+1/-1 per element) breaks equal-cost ties.
    """
    x = np.asarray(cover, dtype=np.int64)
    plus = np.asarray(cost_plus, dtype=np.float64)
    minus = np.asarray(cost_minus, dtype=np.float64)
    lsb = _lsb(x)
    z, _ = stc_embed(lsb, np.minimum(plus, minus), msg_bits, key.derive(0))
    if tie_direction is None:
        tie_direction = np.ones_like(x)
    direction = np.where(plus < minus, 1, np.where(minus < plus, -1, tie_direction))
    return x + np.where(z != lsb, direction, 0)


def binary_extract(stego, n_bits, key):
    return stc_extract(_lsb(stego), n_bits, key.derive(0))
