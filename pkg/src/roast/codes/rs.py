"""GF(2^5) arithmetic and a systematic narrow-sense RS(31, 15) codec.

Decoding is Berlekamp-Massey + Chien search + Forney; a final syndrome
check catches miscorrections beyond the design distance.
"""
from __future__ import annotations

from dataclasses import dataclass

PRIMITIVE_POLY = 0b100101  # x^5 + x^2 + 1
FIELD_BITS = 5
FIELD_SIZE = 1 << FIELD_BITS
ORDER = FIELD_SIZE - 1

EXP = [0] * (2 * ORDER)
LOG = [0] * FIELD_SIZE
_x = 1
for _i in range(ORDER):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & FIELD_SIZE:
        _x ^= PRIMITIVE_POLY
for _i in range(ORDER, 2 * ORDER):
    EXP[_i] = EXP[_i - ORDER]
del _x, _i


def gf_mul(a, b):
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_inv(a):
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(32)")
    return EXP[ORDER - LOG[a]]


def gf_div(a, b):
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(32)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % ORDER]


def gf_pow(a, e):
    if a == 0:
        return 0 if e else 1
    return EXP[(LOG[a] * e) % ORDER]


MUL = [[gf_mul(a, b) for b in range(FIELD_SIZE)] for a in range(FIELD_SIZE)]


# Polynomials are lists of coefficients, highest degree first.

def poly_eval(p, x):
    y = 0
    row = MUL[x]
    for c in p:
        y = row[y] ^ c
    return y


def poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            row = MUL[a]
            for j, b in enumerate(q):
                out[i + j] ^= row[b]
    return out


class RSDecodeError(Exception):
    """More symbol errors than the code can correct."""


@dataclass(frozen=True)
class RSCode:
    n: int = 31
    k: int = 15

    def __post_init__(self):
        if not 0 < self.k < self.n <= ORDER:
            raise ValueError("need 0 < k < n <= 31")

    @property
    def nsym(self):
        return self.n - self.k

    @property
    def t(self):
        return self.nsym // 2

    @property
    def generator(self):
        return list(_generator(self.nsym))

    def encode(self, msg):
        """Systematic codeword: the message followed by ``n - k`` parity symbols."""
        msg = [int(s) for s in msg]
        if len(msg) != self.k:
            raise ValueError(f"message must have {self.k} symbols")
        if any(not 0 <= s < FIELD_SIZE for s in msg):
            raise ValueError("symbols must lie in 0..31")
        gen = _generator(self.nsym)
        rem = msg + [0] * self.nsym
        for i in range(self.k):
            coef = rem[i]
            if coef:
                row = MUL[coef]
                for j in range(1, len(gen)):
                    rem[i + j] ^= row[gen[j]]
        return msg + rem[self.k:]

    def syndromes(self, word):
        return [poly_eval(word, EXP[i]) for i in range(1, self.nsym + 1)]

    def decode(self, word):
        """Return ``(message, n_corrected)``; raise :class:`RSDecodeError` on failure."""
        word = [int(s) for s in word]
        if len(word) != self.n:
            raise ValueError(f"codeword must have {self.n} symbols")
        synd = self.syndromes(word)
        if not any(synd):
            return word[:self.k], 0
        sigma = _berlekamp_massey(synd)
        nerr = len(sigma) - 1
        if nerr > self.t:
            raise RSDecodeError("too many errors")
        positions = _chien(sigma, self.n)
        if len(positions) != nerr:
            raise RSDecodeError("could not locate errors")
        fixed = _forney(word, synd, sigma, positions, self.nsym)
        if any(self.syndromes(fixed)):
            raise RSDecodeError("miscorrection detected")
        return fixed[:self.k], nerr


_GEN_CACHE = {}


def _generator(nsym):
    g = _GEN_CACHE.get(nsym)
    if g is None:
        g = [1]
        for i in range(1, nsym + 1):
            g = poly_mul(g, [1, EXP[i]])
        _GEN_CACHE[nsym] = g
    return g


def _berlekamp_massey(synd):
    """Error locator, lowest degree first, with sigma[0] == 1."""
    sigma = [1]
    prev = [1]
    length = 0
    shift = 1
    b = 1
    for r, s in enumerate(synd):
        d = s
        for i in range(1, length + 1):
            if i < len(sigma):
                d ^= MUL[sigma[i]][synd[r - i]]
        if d == 0:
            shift += 1
            continue
        coef = gf_div(d, b)
        update = [0] * shift + [MUL[coef][c] for c in prev]
        new = sigma + [0] * max(0, len(update) - len(sigma))
        for i, c in enumerate(update):
            new[i] ^= c
        if 2 * length <= r:
            prev = sigma
            length = r + 1 - length
            b = d
            shift = 1
        else:
            shift += 1
        sigma = new
    while len(sigma) > 1 and sigma[-1] == 0:
        sigma.pop()
    return sigma


def _eval_low(p, x):
    y = 0
    row = MUL[x]
    for c in reversed(p):
        y = row[y] ^ c
    return y


def _chien(sigma, n):
    """Word indices (0 = highest-degree symbol) whose locators are roots."""
    positions = []
    for idx in range(n):
        power = n - 1 - idx
        if _eval_low(sigma, EXP[(ORDER - power) % ORDER]) == 0:
            positions.append(idx)
    return positions


def _forney(word, synd, sigma, positions, nsym):
    # Error evaluator Omega(x) = S(x) * sigma(x) mod x^nsym, low degree first.
    omega = [0] * nsym
    for i, s in enumerate(synd):
        if s:
            for j, c in enumerate(sigma):
                if i + j < nsym:
                    omega[i + j] ^= MUL[s][c]
    # Formal derivative: odd-degree terms only in characteristic 2.
    deriv = [sigma[i] if i % 2 == 1 else 0 for i in range(1, len(sigma))]
    fixed = list(word)
    n = len(word)
    for idx in positions:
        power = n - 1 - idx
        x_inv = EXP[(ORDER - power) % ORDER]
        num = _eval_low(omega, x_inv)
        den = _eval_low(deriv, x_inv)
        if den == 0:
            raise RSDecodeError("degenerate error locator")
        # Narrow sense (first root alpha^1): e = Omega(X^-1) / sigma'(X^-1).
        fixed[idx] ^= gf_div(num, den)
    return fixed


RS_31_15 = RSCode(31, 15)
