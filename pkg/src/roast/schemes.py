"""End-to-end embedding and extraction: DMAS, GMAS, ROAST-OS, ROAST-ST."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .codes.key import StegoKey
from .codes.rs import RSDecodeError
from .codes.stc import binary_embed, binary_extract, ternary_embed, ternary_extract
from .costs import (
    DEFAULT_LAMBDA, DEFAULT_MU, CostMap, generalized_dm_costs, gmas_asymmetric_costs,
    roast_asymmetric_costs, uerd_costs, wet_dc,
)
from .jpeg_io import CoefficientImage, PixelImage, QuantTable, build_qtable
from .overflow import OS, SuppressionParams, build_cover_pair, suppress_image
from .transform import FULL_CHANNEL, restore_coefficients, restore_from_jpeg

DMAS = "dmas"
GMAS = "gmas"
ROAST_OS = "roast-os"
ROAST_ST = "roast-st"
SCHEMES = (DMAS, GMAS, ROAST_OS, ROAST_ST)

_u, _v = np.indices((8, 8))
# Mid-frequency band of DMAS/GMAS, 0-indexed frequencies with u+v in {7,8,9}.
MID_BAND_MASK = np.isin(_u + _v, (7, 8, 9))
AC_MASK = (_u + _v) > 0
del _u, _v

LENGTH_PREFIX_BITS = 32
SYMBOL_BITS = 5
# Largest syndrome length per layer, as a fraction of the cover length.
MAX_LAYER_RATE = 0.5
MAX_MIN_RATE = 0.25  # above this the second ternary layer often has no solution


class CapacityError(ValueError):
    """The coded message does not fit the embedding domain."""


@dataclass(frozen=True)
class SchemeParams:
    scheme: str = ROAST_ST
    payload: float = 0.1
    t1: int = 8
    t2: float = 0.0
    lam: float = DEFAULT_LAMBDA
    mu: float = DEFAULT_MU
    min_rate: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.payload < 0:
            raise ValueError("payload must be nonnegative")
        if self.min_rate is not None and not 0 < self.min_rate <= MAX_MIN_RATE:
            raise ValueError(f"min_rate must lie in (0, {MAX_MIN_RATE}]")

    @property
    def domain_mask(self):
        return MID_BAND_MASK if self.scheme in (DMAS, GMAS) else AC_MASK

    @property
    def ternary(self):
        return self.scheme != DMAS

    @property
    def suppression(self):
        return SuppressionParams(self.t1, self.t2)

    def as_dict(self):
        out = {"payload": self.payload, "t1": self.t1, "t2": self.t2,
               "lam": self.lam, "mu": self.mu}
        if self.min_rate is not None:
            out["min_rate"] = self.min_rate
        return out


@dataclass(frozen=True)
class PayloadAccount:
    n_m: int
    n_nzac: int

    @property
    def relative(self):
        return self.n_m / self.n_nzac if self.n_nzac else 0.0


@dataclass(frozen=True)
class EmbedResult:
    stego: CoefficientImage
    key: StegoKey
    robust_cover: CoefficientImage
    reference_cover: CoefficientImage | None
    account: PayloadAccount
    preprocessing_changes: int
    embedding_changes: int
    domain_size: int


@dataclass(frozen=True)
class ExtractResult:
    message: bytes
    payload_bits: np.ndarray  # framed bits after RS, without the length prefix
    rs_failures: int
    n_codewords: int

    def bit_errors(self, reference):
        ref = bytes_to_bits(reference)
        got = self.payload_bits[:ref.size]
        if got.size < ref.size:
            got = np.concatenate([got, np.zeros(ref.size - got.size, dtype=np.uint8)])
        return int(np.count_nonzero(got != ref))

    def error_rate(self, reference):
        n = 8 * len(reference)
        return self.bit_errors(reference) / n if n else 0.0


# --------------------------------------------------------------------------
# Message framing and RS layer

def bytes_to_bits(data):
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def frame_message(msg, rs_k=15):
    """Length prefix + payload bits, zero padded to whole RS messages."""
    bits = bytes_to_bits(struct.pack(">I", len(msg)) + bytes(msg))
    unit = rs_k * SYMBOL_BITS
    pad = (-bits.size) % unit
    return np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])


def _bits_to_symbols(bits):
    return bits.reshape(-1, SYMBOL_BITS) @ (1 << np.arange(SYMBOL_BITS - 1, -1, -1))


def _symbols_to_bits(symbols):
    s = np.asarray(symbols, dtype=np.int64)
    return ((s[:, None] >> np.arange(SYMBOL_BITS - 1, -1, -1)) & 1).astype(np.uint8).reshape(-1)


def rs_encode_bits(framed, rs):
    """RS-encode framed bits; codeword symbols are interleaved round-robin."""
    symbols = _bits_to_symbols(framed).reshape(-1, rs.k)
    codewords = np.array([rs.encode(m) for m in symbols], dtype=np.int64).reshape(-1, rs.n)
    return _symbols_to_bits(codewords.T.reshape(-1)), len(codewords)


def rs_decode_bits(coded, n_codewords, rs):
    """Inverse of :func:`rs_encode_bits`; failing codewords yield their systematic part."""
    symbols = _bits_to_symbols(coded).reshape(rs.n, n_codewords).T
    out = []
    failures = 0
    for word in symbols:
        try:
            msg, _ = rs.decode(word.tolist())
        except RSDecodeError:
            failures += 1
            msg = word[:rs.k].tolist()
        out.append(msg)
    return _symbols_to_bits(np.array(out, dtype=np.int64).reshape(-1)), failures


def coded_length(n_codewords, rs_n=31):
    return n_codewords * rs_n * SYMBOL_BITS


# --------------------------------------------------------------------------
# Domain and capacity

def domain_indices(img, mask, seed):
    """Flat coefficient indices of the embedding domain in key-permuted order."""
    rows, cols = img.block_shape
    grid = np.zeros((rows, cols, 8, 8), dtype=bool)
    grid[:, :] = mask
    idx = np.flatnonzero(grid)
    rng = np.random.default_rng([seed & (2**64 - 1), 0x5EED])
    return idx[rng.permutation(idx.size)]


def used_domain(domain_size, n_coded, params):
    """Length of the permuted-domain prefix that carries ``n_coded`` bits.

    The whole domain by default. With ``params.min_rate`` the prefix is cut so
    that each STC layer runs at no less than that rate: a short message then
    meets proportionally fewer channel errors.
    """
    if params.min_rate is None or n_coded == 0:
        return domain_size
    layer_bits = -(-n_coded // 2) if params.ternary else n_coded
    return min(domain_size, math.ceil(layer_bits / params.min_rate))


def coded_capacity(domain_size, ternary=True):
    per_layer = int(domain_size * MAX_LAYER_RATE)
    return 2 * per_layer if ternary else per_layer


def capacity(cover, params, rs_n=31, rs_k=15):
    """Largest framed message (bits, length prefix included) the domain can carry."""
    rows, cols = cover.block_shape
    n = rows * cols * int(params.domain_mask.sum())
    n_cw = coded_capacity(n, params.ternary) // (rs_n * SYMBOL_BITS)
    return n_cw * rs_k * SYMBOL_BITS


def max_message_bytes(cover, params):
    return max(0, (capacity(cover, params) - LENGTH_PREFIX_BITS) // 8)


def payload_account(cover, msg):
    return PayloadAccount(8 * len(msg), cover.nzac())


def message_for_payload(cover, payload, rng):
    """Random message of ``payload`` bits per nonzero AC coefficient (whole bytes)."""
    n_bytes = int(round(payload * cover.nzac())) // 8
    return rng.integers(0, 256, n_bytes, dtype=np.uint8).tobytes()


# --------------------------------------------------------------------------
# Embedding

def _cover_qf_fields(qtable):
    if qtable.quality_factor is not None:
        return {"cover_qf": qtable.quality_factor, "cover_table": None}
    return {"cover_qf": None, "cover_table": qtable.steps.tolist()}


def key_table(key):
    if key.cover_table is not None:
        return QuantTable(np.array(key.cover_table))
    return build_qtable(key.cover_qf)


def _embed_domain(cover_vals, costs_plus, costs_minus, msg, key, params):
    if not msg:
        return cover_vals, 0
    framed = frame_message(msg, key.rs_k)
    coded, n_cw = rs_encode_bits(framed, key.rs)
    if coded.size > coded_capacity(cover_vals.size, params.ternary):
        raise CapacityError(
            f"{coded.size} coded bits exceed the capacity of a {cover_vals.size}-element domain")
    if params.ternary:
        stego = ternary_embed(cover_vals, costs_plus, costs_minus, coded, key.stc)
    else:
        rng = np.random.default_rng([key.seed & (2**64 - 1), 0xD1])
        tie = rng.choice(np.array([-1, 1]), cover_vals.size)
        stego = binary_embed(cover_vals, costs_plus, costs_minus, coded, key.stc, tie)
    return stego, n_cw


def _finish(cover, robust, reference, stego_coeffs, msg, key, params, domain_size):
    stego = robust.with_coeffs(stego_coeffs)
    key = StegoKey(
        seed=key.seed, scheme=params.scheme, h=key.h, rs_n=key.rs_n, rs_k=key.rs_k,
        params=params.as_dict(), n_codewords=key.n_codewords,
        **_cover_qf_fields(cover.qtable))
    return EmbedResult(
        stego=stego, key=key, robust_cover=robust, reference_cover=reference,
        account=payload_account(cover, msg),
        preprocessing_changes=int(np.count_nonzero(robust.coeffs != cover.coeffs)),
        embedding_changes=int(np.count_nonzero(stego.coeffs != robust.coeffs)),
        domain_size=domain_size)


def _embed_costs(robust, reference, costs, msg, key, params):
    idx = domain_indices(robust, params.domain_mask, key.seed)
    if msg:
        n_cw = frame_message(msg, key.rs_k).size // (key.rs_k * SYMBOL_BITS)
        idx = idx[:used_domain(idx.size, coded_length(n_cw, key.rs_n), params)]
    flat = robust.coeffs.reshape(-1)
    stego_vals, n_cw = _embed_domain(
        flat[idx].astype(np.int64), costs.plus.reshape(-1)[idx], costs.minus.reshape(-1)[idx],
        msg, key, params)
    coeffs = flat.copy()
    coeffs[idx] = stego_vals
    return coeffs.reshape(robust.coeffs.shape), n_cw, idx.size


def _run(cover, robust, reference, costs, msg, key, params):
    coeffs, n_cw, size = _embed_costs(robust, reference, wet_dc(costs), msg, key, params)
    return _finish(cover, robust, reference, coeffs, msg, key.with_codewords(n_cw), params, size)


def roast_os_embed(cover, msg, key, params=SchemeParams(ROAST_OS)):
    """Overall-Scale preprocessing, GMAS-style asymmetric costs, ternary STC on all AC."""
    robust = suppress_image(cover, OS)
    costs = gmas_asymmetric_costs(robust, uerd_costs(robust), params.lam)
    return _run(cover, robust, None, costs, msg, key, params)


def roast_st_embed(cover, msg, key, params=SchemeParams(ROAST_ST)):
    """Specific-Truncation preprocessing plus costs steered toward the reference cover."""
    pair = build_cover_pair(cover, params.suppression)
    robust, reference = pair.robust_cover, pair.reference_cover
    base = gmas_asymmetric_costs(robust, uerd_costs(robust), params.lam)
    costs = roast_asymmetric_costs(robust, reference, base, params.mu)
    return _run(cover, robust, reference, costs, msg, key, params)


def gmas_embed(cover, msg, key, params=SchemeParams(GMAS), unquantized=None):
    """Generalized dither modulation on the mid-frequency band.

    ``unquantized`` holds precover DCT coefficients (same grid as ``cover``);
    without it the cover's own dequantized values are used, which sit exactly
    on segment centres.
    """
    steps = cover.qtable.steps
    d_tilde = cover.coeffs * steps if unquantized is None else np.asarray(unquantized, dtype=np.float64)
    k = np.sign(d_tilde / steps) * np.floor(np.abs(d_tilde / steps) + 0.5)
    centred = cover.with_coeffs(np.clip(k, -1024, 1023).astype(np.int32))
    asym = gmas_asymmetric_costs(centred, uerd_costs(centred), params.lam)
    xi_plus, xi_minus, _ = generalized_dm_costs(d_tilde, steps, asym.plus, asym.minus)
    costs = CostMap(xi_plus, xi_minus)
    return _run(cover, centred, None, costs, msg, key, params)


def dmas_embed(cover, msg, key, params=SchemeParams(DMAS)):
    """Binary dither modulation on the mid-frequency band with symmetric costs."""
    costs = CostMap.symmetric(uerd_costs(cover))
    return _run(cover, cover, None, costs, msg, key, params)


_EMBEDDERS = {
    DMAS: dmas_embed, GMAS: gmas_embed, ROAST_OS: roast_os_embed, ROAST_ST: roast_st_embed,
}


def embed(cover, msg, key, params):
    return _EMBEDDERS[params.scheme](cover, msg, key, params)


# --------------------------------------------------------------------------
# Extraction

def received_coefficients(received, key, flags=FULL_CHANNEL):
    """Quantized coefficients under the embedding table (DCT coefficient restoration)."""
    table = key_table(key)
    if isinstance(received, PixelImage):
        return restore_coefficients(received, table)
    if received.qtable == table:
        return received
    return restore_from_jpeg(received, table, flags)


def extract(received, key, flags=FULL_CHANNEL):
    """Recover the message from a stego JPEG or decoded pixels (best effort)."""
    params = SchemeParams(key.scheme, **{k: v for k, v in key.params.items()
                                         if k in ("payload", "t1", "t2", "lam", "mu",
                                                  "min_rate")})
    coeffs = received_coefficients(received, key, flags)
    n_coded = coded_length(key.n_codewords, key.rs_n)
    idx = domain_indices(coeffs, params.domain_mask, key.seed)
    idx = idx[:used_domain(idx.size, n_coded, params)]
    values = coeffs.coeffs.reshape(-1)[idx].astype(np.int64)
    if key.n_codewords == 0:
        return ExtractResult(b"", np.zeros(0, dtype=np.uint8), 0, 0)
    if params.ternary:
        coded = ternary_extract(values, n_coded, key.stc)
    else:
        coded = binary_extract(values, n_coded, key.stc)
    framed, failures = rs_decode_bits(coded, key.n_codewords, key.rs)
    length = int.from_bytes(np.packbits(framed[:LENGTH_PREFIX_BITS]).tobytes(), "big")
    body = framed[LENGTH_PREFIX_BITS:]
    length = min(length, body.size // 8)
    message = np.packbits(body[:8 * length]).tobytes()
    return ExtractResult(message, body, failures, key.n_codewords)
