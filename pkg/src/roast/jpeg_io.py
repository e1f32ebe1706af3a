"""Grayscale baseline JPEG at the quantized-coefficient level.

Only what the embedding schemes need: one component, sequential Huffman
coding, 8-bit samples. Coefficients are kept as an int32 array of shape
``(block_rows, block_cols, 8, 8)`` in natural (row-major) frequency order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dct import idct2, round_half_away, tru


class JpegError(Exception):
    """Base class for codec errors."""


class JpegParseError(JpegError):
    """Malformed or truncated JPEG stream."""


class UnsupportedFormatError(JpegError):
    """Valid JPEG outside the supported subset (color, progressive, ...)."""


COEF_MIN, COEF_MAX = -1024, 1023
# Baseline AC Huffman categories stop at 10 bits, so -1024 is DC-only.
AC_MIN = -1023

# ITU T.81 Annex K.1, luminance.
BASE_LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int32)

ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
])

# Annex K.3 typical Huffman tables (luminance): (BITS, HUFFVAL).
STD_DC_BITS = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
STD_DC_VALS = list(range(12))
STD_AC_BITS = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D]
STD_AC_VALS = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06,
    0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44, 0x45,
    0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74, 0x75,
    0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3,
    0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9,
    0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4,
    0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA,
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class QuantTable:
    """8x8 quantization steps; ``quality_factor`` is None for foreign tables."""

    steps: np.ndarray
    quality_factor: int | None = None

    def __post_init__(self):
        steps = _frozen(self.steps, np.int32)
        if steps.shape != (8, 8):
            raise ValueError(f"quantization table must be 8x8, got {steps.shape}")
        if steps.min() < 1 or steps.max() > 255:
            raise ValueError("quantization steps must lie in 1..255")
        object.__setattr__(self, "steps", steps)

    def __eq__(self, other):
        return isinstance(other, QuantTable) and np.array_equal(self.steps, other.steps)

    def __hash__(self):
        return hash(self.steps.tobytes())


@dataclass(frozen=True, eq=False)
class CoefficientImage:
    width: int
    height: int
    coeffs: np.ndarray  # (block_rows, block_cols, 8, 8) int32
    qtable: QuantTable

    def __post_init__(self):
        coeffs = _frozen(self.coeffs, np.int32)
        rows, cols = blocks_for(self.width, self.height)
        if coeffs.shape != (rows, cols, 8, 8):
            raise ValueError(
                f"coefficient grid {coeffs.shape[:2]} does not match "
                f"{self.width}x{self.height} image ({rows}, {cols})")
        if coeffs.size and (coeffs.min() < COEF_MIN or coeffs.max() > COEF_MAX):
            raise ValueError("DCT coefficients must lie in -1024..1023")
        if coeffs.size and coeffs.reshape(-1, 64)[:, 1:].min() < AC_MIN:
            raise ValueError("AC coefficients must lie in -1023..1023")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def block_shape(self):
        return self.coeffs.shape[:2]

    def with_coeffs(self, coeffs, qtable=None):
        return CoefficientImage(self.width, self.height, coeffs,
                                self.qtable if qtable is None else qtable)

    def nzac(self):
        """Number of nonzero AC coefficients."""
        c = self.coeffs.reshape(-1, 64)[:, 1:]
        return int(np.count_nonzero(c))

    def __eq__(self, other):
        return (isinstance(other, CoefficientImage)
                and (self.width, self.height) == (other.width, other.height)
                and self.qtable == other.qtable
                and np.array_equal(self.coeffs, other.coeffs))


@dataclass(frozen=True, eq=False)
class PixelImage:
    """8-bit grayscale image.

    ``pixels`` may cover the whole padded block grid; ``width``/``height``
    give the true size and :meth:`cropped` the visible region.
    """

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < self.height or px.shape[1] < self.width:
            raise ValueError("pixel array smaller than declared dimensions")
        if px.size and (px.min() < 0 or px.max() > 255):
            raise ValueError("pixels must lie in 0..255")
        object.__setattr__(self, "pixels", _frozen(px, np.uint8))

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr)
        return cls(arr.shape[1], arr.shape[0], arr)

    def cropped(self):
        return self.pixels[:self.height, :self.width]


def clip_coefficients(coeffs):
    """Clamp to the baseline range: DC in -1024..1023, AC in -1023..1023."""
    c = np.clip(coeffs, COEF_MIN, COEF_MAX)
    c[..., 1:] = np.maximum(c[..., 1:], AC_MIN)
    c[..., 1:, 0] = np.maximum(c[..., 1:, 0], AC_MIN)
    return c


def blocks_for(width, height):
    return (height + 7) // 8, (width + 7) // 8


def build_qtable(quality_factor):
    """IJG quality scaling of the Annex-K luminance table."""
    qf = int(quality_factor)
    if qf != quality_factor or not 1 <= qf <= 100:
        raise ValueError(f"quality factor must be an integer in 1..100, got {quality_factor!r}")
    scale = 5000 // qf if qf < 50 else 200 - 2 * qf
    steps = np.clip((BASE_LUMA_TABLE * scale + 50) // 100, 1, 255)
    return QuantTable(steps, qf)


def match_quality_factor(steps):
    steps = np.asarray(steps)
    for qf in range(1, 101):
        if np.array_equal(build_qtable(qf).steps, steps):
            return qf
    return None


def decode_to_pixels(img):
    """Dequantize, IDCT, clamp, shift by 128 and round; padded grid kept."""
    spatial = idct2(img.coeffs * img.qtable.steps)
    px = round_half_away(tru(spatial) + 128.0)
    rows, cols = img.block_shape
    px = px.transpose(0, 2, 1, 3).reshape(rows * 8, cols * 8)
    return PixelImage(img.width, img.height, px.astype(np.uint8))


def write_pgm(image, path):
    px = np.ascontiguousarray(image.cropped())
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.tobytes())


# --------------------------------------------------------------------------
# Huffman helpers

def _code_table(bits, vals):
    """Canonical code assignment (T.81 Annex C): symbol -> (code, length)."""
    table = {}
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            table[vals[k]] = (code, length)
            code += 1
            k += 1
        code <<= 1
    return table


def _magnitude_category(v):
    return int(abs(v)).bit_length()


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def write(self, value, length):
        self.acc = (self.acc << length) | (value & ((1 << length) - 1))
        self.nbits += length
        while self.nbits >= 8:
            self.nbits -= 8
            byte = (self.acc >> self.nbits) & 0xFF
            self.out.append(byte)
            if byte == 0xFF:
                self.out.append(0x00)
        self.acc &= (1 << self.nbits) - 1

    def flush(self):
        if self.nbits:
            self.write((1 << (8 - self.nbits)) - 1, 8 - self.nbits)
        return bytes(self.out)


def _fast_lookup(bits, vals):
    """16-bit prefix table: ``peek16 -> (symbol << 8) | code_length``."""
    table = np.zeros(1 << 16, dtype=np.int32)
    for sym, (code, length) in _code_table(bits, vals).items():
        lo = code << (16 - length)
        table[lo:lo + (1 << (16 - length))] = (sym << 8) | length
    return table.tolist()


def _scan_segments(data, pos):
    """Unstuff entropy-coded data; split on RSTn. Returns (segments, end)."""
    segments = []
    cur = bytearray()
    n = len(data)
    while True:
        nxt = data.find(b"\xFF", pos)
        if nxt < 0:
            raise JpegParseError("truncated entropy-coded segment (no EOI)")
        cur += data[pos:nxt]
        if nxt + 1 >= n:
            raise JpegParseError("truncated entropy-coded segment")
        m = data[nxt + 1]
        if m == 0x00:
            cur.append(0xFF)
            pos = nxt + 2
        elif m == 0xFF:
            pos = nxt + 1
        elif 0xD0 <= m <= 0xD7:
            segments.append(bytes(cur))
            cur = bytearray()
            pos = nxt + 2
        else:
            segments.append(bytes(cur))
            return segments, nxt


class _BitReader:
    def __init__(self, segment):
        self.nbits_total = 8 * len(segment)
        # Pad with 1-bits as libjpeg does; overruns are detected per block.
        self.buf = segment + b"\xFF\xFF\xFF\xFF"
        self.pos = 0

    def peek16(self):
        p = self.pos
        i = p >> 3
        v = (self.buf[i] << 16) | (self.buf[i + 1] << 8) | self.buf[i + 2]
        return (v >> (8 - (p & 7))) & 0xFFFF

    def bits(self, n):
        if not n:
            return 0
        p = self.pos
        i = p >> 3
        v = (self.buf[i] << 24) | (self.buf[i + 1] << 16) | (self.buf[i + 2] << 8) | self.buf[i + 3]
        self.pos = p + n
        return (v >> (32 - (p & 7) - n)) & ((1 << n) - 1)

    def huffman(self, table):
        e = table[self.peek16()]
        if not e:
            raise JpegParseError("invalid Huffman code")
        self.pos += e & 0xFF
        return e >> 8

    @property
    def overrun(self):
        return self.pos > self.nbits_total


def _extend(v, t):
    return v - (1 << t) + 1 if t and v < (1 << (t - 1)) else v


# --------------------------------------------------------------------------
# Writer

def _segment(marker, payload):
    return struct.pack(">BBH", 0xFF, marker, len(payload) + 2) + payload


def encode_jpeg(img):
    """Serialize a CoefficientImage to baseline JPEG bytes."""
    if img.width < 1 or img.height < 1 or img.width > 65535 or img.height > 65535:
        raise ValueError("image dimensions must be in 1..65535")
    out = bytearray(b"\xFF\xD8")
    out += _segment(0xE0, b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00")
    zz_steps = img.qtable.steps.reshape(64)[ZIGZAG]
    out += _segment(0xDB, bytes([0x00]) + bytes(int(s) for s in zz_steps))
    out += _segment(0xC0, struct.pack(">BHHB", 8, img.height, img.width, 1) + bytes([1, 0x11, 0]))
    out += _segment(0xC4, bytes([0x00] + STD_DC_BITS + STD_DC_VALS))
    out += _segment(0xC4, bytes([0x10] + STD_AC_BITS + STD_AC_VALS))
    out += _segment(0xDA, bytes([1, 1, 0x00, 0, 63, 0]))

    dc_codes = _code_table(STD_DC_BITS, STD_DC_VALS)
    ac_codes = _code_table(STD_AC_BITS, STD_AC_VALS)
    w = _BitWriter()
    pred = 0
    zz_blocks = img.coeffs.reshape(-1, 64)[:, ZIGZAG].tolist()
    for zz in zz_blocks:
        diff = zz[0] - pred
        pred = zz[0]
        t = _magnitude_category(diff)
        w.write(*dc_codes[t])
        if t:
            w.write(diff if diff > 0 else diff + (1 << t) - 1, t)
        run = 0
        for k in range(1, 64):
            v = zz[k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                w.write(*ac_codes[0xF0])
                run -= 16
            t = _magnitude_category(v)
            w.write(*ac_codes[(run << 4) | t])
            w.write(v if v > 0 else v + (1 << t) - 1, t)
            run = 0
        if run:
            w.write(*ac_codes[0x00])
    out += w.flush()
    out += b"\xFF\xD9"
    return bytes(out)


def write_jpeg(img, path):
    Path(path).write_bytes(encode_jpeg(img))


# --------------------------------------------------------------------------
# Reader

_UNSUPPORTED_SOF = {
    0xC2: "progressive", 0xC3: "lossless", 0xC5: "differential sequential",
    0xC6: "differential progressive", 0xC7: "differential lossless",
    0xC9: "arithmetic-coded", 0xCA: "arithmetic-coded progressive",
    0xCB: "arithmetic-coded lossless", 0xCD: "arithmetic-coded differential",
    0xCE: "arithmetic-coded differential progressive",
    0xCF: "arithmetic-coded differential lossless",
}


def decode_jpeg(data):
    """Parse baseline JPEG bytes into a CoefficientImage."""
    data = bytes(data)
    if data[:2] != b"\xFF\xD8":
        raise JpegParseError("missing SOI marker")
    pos = 2
    qtables = {}
    dc_tables, ac_tables = {}, {}
    frame = None
    restart_interval = 0
    while True:
        while pos < len(data) and data[pos] == 0xFF and pos + 1 < len(data) and data[pos + 1] == 0xFF:
            pos += 1  # fill bytes
        if pos + 4 > len(data):
            raise JpegParseError("truncated stream (no scan found)")
        if data[pos] != 0xFF:
            raise JpegParseError(f"expected marker at offset {pos}")
        marker = data[pos + 1]
        if marker == 0xD9:
            raise JpegParseError("EOI before scan")
        (length,) = struct.unpack(">H", data[pos + 2:pos + 4])
        seg = data[pos + 4:pos + 2 + length]
        if len(seg) != length - 2:
            raise JpegParseError("truncated marker segment")
        pos += 2 + length

        if marker in _UNSUPPORTED_SOF:
            raise UnsupportedFormatError(f"{_UNSUPPORTED_SOF[marker]} JPEG is not supported")
        if marker in (0xC0, 0xC1):
            precision, height, width, ncomp = struct.unpack(">BHHB", seg[:6])
            if precision != 8:
                raise UnsupportedFormatError(f"{precision}-bit samples are not supported")
            if ncomp != 1:
                raise UnsupportedFormatError(f"{ncomp}-component (color) JPEG is not supported")
            if height == 0:
                raise UnsupportedFormatError("DNL-defined height is not supported")
            comp_id, tq = seg[6], seg[8]
            frame = (width, height, comp_id, tq)
        elif marker == 0xDB:
            i = 0
            while i < len(seg):
                pq, tq = seg[i] >> 4, seg[i] & 0x0F
                n = 128 if pq else 64
                raw = seg[i + 1:i + 1 + n]
                if len(raw) != n:
                    raise JpegParseError("truncated DQT segment")
                vals = np.frombuffer(raw, dtype=">u2" if pq else np.uint8).astype(np.int32)
                natural = np.empty(64, dtype=np.int32)
                natural[ZIGZAG] = vals
                qtables[tq] = natural.reshape(8, 8)
                i += 1 + n
        elif marker == 0xC4:
            i = 0
            while i < len(seg):
                tc, th = seg[i] >> 4, seg[i] & 0x0F
                bits = list(seg[i + 1:i + 17])
                total = sum(bits)
                vals = list(seg[i + 17:i + 17 + total])
                if len(bits) != 16 or len(vals) != total:
                    raise JpegParseError("truncated DHT segment")
                (ac_tables if tc else dc_tables)[th] = _fast_lookup(bits, vals)
                i += 17 + total
        elif marker == 0xDD:
            (restart_interval,) = struct.unpack(">H", seg[:2])
        elif marker == 0xDA:
            if frame is None:
                raise JpegParseError("SOS before SOF")
            ns = seg[0]
            if ns != 1:
                raise UnsupportedFormatError("multi-component scan")
            td, ta = seg[2] >> 4, seg[2] & 0x0F
            ss, se, ahal = seg[3], seg[4], seg[5]
            if (ss, se, ahal) != (0, 63, 0):
                raise UnsupportedFormatError("non-sequential scan parameters")
            width, height, _comp, tq = frame
            if tq not in qtables:
                raise JpegParseError("missing quantization table")
            if td not in dc_tables or ta not in ac_tables:
                raise JpegParseError("missing Huffman table")
            coeffs = _decode_scan(data, pos, blocks_for(width, height),
                                  dc_tables[td], ac_tables[ta], restart_interval)
            steps = qtables[tq]
            if steps.min() < 1 or steps.max() > 255:
                raise UnsupportedFormatError("quantization steps outside 1..255")
            qt = QuantTable(steps, match_quality_factor(steps))
            return CoefficientImage(width, height, coeffs, qt)
        # APPn, COM and anything else is skipped.


def _decode_scan(data, pos, grid, dc_table, ac_table, restart_interval):
    rows, cols = grid
    nblocks = rows * cols
    segments, _ = _scan_segments(data, pos)
    per_segment = restart_interval or nblocks
    if len(segments) < -(-nblocks // per_segment):
        raise JpegParseError("truncated scan: missing restart intervals")
    zz = np.zeros((nblocks, 64), dtype=np.int32)
    b = 0
    for seg in segments:
        if b >= nblocks:
            break
        r = _BitReader(seg)
        pred = 0
        for _ in range(min(per_segment, nblocks - b)):
            t = r.huffman(dc_table)
            if t > 11:
                raise JpegParseError("invalid DC magnitude category")
            pred += _extend(r.bits(t), t)
            row = zz[b]
            row[0] = pred
            k = 1
            while k < 64:
                rs = r.huffman(ac_table)
                run, size = rs >> 4, rs & 0x0F
                if size == 0:
                    if run == 15:
                        k += 16
                        continue
                    break
                k += run
                if k > 63:
                    raise JpegParseError("AC run exceeds block")
                row[k] = _extend(r.bits(size), size)
                k += 1
            if r.overrun:
                raise JpegParseError("truncated entropy-coded segment")
            b += 1
    if b < nblocks:
        raise JpegParseError("truncated scan")
    if (zz.min(initial=0) < COEF_MIN or zz.max(initial=0) > COEF_MAX
            or zz[:, 1:].min(initial=0) < AC_MIN):
        raise UnsupportedFormatError("coefficients outside the baseline range")
    natural = np.empty_like(zz)
    natural[:, ZIGZAG] = zz
    return natural.reshape(rows, cols, 8, 8)


def read_jpeg(path):
    return decode_jpeg(Path(path).read_bytes())
