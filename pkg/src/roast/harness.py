"""Batch evaluation: payload sweeps, overflow statistics, rounding Monte Carlo, ablation."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .codes.key import StegoKey
from .codes.stc import EmbeddingError
from .corpus import list_corpus, list_images, load_gray
from .dct import dct2
from .jpeg_io import build_qtable, read_jpeg
from .overflow import excess, image_omega
from .schemes import (
    CapacityError, SchemeParams, embed, extract, message_for_payload,
)
from .transform import (
    AblationFlags, channel_spatial, encode_pixels, recompress, rounding_survival_probability,
    spatial_blocks,
)

FLOAT_FORMAT = ".6g"


def _fmt(value):
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def write_csv(rows, header, path=None):
    """Write rows (sequences) under ``header``; return the text when ``path`` is None."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------
# Sweep records

@dataclass(frozen=True)
class EvalRecord:
    image_id: str
    scheme: str
    payload: float
    cover_qf: int
    channel_qf: int
    r_error: float
    preprocessing_change_rate: float
    embedding_change_rate: float
    omega_before: float
    omega_after: float
    n_codewords: int = 0
    rs_failures: int = 0
    status: str = "ok"
    wall_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.r_error <= 1.0:
            raise ValueError(f"R_error {self.r_error} outside [0, 1]")
        for name in ("preprocessing_change_rate", "embedding_change_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")
        if self.omega_before < 0 or self.omega_after < 0:
            raise ValueError("omega must be nonnegative")
        if self.rs_failures < 0 or self.rs_failures > max(self.n_codewords, 0):
            raise ValueError("rs_failures must lie in 0..n_codewords")

    @classmethod
    def header(cls, timing=False):
        names = [f.name for f in fields(cls)]
        return names if timing else names[:-1]

    def row(self, timing=False):
        values = [getattr(self, n) for n in self.header(True)]
        return values if timing else values[:-1]


@dataclass(frozen=True)
class SweepConfig:
    corpus_dir: str
    payloads: list
    channel_qfs: list
    scheme: str = "roast-st"
    params: dict = field(default_factory=dict)
    seed: int = 0
    h: int = 10
    rs_n: int = 31
    rs_k: int = 15
    output: str | None = None
    limit: int | None = None
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "payloads", [float(p) for p in self.payloads])
        object.__setattr__(self, "channel_qfs", [int(q) for q in self.channel_qfs])
        if any(p < 0 for p in self.payloads):
            raise ValueError("payloads must be nonnegative")
        for q in self.channel_qfs:
            build_qtable(q)
        self.scheme_params(self.payloads[0] if self.payloads else 0.0)

    def scheme_params(self, payload):
        return SchemeParams(self.scheme, payload=payload, **self.params)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown sweep config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def _image_seed(seed, index, payload_index):
    state = np.random.SeedSequence([seed, index, payload_index]).generate_state(2, np.uint64)
    return int(state[0]), np.random.default_rng(state[1])


def evaluate_image(config, index, path):
    """All (payload, channel QF) records for one cover, in config order."""
    cover = read_jpeg(path)
    image_id = Path(path).stem
    cover_qf = cover.qtable.quality_factor or 0
    omega_before = float(image_omega(cover).sum())
    n_total = cover.coeffs.size
    records = []
    for pi, payload in enumerate(config.payloads):
        params = config.scheme_params(payload)
        key_seed, rng = _image_seed(config.seed, index, pi)
        msg = message_for_payload(cover, payload, rng)
        key = StegoKey(seed=key_seed, scheme=config.scheme, h=config.h,
                       rs_n=config.rs_n, rs_k=config.rs_k)
        start = time.perf_counter()
        try:
            result = embed(cover, msg, key, params)
        except (CapacityError, EmbeddingError) as exc:
            status = "capacity" if isinstance(exc, CapacityError) else "embed-failed"
            for qf in config.channel_qfs:
                records.append(EvalRecord(image_id, config.scheme, payload, cover_qf, qf,
                                          1.0, 0.0, 0.0, omega_before, omega_before,
                                          status=status))
            continue
        embed_time = time.perf_counter() - start
        pre_rate = result.preprocessing_changes / n_total
        emb_rate = result.embedding_changes / result.domain_size if result.domain_size else 0.0
        omega_after = float(image_omega(result.stego).sum())
        for qf in config.channel_qfs:
            t0 = time.perf_counter()
            received = recompress(result.stego, qf)
            out = extract(received, result.key)
            records.append(EvalRecord(
                image_id, config.scheme, payload, cover_qf, qf, out.error_rate(msg),
                pre_rate, emb_rate, omega_before, omega_after,
                n_codewords=out.n_codewords, rs_failures=out.rs_failures,
                wall_time=embed_time + time.perf_counter() - t0))
    return records


def _evaluate_star(args):
    return evaluate_image(*args)


def worker_count(n_jobs):
    cap = os.environ.get("ROAST_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def run_sweep(config):
    """EvalRecords for every image x payload x channel QF, in input order."""
    paths = list_corpus(config.corpus_dir)
    if config.limit is not None:
        paths = paths[:config.limit]
    if not config.payloads or not config.channel_qfs:
        return []
    jobs = [(config, i, str(p)) for i, p in enumerate(paths)]
    workers = worker_count(len(jobs))
    if workers == 1:
        batches = [_evaluate_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            batches = list(pool.map(_evaluate_star, jobs))
    return [r for batch in batches for r in batch]


def cmd_sweep(config):
    """Run a sweep and return the CSV text (also written to ``config.output`` if set)."""
    records = run_sweep(config)
    timing = config.record_timing
    return write_csv((r.row(timing) for r in records), EvalRecord.header(timing), config.output)


def summarize(records):
    """Per (scheme, payload, channel QF): mean R_error and zero-error fraction.

    Rows whose embedding did not happen (capacity or trellis failure) are
    counted under ``skipped`` and left out of the means.
    """
    groups = {}
    for r in records:
        groups.setdefault((r.scheme, r.payload, r.channel_qf), []).append(r)
    out = {}
    for k, rows in groups.items():
        ok = [r for r in rows if r.status == "ok"]
        errors = [r.r_error for r in ok]
        out[k] = {"mean_r_error": float(np.mean(errors)) if ok else float("nan"),
                  "error_free": sum(e == 0 for e in errors) / len(ok) if ok else float("nan"),
                  "rs_failures": sum(r.rs_failures for r in ok),
                  "images": len(ok),
                  "skipped": len(rows) - len(ok)}
    return out


# --------------------------------------------------------------------------
# Overflow statistics

OVERFLOW_HEADER = ["image_id", "qf", "block", "u", "v", "excess"]
OVERFLOW_SUMMARY_HEADER = ["image_id", "qf", "blocks", "overflow_blocks", "omega_total", "excess_max"]


def position_rows(delta, image_id, qf):
    """Long-format rows from per-position excess of shape ``(rows, cols, 8, 8)``."""
    cols = delta.shape[1]
    return [(image_id, qf, int(br * cols + bc), int(u), int(v), float(delta[br, bc, u, v]))
            for br, bc, u, v in np.argwhere(delta > 0)]


def overflow_positions(img, image_id, qf):
    """Rows for every spatial position with positive excess, plus the excess array."""
    delta = excess(spatial_blocks(img))
    return position_rows(delta, image_id, qf), delta


def cmd_overflow_stats(corpus_dir, qfs, output=None, summary_output=None, limit=None):
    """Overflow of each image in ``corpus_dir`` encoded at every QF in ``qfs``.

    Uncompressed sources (PNG, PGM, ...) are used as is; JPEGs are decoded
    first, which adds their own compression history. Returns
    ``(long_csv, summary_csv)``.
    """
    paths = list_images(corpus_dir)[:limit]
    long_rows, summary = [], []
    for path in paths:
        pixels = load_gray(path)
        for qf in qfs:
            img = encode_pixels(pixels, qf)
            rows, delta = overflow_positions(img, path.stem, qf)
            long_rows.extend(rows)
            omega = delta.sum(axis=(-2, -1))
            summary.append((path.stem, qf, int(omega.size), int(np.count_nonzero(omega)),
                            float(omega.sum()), float(delta.max(initial=0.0))))
    return (write_csv(long_rows, OVERFLOW_HEADER, output),
            write_csv(summary, OVERFLOW_SUMMARY_HEADER, summary_output))


# --------------------------------------------------------------------------
# Rounding Monte Carlo and ablation

def cmd_rounding_mc(qs, trials=1_000_000, seed=0, output=None):
    rows = []
    for q in qs:
        est = rounding_survival_probability(q, trials, seed)
        rows.append((q, est.probability, est.stderr, est.trials))
    return write_csv(rows, ["q", "probability", "stderr", "trials"], output)


@dataclass(frozen=True)
class AblationReport:
    """Per-coefficient ``|delta d~|`` (unquantized DCT change) caused by the channel."""

    flags: AblationFlags
    perturbation: np.ndarray  # (rows, cols, 8, 8)
    overflow_blocks: np.ndarray  # bool (rows, cols)

    @property
    def total(self):
        return float(self.perturbation.sum())

    def total_on_overflow(self):
        return float(self.perturbation[self.overflow_blocks].sum())

    def quantized_changes(self, q):
        """Fraction of positions where ``[delta / q]`` is nonzero."""
        steps = q.steps if hasattr(q, "steps") else np.asarray(q)
        return float(np.mean(np.abs(self.perturbation) / steps >= 0.5))

    def per_position(self):
        return self.perturbation.mean(axis=(0, 1))


def ablation_report(img, flags):
    s = spatial_blocks(img)
    delta = np.abs(dct2(channel_spatial(s, flags)) - dct2(s))
    return AblationReport(flags, delta, excess(s).sum(axis=(-2, -1)) > 0)


def cmd_ablate(img, target_qf, flags, output=None):
    """Per-position report of the decode-side perturbation and its quantized effect at ``target_qf``."""
    report = ablation_report(img, flags)
    steps = build_qtable(target_qf).steps
    rounded = np.abs(report.perturbation) / steps >= 0.5
    mean = report.per_position()
    rows = []
    for u in range(8):
        for v in range(8):
            rows.append((u, v, float(mean[u, v]),
                         float(report.perturbation[..., u, v].max(initial=0.0)),
                         float(rounded[..., u, v].mean())))
    return write_csv(rows, ["u", "v", "mean_abs_delta", "max_abs_delta", "changed_fraction"], output)


__all__ = [
    "AblationReport", "EvalRecord", "SweepConfig", "ablation_report", "cmd_ablate",
    "cmd_overflow_stats", "cmd_rounding_mc", "cmd_sweep", "evaluate_image",
    "overflow_positions", "position_rows", "run_sweep", "summarize", "worker_count", "write_csv",
]
