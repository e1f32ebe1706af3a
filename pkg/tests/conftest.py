import os
from pathlib import Path

import numpy as np
import pytest

from roast.corpus import build_desk_corpus
from roast.jpeg_io import build_qtable, read_jpeg
from roast.transform import encode_pixels

CORPUS_SIZE = 50


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """The 50-image QF-65 desk corpus (``ROAST_CORPUS`` overrides the location)."""
    env = os.environ.get("ROAST_CORPUS")
    out = Path(env) if env else tmp_path_factory.mktemp("corpus")
    build_desk_corpus(out, n=CORPUS_SIZE, raw_dir=out / "raw")
    return out


@pytest.fixture(scope="session")
def raw_dir(corpus_dir):
    return corpus_dir / "raw"


@pytest.fixture(scope="session")
def corpus_paths(corpus_dir):
    return sorted(corpus_dir.glob("*.jpg"))[:CORPUS_SIZE]


@pytest.fixture(scope="session")
def corpus_images(corpus_paths):
    return [read_jpeg(p) for p in corpus_paths]


@pytest.fixture(scope="session")
def camera_cover(corpus_images):
    return corpus_images[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def q65():
    return build_qtable(65)


def synthetic_cover(seed=0, shape=(64, 64), qf=65, amplitude=60):
    """Smooth random texture encoded as a cover JPEG (no files touched)."""
    r = np.random.default_rng(seed)
    y, x = np.mgrid[:shape[0], :shape[1]]
    px = 128 + amplitude * np.sin(x / 5.0 + r.random() * 6) * np.cos(y / 7.0)
    px = px + r.normal(0, 12, shape)
    return encode_pixels(np.clip(np.round(px), 0, 255).astype(np.uint8), qf)


@pytest.fixture(scope="session")
def sweep_cache(corpus_dir):
    """Memoized corpus sweeps keyed by (scheme, params, payloads, channel QFs, limit)."""
    from roast.harness import SweepConfig, run_sweep

    cache = {}

    def get(scheme, payloads, qfs, limit=None, **params):
        key = (scheme, tuple(sorted(params.items())), tuple(payloads), tuple(qfs), limit)
        if key not in cache:
            cfg = SweepConfig(str(corpus_dir), list(payloads), list(qfs), scheme, params,
                              limit=limit)
            cache[key] = run_sweep(cfg)
        return cache[key]

    return get


# Acceptance results, printed as one line per criterion at the end of the run.
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
