"""Desk corpus: deterministic grayscale crops re-encoded as QF-65 covers."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .jpeg_io import JpegError, PixelImage, read_jpeg, write_jpeg
from .transform import encode_pixels

SOURCES = (
    "camera", "moon", "brick", "grass", "gravel", "coins", "clock", "cell",
    "astronaut", "chelsea", "cat", "coffee", "rocket", "hubble_deep_field",
    "immunohistochemistry", "retina", "page",
)


def _source_images():
    import skimage.data
    from skimage.color import rgb2gray

    images = []
    for name in SOURCES:
        try:
            img = getattr(skimage.data, name)()
        except Exception:  # dataset not bundled with this skimage build
            continue
        if img.ndim == 3:
            img = np.round(rgb2gray(img[..., :3]) * 255)
        images.append((name, np.asarray(img, dtype=np.uint8)))
    return images


def crop_pixels(n, size=256, seed=0):
    """``n`` deterministic ``size x size`` crops as (name, uint8 array) pairs."""
    rng = np.random.default_rng(seed)
    sources = [(name, img) for name, img in _source_images()
               if img.shape[0] >= size and img.shape[1] >= size]
    if not sources:
        raise RuntimeError("no bundled source images large enough for the corpus")
    out = []
    for k in range(n):
        name, img = sources[k % len(sources)]
        y = int(rng.integers(0, img.shape[0] - size + 1))
        x = int(rng.integers(0, img.shape[1] - size + 1))
        out.append((f"{k:03d}_{name}", img[y:y + size, x:x + size]))
    return out


def build_desk_corpus(out_dir, n=50, size=256, quality_factor=65, seed=0, raw_dir=None):
    """Write ``n`` cover JPEGs to ``out_dir``; existing files are reused.

    With ``raw_dir`` the uncompressed crops are also saved there as PNG.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if raw_dir is not None:
        from PIL import Image

        raw_dir = Path(raw_dir)
        raw_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, px in crop_pixels(n, size, seed):
        path = out_dir / f"{name}.jpg"
        if not path.exists():
            write_jpeg(encode_pixels(PixelImage.from_array(px), quality_factor), path)
        if raw_dir is not None and not (raw_dir / f"{name}.png").exists():
            Image.fromarray(px).save(raw_dir / f"{name}.png")
        paths.append(path)
    return paths


def convert_directory(src_dir, out_dir, quality_factor=65):
    """Re-encode every readable grayscale JPEG/PGM/PNG in ``src_dir`` at ``quality_factor``."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for src in list_images(src_dir):
        try:
            px = load_gray(src)
        except JpegError:  # colour or progressive: let Pillow decode it
            px = np.asarray(Image.open(src).convert("L"))
        path = out_dir / (src.stem + ".jpg")
        write_jpeg(encode_pixels(PixelImage.from_array(px), quality_factor), path)
        paths.append(path)
    return paths


RAW_SUFFIXES = (".png", ".pgm", ".pnm", ".bmp", ".tif", ".tiff")


def load_gray(path):
    """Grayscale pixels of a JPEG (decoded here) or an uncompressed image file."""
    path = Path(path)
    if path.suffix.lower() in (".jpg", ".jpeg"):
        from .jpeg_io import decode_to_pixels

        return decode_to_pixels(read_jpeg(path)).cropped()
    from PIL import Image

    return np.asarray(Image.open(path).convert("L"))


def list_images(directory):
    """JPEG and uncompressed image files in ``directory``, sorted by name."""
    return sorted(p for p in Path(directory).iterdir()
                  if p.suffix.lower() in RAW_SUFFIXES + (".jpg", ".jpeg"))


def list_corpus(corpus_dir):
    return sorted(p for p in Path(corpus_dir).iterdir() if p.suffix.lower() in (".jpg", ".jpeg"))
