"""IDX dataset ingestion, class filtering, box-filter resizing, and
conversion of images to latents."""
from __future__ import annotations

import gzip
from dataclasses import dataclass

import numpy as np

from .errors import AllZero, BadMagic, CountMismatch, TruncatedFile
from .forward import max_normalize

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


@dataclass
class ImageDataset:
    images: np.ndarray  # (N, H, W) uint8
    labels: np.ndarray  # (N,) int

    def __len__(self) -> int:
        return len(self.images)

    def filter_class(self, cls: int) -> "ImageDataset":
        mask = self.labels == cls
        return ImageDataset(images=self.images[mask],
                            labels=self.labels[mask])


def _read_bytes(path) -> bytes:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def load_idx(images_path, labels_path) -> ImageDataset:
    """Parse big-endian IDX image/label files (gzip by extension)."""
    raw = _read_bytes(images_path)
    if len(raw) < 16:
        raise TruncatedFile(f"{images_path}: header truncated")
    magic, n, h, w = np.frombuffer(raw[:16], dtype=">u4")
    if magic != IMAGE_MAGIC:
        raise BadMagic(f"{images_path}: magic {magic}, expected {IMAGE_MAGIC}")
    if len(raw) < 16 + n * h * w:
        raise TruncatedFile(f"{images_path}: payload shorter than {n}x{h}x{w}")
    images = np.frombuffer(raw[16:16 + n * h * w],
                           dtype=np.uint8).reshape(int(n), int(h), int(w))

    raw = _read_bytes(labels_path)
    if len(raw) < 8:
        raise TruncatedFile(f"{labels_path}: header truncated")
    magic, m = np.frombuffer(raw[:8], dtype=">u4")
    if magic != LABEL_MAGIC:
        raise BadMagic(f"{labels_path}: magic {magic}, expected {LABEL_MAGIC}")
    if len(raw) < 8 + m:
        raise TruncatedFile(f"{labels_path}: payload shorter than {m}")
    labels = np.frombuffer(raw[8:8 + m], dtype=np.uint8).astype(int)

    if n != m:
        raise CountMismatch(f"{n} images but {m} labels")
    return ImageDataset(images=images, labels=labels)


def _box_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) area-overlap weights; each row sums to 1."""
    w = np.zeros((dst, src))
    scale = src / dst
    for i in range(dst):
        lo, hi = i * scale, (i + 1) * scale
        for j in range(int(np.floor(lo)), int(np.ceil(hi))):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def resize(img: np.ndarray, side: int) -> np.ndarray:
    """Area-weighted box filter resize to side x side (float output)."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    return _box_weights(h, side) @ img @ _box_weights(w, side).T


def to_latent(img: np.ndarray) -> np.ndarray:
    """Scale pixels to [0,1], flatten row-major, max-normalize."""
    v = np.asarray(img, dtype=float).reshape(-1) / 255.0
    if v.max() <= 0.0:
        raise AllZero("all-zero image cannot become a latent")
    return max_normalize(v)


def class_latents(ds: ImageDataset, cls: int, side: int,
                  limit: int | None = None) -> list[np.ndarray]:
    """First-N latents of one class in file order; all-zero images are
    skipped (they have no amplitude encoding)."""
    sub = ds.filter_class(cls)
    out = []
    for img in sub.images:
        small = resize(img, side) if img.shape != (side, side) else img
        if np.asarray(small, dtype=float).max() <= 0.0:
            continue
        out.append(to_latent(small))
        if limit is not None and len(out) >= limit:
            break
    return out
