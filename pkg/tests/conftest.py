"""Shared fixtures: a small handwritten-digits corpus (8x8 grayscale),
IDX-encoded copies of it on disk, and a session-scoped trained toy model."""
from __future__ import annotations

import gzip

import numpy as np
import pytest
from sklearn.datasets import load_digits

from qudiff.forward import max_normalize
from qudiff.train import TrainConfig, train_model

TOY_CONFIG = TrainConfig(
    t_steps=4, n=6, n_a=2, l0=6, family="circuit1",
    schedule_kind="cosine", lambda_s=0.1, lambda_kl=0.5, lambda_l1=5.0,
    lr=0.1, epochs_per_block=10, batch_size=16, lr_step=10, lr_gamma=0.05,
    master_seed=7)


@pytest.fixture(scope="session")
def digits():
    """(images, labels): 8x8 uint8 images scaled to 0..255."""
    ds = load_digits()
    images = np.round(ds.images / 16.0 * 255.0).astype(np.uint8)
    return images, ds.target.astype(np.uint8)


def write_idx_pair(images, labels, images_path, labels_path):
    """Serialize (N, H, W) uint8 images + labels as big-endian IDX files."""
    n, h, w = images.shape
    img_blob = (np.array([2051, n, h, w], dtype=">u4").tobytes()
                + images.tobytes())
    lbl_blob = np.array([2049, n], dtype=">u4").tobytes() + labels.tobytes()
    for path, blob in ((images_path, img_blob), (labels_path, lbl_blob)):
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "wb") as f:
            f.write(blob)


@pytest.fixture(scope="session")
def digits_idx(digits, tmp_path_factory):
    """First 200 digits written as plain IDX files; returns the two paths."""
    images, labels = digits
    d = tmp_path_factory.mktemp("idx")
    paths = d / "images.idx", d / "labels.idx"
    write_idx_pair(images[:200], labels[:200], *paths)
    return paths


@pytest.fixture(scope="session")
def toy_latents():
    """64 class-0 digits as max-normalized 64-pixel latents (raw 0..16
    grayscale, no uint8 round trip)."""
    ds = load_digits()
    sel = ds.images[ds.target == 0][:64]
    return [max_normalize(im.reshape(-1) / 16.0) for im in sel]


@pytest.fixture(scope="session")
def toy_run(toy_latents, tmp_path_factory):
    """Trained toy model: (model, {t: loss trace}, checkpoint path)."""
    ckpt = tmp_path_factory.mktemp("toy") / "toy.qck"
    model, traces = train_model(TOY_CONFIG, toy_latents, checkpoint_path=ckpt)
    return model, traces, ckpt
