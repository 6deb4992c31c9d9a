"""Diagnostics: entropy traces of the forward variants, finite-shot
convergence curves, and grayscale grid export."""
from __future__ import annotations

import csv
import math

import numpy as np
from PIL import Image

from . import forward
from .errors import BadKind
from .reverse import DiffusionModel, make_init, sample_chain
from .train import _sum_normalize

FORWARD_VARIANTS = ("qsc", "cdp", "iusp", "gusp")


def shannon_entropy(x: np.ndarray) -> float:
    """Entropy in bits of the sum-normalized, floored latent."""
    p = _sum_normalize(x)
    return float(-np.sum(p * np.log2(p)))


def _variant_chain(variant, x0, schedule, scrambler, layers, master_seed,
                   sample_index):
    if variant == "qsc":
        return forward.qsc_chain(x0, schedule, scrambler, master_seed,
                                 sample_index)
    if variant == "cdp":
        return forward.cdp_chain(x0, schedule, master_seed, sample_index)
    if variant == "iusp":
        return forward.iusp_chain(x0, schedule.t_steps, layers, master_seed,
                                  sample_index)
    if variant == "gusp":
        return forward.gusp_chain(x0, schedule, layers, master_seed,
                                  sample_index)
    raise BadKind(f"unknown forward variant {variant!r}")


def entropy_report(latents, schedule, scrambler, master_seed: int,
                   variants=FORWARD_VARIANTS,
                   layers: int | None = None) -> dict[str, np.ndarray]:
    """Per-variant mean entropy over steps 0..T across the given samples."""
    if layers is None:
        layers = scrambler.layers
    report = {}
    for variant in variants:
        traces = []
        for i, x0 in enumerate(latents):
            chain = _variant_chain(variant, x0, schedule, scrambler, layers,
                                   master_seed, i)
            traces.append([shannon_entropy(x0)]
                          + [shannon_entropy(x) for x in chain])
        report[variant] = np.mean(traces, axis=0)
    return report


def write_entropy_csv(report: dict[str, np.ndarray], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "variant", "entropy_bits"])
        for variant in sorted(report):
            for step, h in enumerate(report[variant]):
                w.writerow([step, variant, f"{h:.12g}"])


def shot_study(model: DiffusionModel, num_images: int, shot_grid,
               seed: int = 0):
    """Mean pixel-wise L2 between finite-shot and analytic generations,
    per shot count, regenerating each image from identical inits.

    Returns (per-count mean L2 dict, analytic latents, per-count latents)."""
    inits = [make_init("noise", model,
                       rng=np.random.default_rng([seed, 201, i]))
             for i in range(num_images)]
    analytic = [sample_chain(x, model) for x in inits]
    curves = {}
    images = {}
    n_pix = 1 << model.n
    for shots in shot_grid:
        if shots is None or not np.isfinite(shots):
            curves[shots], images[shots] = 0.0, analytic
            continue
        gen = [sample_chain(inits[i], model, shots=int(shots), seed=i)
               for i in range(num_images)]
        images[int(shots)] = gen
        curves[int(shots)] = float(np.mean(
            [np.linalg.norm(g - a) / n_pix for g, a in zip(gen, analytic)]))
    return curves, analytic, images


def write_shots_csv(curves: dict[int, float], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["shots", "mean_l2"])
        for shots in sorted(curves):
            w.writerow([shots, f"{curves[shots]:.12g}"])


def export_grid(latents, side: int, path, gap: int = 2) -> None:
    """Tile latents as side x side grayscale images into one PNG,
    separated by gap-pixel black borders."""
    tiles = [np.asarray(np.round(
        np.asarray(x, dtype=float)[:side * side].reshape(side, side) * 255.0),
        dtype=np.uint8) for x in latents]
    cols = math.ceil(math.sqrt(len(tiles)))
    rows = math.ceil(len(tiles) / cols)
    canvas = np.zeros((rows * side + (rows - 1) * gap,
                       cols * side + (cols - 1) * gap), dtype=np.uint8)
    for k, tile in enumerate(tiles):
        r, c = divmod(k, cols)
        y, x = r * (side + gap), c * (side + gap)
        canvas[y:y + side, x:x + side] = tile
    Image.fromarray(canvas, mode="L").save(path)
