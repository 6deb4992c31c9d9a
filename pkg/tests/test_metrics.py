"""Entropy traces, shot-convergence study, and image export."""
import csv

import numpy as np
import pytest
from PIL import Image

from qudiff import metrics
from qudiff.circuits import make_scrambler
from qudiff.errors import BadKind
from qudiff.forward import max_normalize
from qudiff.reverse import init_model
from qudiff.schedule import make_schedule


def test_shannon_entropy_uniform():
    assert abs(metrics.shannon_entropy(np.full(256, 1.0)) - 8.0) < 1e-9


def test_shannon_entropy_two_equal_atoms():
    assert abs(metrics.shannon_entropy(np.array([0.5, 0.5])) - 1.0) < 1e-9
    # zero entries only contribute through the 1e-10 floor
    h = metrics.shannon_entropy(np.array([0.5, 0.5, 0.0, 0.0]))
    assert abs(h - 1.0) < 1e-6


def test_shannon_entropy_concentrated():
    h = metrics.shannon_entropy(np.array([1.0] + [0.0] * 255))
    assert 0.0 <= h < 1e-5


def test_shannon_entropy_scale_invariant():
    x = np.random.default_rng(0).uniform(0.1, 1, 64)
    assert abs(metrics.shannon_entropy(x)
               - metrics.shannon_entropy(10 * x)) < 1e-9


def small_setup(seed=3, t_steps=4):
    sched = make_schedule("cosine", t_steps, 0.2, seed)
    scram = make_scrambler(seed, t_steps, 2, layers=2)
    rng = np.random.default_rng(seed)
    latents = [max_normalize(rng.uniform(0.1, 1, 4)) for _ in range(3)]
    return latents, sched, scram


def test_entropy_report_structure():
    latents, sched, scram = small_setup()
    rep = metrics.entropy_report(latents, sched, scram, master_seed=3)
    assert set(rep) == set(metrics.FORWARD_VARIANTS)
    for trace in rep.values():
        assert trace.shape == (5,)  # steps 0..T
        assert np.all(trace >= 0) and np.all(trace <= 2.0 + 1e-9)
    # step 0 is the clean-data entropy, identical across variants
    starts = {v: rep[v][0] for v in rep}
    assert len({round(s, 12) for s in starts.values()}) == 1


def test_entropy_report_unknown_variant():
    latents, sched, scram = small_setup()
    with pytest.raises(BadKind):
        metrics.entropy_report(latents, sched, scram, master_seed=3,
                               variants=("qsc", "bogus"))


def test_write_entropy_csv(tmp_path):
    latents, sched, scram = small_setup()
    rep = metrics.entropy_report(latents, sched, scram, master_seed=3,
                                 variants=("qsc",))
    path = tmp_path / "entropy.csv"
    metrics.write_entropy_csv(rep, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["step", "variant", "entropy_bits"]
    assert len(rows) == 1 + 5
    assert rows[1][:2] == ["0", "qsc"]


def tiny_model():
    return init_model(n=2, n_a=1, t_steps=2, l0=1, family="circuit1",
                     schedule_kind="cosine", lambda_s=0.2, master_seed=5)


def test_shot_study_reproducible_and_infinite_sentinel():
    model = tiny_model()
    grid = [16, 256, np.inf]
    a, analytic_a, images = metrics.shot_study(model, 3, grid, seed=1)
    b, analytic_b, _ = metrics.shot_study(model, 3, grid, seed=1)
    assert a == b
    for xa, xb in zip(analytic_a, analytic_b):
        np.testing.assert_array_equal(xa, xb)
    assert a[np.inf] == 0.0  # infinite shots coincide with analytic readout
    assert a[16] > 0.0 and a[256] > 0.0
    assert len(images[16]) == 3


def test_write_shots_csv(tmp_path):
    path = tmp_path / "shots.csv"
    metrics.write_shots_csv({32: 0.5, 8: 1.25}, path)
    rows = list(csv.reader(open(path)))
    assert rows == [["shots", "mean_l2"], ["8", "1.25"], ["32", "0.5"]]


def test_export_grid_pixel_values(tmp_path):
    latents = [np.array([1.0, 0.0, 0.5, 1.0]),
               np.array([0.0, 1.0, 1.0, 0.0])]
    path = tmp_path / "grid.png"
    metrics.export_grid(latents, 2, path)
    img = np.asarray(Image.open(path))
    # 1 row x 2 cols of 2x2 tiles with a 2px gap
    assert img.shape == (2, 6)
    np.testing.assert_array_equal(img[:, :2], [[255, 0], [128, 255]])
    np.testing.assert_array_equal(img[:, 2:4], 0)  # the gap
    np.testing.assert_array_equal(img[:, 4:], [[0, 255], [255, 0]])


def test_export_grid_square_layout(tmp_path):
    latents = [np.full(4, 1.0)] * 9
    path = tmp_path / "grid9.png"
    metrics.export_grid(latents, 2, path)
    img = np.asarray(Image.open(path))
    assert img.shape == (10, 10)  # 3x3 tiles of side 2, two 2px gaps


def test_export_grid_crops_padded_latents(tmp_path):
    # latents longer than side^2 (zero-padded registers) use the prefix
    latents = [np.concatenate([np.full(4, 1.0), np.zeros(4)])]
    path = tmp_path / "pad.png"
    metrics.export_grid(latents, 2, path)
    np.testing.assert_array_equal(np.asarray(Image.open(path)),
                                  np.full((2, 2), 255))
