"""Command-line driver: config validation, artifacts, and exit codes."""
import copy
import json

import numpy as np
import pytest
import yaml

from qudiff import cli
from qudiff.errors import ConfigError


def base_config(digits_idx):
    return {
        "model": {"n": 6, "n_ancilla": 1, "t_steps": 2, "l0": 1,
                  "family": "circuit1", "scrambler_layers": 2},
        "schedule": {"kind": "cosine", "lambda_s": 0.1},
        "loss": {"lambda_kl": 0.5, "lambda_l1": 5.0},
        "optim": {"lr": 0.05, "epochs_per_block": 1, "batch_size": 8,
                  "lr_step": 10, "lr_gamma": 0.5},
        "data": {"images": str(digits_idx[0]), "labels": str(digits_idx[1]),
                 "class": 0, "resize": 8},
        "seed": 3,
    }


def write_config(cfg, path):
    with open(path, "w") as f:
        yaml.safe_dump(cfg, f)
    return str(path)


@pytest.fixture
def cfg_path(digits_idx, tmp_path):
    return write_config(base_config(digits_idx), tmp_path / "config.yaml")


# ---------------------------------------------------------------------------
# config validation

def test_load_config_accepts_valid(digits_idx, tmp_path):
    cfg = cli.load_config(write_config(base_config(digits_idx),
                                       tmp_path / "c.yaml"))
    assert cfg["model"]["scrambler_layers"] == 2
    assert cli.to_train_config(cfg).t_steps == 2


def test_load_config_defaults_scrambler_layers(digits_idx, tmp_path):
    raw = base_config(digits_idx)
    del raw["model"]["scrambler_layers"]
    cfg = cli.load_config(write_config(raw, tmp_path / "c.yaml"))
    assert cfg["model"]["scrambler_layers"] == 2


@pytest.mark.parametrize("mutate,fragment", [
    (lambda c: c["model"].update(family="circuit9"), "model.family"),
    (lambda c: c["model"].update(n=0), "model.n"),
    (lambda c: c["schedule"].update(kind="exp"), "schedule.kind"),
    (lambda c: c["schedule"].update(lambda_s=1.5), "schedule.lambda_s"),
    (lambda c: c["optim"].update(lr=0), "optim.lr"),
    (lambda c: c["optim"].update(lr="fast"), "optim.lr"),
    (lambda c: c["data"].update(resize=9), "data.resize"),
    (lambda c: c["data"].update(clazz=1), "data.clazz"),
    (lambda c: c["model"].pop("t_steps"), "model.t_steps"),
    (lambda c: c.pop("loss"), "loss"),
    (lambda c: c.update(extra={}), "extra"),
    (lambda c: c.pop("seed"), "seed"),
    (lambda c: c["model"].update(n=8), "resize"),  # 2^8 != 8x8 pixels
])
def test_load_config_rejects_with_key_path(digits_idx, tmp_path, mutate,
                                           fragment):
    raw = copy.deepcopy(base_config(digits_idx))
    mutate(raw)
    with pytest.raises(ConfigError, match=fragment.replace(".", r"\.")):
        cli.load_config(write_config(raw, tmp_path / "bad.yaml"))


def test_load_config_28_needs_ten_qubits(digits_idx, tmp_path):
    raw = base_config(digits_idx)
    raw["data"]["resize"] = 28
    raw["model"]["n"] = 10
    cfg = cli.load_config(write_config(raw, tmp_path / "c.yaml"))
    assert cfg["model"]["n"] == 10
    raw["model"]["n"] = 9
    with pytest.raises(ConfigError):
        cli.load_config(write_config(raw, tmp_path / "c2.yaml"))


def test_load_latents_pads_28_to_register(digits_idx, tmp_path):
    raw = base_config(digits_idx)
    raw["data"]["resize"] = 28
    raw["model"]["n"] = 10
    cfg = cli.load_config(write_config(raw, tmp_path / "c.yaml"))
    latents = cli.load_latents(cfg, limit=2)
    assert all(x.shape == (1024,) for x in latents)
    assert all(np.all(x[784:] == 0) for x in latents)


def test_config_hash_is_order_insensitive(digits_idx):
    a = base_config(digits_idx)
    b = {k: a[k] for k in reversed(list(a))}
    assert cli.config_hash(a) == cli.config_hash(b)
    b["seed"] = 4
    assert cli.config_hash(a) != cli.config_hash(b)


# ---------------------------------------------------------------------------
# subcommands and exit codes

def test_train_writes_artifacts(cfg_path, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train", "--config", cfg_path,
                     "--out", str(out)]) == 0
    assert (out / "checkpoint.qck").exists()
    lines = (out / "loss.csv").read_text().splitlines()
    assert lines[0] == "block,epoch,loss"
    assert len(lines) == 3  # two blocks x one epoch
    meta = json.loads((out / "run_meta.json").read_text())
    # circuit1 on 7 qubits: block depths 2 and 3 give 42 + 63 parameters
    assert meta["seed"] == 3 and meta["total_params"] == 105


def test_train_rerun_resumes_completed_checkpoint(cfg_path, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train", "--config", cfg_path, "--out", str(out)]) == 0
    first = (out / "checkpoint.qck").read_bytes()
    # second run over the same directory finds all blocks complete
    assert cli.main(["train", "--config", cfg_path, "--out", str(out)]) == 0
    assert (out / "checkpoint.qck").read_bytes() == first


def test_sample_writes_artifacts(cfg_path, tmp_path):
    run = tmp_path / "run"
    cli.main(["train", "--config", cfg_path, "--out", str(run)])
    out = tmp_path / "samples"
    assert cli.main(["sample", "--checkpoint",
                     str(run / "checkpoint.qck"), "--out", str(out),
                     "--count", "4", "--seed", "9"]) == 0
    assert (out / "samples.png").exists()
    rows = (out / "latents.csv").read_text().splitlines()
    assert len(rows) == 4 and len(rows[0].split(",")) == 64
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["count"] == 4 and meta["shots"] is None


def test_entropy_and_ablate_commands(cfg_path, tmp_path):
    out = tmp_path / "ent"
    assert cli.main(["entropy", "--config", cfg_path, "--out", str(out),
                     "--count", "3", "--variants", "qsc,iusp"]) == 0
    text = (out / "entropy.csv").read_text()
    assert "qsc" in text and "iusp" in text
    assert not (out / "forward_qsc.png").exists()

    out2 = tmp_path / "abl"
    assert cli.main(["ablate-forward", "--config", cfg_path,
                     "--out", str(out2), "--count", "3",
                     "--variants", "qsc"]) == 0
    assert (out2 / "forward_qsc.png").exists()


def test_shots_command(cfg_path, tmp_path):
    run = tmp_path / "run"
    cli.main(["train", "--config", cfg_path, "--out", str(run)])
    out = tmp_path / "shots"
    assert cli.main(["shots", "--checkpoint", str(run / "checkpoint.qck"),
                     "--out", str(out), "--grid", "16,64", "--count",
                     "2"]) == 0
    rows = (out / "shots.csv").read_text().splitlines()
    assert rows[0] == "shots,mean_l2" and len(rows) == 3
    assert (out / "shots_16.png").exists()
    assert (out / "shots_analytic.png").exists()


def test_exit_code_config_error(digits_idx, tmp_path, capsys):
    raw = base_config(digits_idx)
    raw["model"]["family"] = "nope"
    path = write_config(raw, tmp_path / "bad.yaml")
    assert cli.main(["train", "--config", path,
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "model.family" in capsys.readouterr().err


def test_exit_code_data_error(digits_idx, tmp_path, capsys):
    raw = base_config(digits_idx)
    bogus = tmp_path / "nothere.idx"
    raw["data"]["images"] = str(bogus)
    path = write_config(raw, tmp_path / "c.yaml")
    assert cli.main(["train", "--config", path,
                     "--out", str(tmp_path / "o")]) == cli.EXIT_DATA

    junk = tmp_path / "junk.qck"
    junk.write_bytes(b"garbage!" * 4)
    assert cli.main(["sample", "--checkpoint", str(junk),
                     "--out", str(tmp_path / "s")]) == cli.EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_exit_code_numeric_error(cfg_path, tmp_path, monkeypatch):
    import qudiff.cli as cli_mod
    from qudiff.errors import NonFiniteLoss

    def boom(*a, **k):
        raise NonFiniteLoss("diverged")

    monkeypatch.setattr(cli_mod, "train_model", boom)
    assert cli.main(["train", "--config", cfg_path,
                     "--out", str(tmp_path / "o")]) == cli.EXIT_NUMERIC
