"""Command-line driver: train, sample, ablate-forward, shots, entropy."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import data, metrics
from .circuits import FAMILIES
from .errors import (BadMagic, CheckpointError, ConfigError, CountMismatch,
                     NonFiniteLoss, QudiffError, TruncatedFile)
from .reverse import load_checkpoint, make_init, sample_chain
from .schedule import SCHEDULE_KINDS
from .train import TrainConfig, train_model

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULT_SHOT_GRID = [2 ** k for k in range(5, 15)]

# key -> (type, required, validator, message)
_SCHEMA = {
    "model": {
        "n": (int, lambda v: v >= 1, ">= 1"),
        "n_ancilla": (int, lambda v: v >= 0, ">= 0"),
        "t_steps": (int, lambda v: v >= 1, ">= 1"),
        "l0": (int, lambda v: v >= 0, ">= 0"),
        "family": (str, lambda v: v in FAMILIES, f"one of {FAMILIES}"),
        "scrambler_layers": (int, lambda v: v >= 0, ">= 0"),
    },
    "schedule": {
        "kind": (str, lambda v: v in SCHEDULE_KINDS,
                 f"one of {SCHEDULE_KINDS}"),
        "lambda_s": ((int, float), lambda v: 0.0 <= v <= 1.0, "in [0,1]"),
    },
    "loss": {
        "lambda_kl": ((int, float), lambda v: v >= 0, ">= 0"),
        "lambda_l1": ((int, float), lambda v: v >= 0, ">= 0"),
    },
    "optim": {
        "lr": ((int, float), lambda v: v > 0, "> 0"),
        "epochs_per_block": (int, lambda v: v >= 1, ">= 1"),
        "batch_size": (int, lambda v: v >= 1, ">= 1"),
        "lr_step": (int, lambda v: v >= 1, ">= 1"),
        "lr_gamma": ((int, float), lambda v: v > 0, "> 0"),
    },
    "data": {
        "images": (str, lambda v: True, ""),
        "labels": (str, lambda v: True, ""),
        "class": (int, lambda v: 0 <= v <= 9, "in 0..9"),
        "resize": (int, lambda v: v in (8, 16, 28), "one of (8, 16, 28)"),
    },
}
_OPTIONAL = {("model", "scrambler_layers")}


def load_config(path) -> dict:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = dict(raw)
    for section, fields in _SCHEMA.items():
        if section not in cfg:
            raise ConfigError(f"missing section {section!r}")
        sub = cfg[section]
        if not isinstance(sub, dict):
            raise ConfigError(f"{section}: must be a mapping")
        for key in sub:
            if key not in fields:
                raise ConfigError(f"unknown key {section}.{key}")
        for key, (typ, check, msg) in fields.items():
            if key not in sub:
                if (section, key) in _OPTIONAL:
                    continue
                raise ConfigError(f"missing key {section}.{key}")
            val = sub[key]
            if not isinstance(val, typ) or isinstance(val, bool):
                raise ConfigError(f"{section}.{key}: bad type "
                                  f"{type(val).__name__}")
            if not check(val):
                raise ConfigError(f"{section}.{key}: must be {msg}")
    for key in cfg:
        if key not in (*_SCHEMA, "seed"):
            raise ConfigError(f"unknown key {key}")
    if "seed" not in cfg or not isinstance(cfg["seed"], int):
        raise ConfigError("seed: required integer")
    # the register must be the smallest one holding resize^2 pixels
    # (8 -> n=6 and 16 -> n=8 exactly; 28 -> n=10 with zero padding)
    pixels, dim = cfg["data"]["resize"] ** 2, 1 << cfg["model"]["n"]
    if not pixels <= dim < 2 * pixels:
        raise ConfigError(
            f"model.n={cfg['model']['n']} inconsistent with "
            f"data.resize={cfg['data']['resize']} "
            f"(need 2^n to be the smallest power of two >= resize^2)")
    cfg["model"].setdefault("scrambler_layers", 2)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def to_train_config(cfg: dict) -> TrainConfig:
    m, s, l, o = cfg["model"], cfg["schedule"], cfg["loss"], cfg["optim"]
    return TrainConfig(
        t_steps=m["t_steps"], n=m["n"], n_a=m["n_ancilla"], l0=m["l0"],
        family=m["family"], schedule_kind=s["kind"],
        lambda_s=float(s["lambda_s"]), lambda_kl=float(l["lambda_kl"]),
        lambda_l1=float(l["lambda_l1"]), lr=float(o["lr"]),
        epochs_per_block=o["epochs_per_block"], batch_size=o["batch_size"],
        lr_step=o["lr_step"], lr_gamma=float(o["lr_gamma"]),
        master_seed=cfg["seed"], scrambler_layers=m["scrambler_layers"],
        config_echo=cfg)


def load_latents(cfg: dict, limit: int | None = 1000):
    d = cfg["data"]
    ds = data.load_idx(d["images"], d["labels"])
    latents = data.class_latents(ds, d["class"], d["resize"], limit=limit)
    if not latents:
        raise CountMismatch(f"no usable samples for class {d['class']}")
    dim = 1 << cfg["model"]["n"]
    if len(latents[0]) != dim:  # 28x28 pads with zeros up to the register
        latents = [np.pad(x, (0, dim - len(x))) for x in latents]
    return latents


def write_sidecar(out_dir: Path, name: str, cfg: dict | None, seed,
                  extra: dict | None = None) -> None:
    meta = {"config_sha256": config_hash(cfg) if cfg else None, "seed": seed}
    if extra:
        meta.update(extra)
    with open(out_dir / name, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    latents = load_latents(cfg)
    tcfg = to_train_config(cfg)
    ckpt = out / "checkpoint.qck"
    resume = None
    if ckpt.exists():  # resume an interrupted run of the same config
        prior = load_checkpoint(ckpt)
        if prior.config_echo == cfg:
            resume = prior
    model, traces = train_model(tcfg, latents, checkpoint_path=ckpt,
                                resume_model=resume)
    with open(out / "loss.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["block", "epoch", "loss"])
        for t in sorted(traces, reverse=True):
            for epoch, loss in enumerate(traces[t]):
                w.writerow([t, epoch, f"{loss:.12g}"])
    write_sidecar(out, "run_meta.json", cfg, cfg["seed"],
                  {"total_params": model.total_param_count()})
    return 0


def cmd_sample(args) -> int:
    model = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    side = 1 << (model.n // 2)
    latents = []
    for i in range(args.count):
        init = make_init("noise", model,
                         rng=np.random.default_rng([args.seed, 202, i]))
        latents.append(sample_chain(init, model, shots=args.shots,
                                    seed=(args.seed, i)))
    metrics.export_grid(latents, side, out / "samples.png")
    with open(out / "latents.csv", "w", newline="") as f:
        w = csv.writer(f)
        for x in latents:
            w.writerow([f"{v:.12g}" for v in x])
    write_sidecar(out, "run_meta.json", model.config_echo, args.seed,
                  {"shots": args.shots, "count": args.count})
    return 0


def _forward_report(args, with_grids: bool) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    variants = [v.strip() for v in args.variants.split(",")]
    latents = load_latents(cfg, limit=args.count)
    tcfg = to_train_config(cfg)
    from .circuits import make_scrambler
    from .schedule import make_schedule
    sched = make_schedule(tcfg.schedule_kind, tcfg.t_steps, tcfg.lambda_s,
                          tcfg.master_seed)
    scram = make_scrambler(tcfg.master_seed, tcfg.t_steps, tcfg.n,
                           tcfg.scrambler_layers)
    report = metrics.entropy_report(latents, sched, scram, tcfg.master_seed,
                                    variants=variants)
    metrics.write_entropy_csv(report, out / "entropy.csv")
    if with_grids:
        side = 1 << (tcfg.n // 2)
        for variant in variants:
            chain = metrics._variant_chain(
                variant, latents[0], sched, scram, tcfg.scrambler_layers,
                tcfg.master_seed, 0)
            metrics.export_grid([latents[0]] + chain, side,
                                out / f"forward_{variant}.png")
    write_sidecar(out, "run_meta.json", cfg, cfg["seed"],
                  {"variants": variants})
    return 0


def cmd_ablate_forward(args) -> int:
    return _forward_report(args, with_grids=True)


def cmd_entropy(args) -> int:
    return _forward_report(args, with_grids=False)


def cmd_shots(args) -> int:
    model = load_checkpoint(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = [int(s) for s in args.grid.split(",")] if args.grid \
        else DEFAULT_SHOT_GRID
    curves, analytic, images = metrics.shot_study(model, args.count, grid,
                                                  seed=args.seed)
    metrics.write_shots_csv(curves, out / "shots.csv")
    side = 1 << (model.n // 2)
    metrics.export_grid(analytic, side, out / "shots_analytic.png")
    for shots, gen in images.items():
        metrics.export_grid(gen, side, out / f"shots_{shots}.png")
    write_sidecar(out, "run_meta.json", model.config_echo, args.seed,
                  {"shot_grid": grid, "count": args.count})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qudiff",
                                description="quantum diffusion engine")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (results are thread-count invariant)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    s = sub.add_parser("sample", help="generate images from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, default=25)
    s.add_argument("--shots", type=int, default=None,
                   help="finite shot count; omit for analytic readout")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_sample)

    a = sub.add_parser("ablate-forward",
                       help="entropy traces + degradation grids per variant")
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--variants", default="qsc,cdp,iusp,gusp")
    a.add_argument("--count", type=int, default=20)
    a.set_defaults(fn=cmd_ablate_forward)

    e = sub.add_parser("entropy", help="entropy traces only")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--variants", default="qsc,cdp,iusp,gusp")
    e.add_argument("--count", type=int, default=20)
    e.set_defaults(fn=cmd_entropy)

    h = sub.add_parser("shots", help="finite-shot convergence study")
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--grid", default=None,
                   help="comma-separated shot counts (default 2^5..2^14)")
    h.add_argument("--count", type=int, default=20)
    h.add_argument("--seed", type=int, default=0)
    h.set_defaults(fn=cmd_shots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (BadMagic, TruncatedFile, CountMismatch, CheckpointError,
            FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteLoss as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except QudiffError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
