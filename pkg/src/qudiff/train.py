"""Reverse-order block training with the hybrid KL + L1 loss and Adam.

Blocks are trained one at a time from t = T down to 1. While block t trains,
everything else is frozen, so each sample's target latent and block input
are computed once per block and cached.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import grad_block
from .errors import LengthMismatch, NonFiniteLoss
from .reverse import DiffusionModel, init_model, sample_chain, save_checkpoint

EPS_FLOOR = 1e-10

_TAG_SHUFFLE = 108

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def _sum_normalize(v: np.ndarray) -> np.ndarray:
    w = np.asarray(v, dtype=float) + EPS_FLOOR
    return w / w.sum()


def hybrid_loss(x: np.ndarray, x_gen: np.ndarray, lambda_kl: float,
                lambda_l1: float) -> float:
    """KL between the floored sum-normalized latents plus plain L1 distance
    on the max-normalized latents."""
    if len(x) != len(x_gen):
        raise LengthMismatch(f"{len(x)} vs {len(x_gen)}")
    xh, yh = _sum_normalize(x), _sum_normalize(x_gen)
    kl = float(np.sum(xh * np.log(xh / yh)))
    l1 = float(np.sum(np.abs(np.asarray(x) - np.asarray(x_gen))))
    return lambda_kl * kl + lambda_l1 * l1


def hybrid_loss_adjoint(x: np.ndarray, lambda_kl: float, lambda_l1: float):
    """Closure mapping a generated latent to (loss, dL/d_latent).

    L1 subgradient at exact ties is 0; the KL term differentiates through
    the floored sum-renormalization of the generated side only."""
    x = np.asarray(x, dtype=float)
    xh = _sum_normalize(x)

    def f(x_gen: np.ndarray):
        loss = hybrid_loss(x, x_gen, lambda_kl, lambda_l1)
        s = float(np.sum(x_gen) + EPS_FLOOR * len(x_gen))
        yh = (x_gen + EPS_FLOOR) / s
        d_kl = (1.0 - xh / yh) / s
        d_l1 = -np.sign(x - x_gen)
        return loss, lambda_kl * d_kl + lambda_l1 * d_l1

    return f


def steplr(epoch: int, base_lr: float, step_size: int, gamma: float) -> float:
    return base_lr * gamma ** (epoch // step_size)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size))


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray,
              lr: float) -> np.ndarray:
    """Standard bias-corrected Adam; returns the updated parameters."""
    state.step += 1
    state.m = ADAM_BETA1 * state.m + (1 - ADAM_BETA1) * grads
    state.v = ADAM_BETA2 * state.v + (1 - ADAM_BETA2) * grads ** 2
    m_hat = state.m / (1 - ADAM_BETA1 ** state.step)
    v_hat = state.v / (1 - ADAM_BETA2 ** state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class TrainConfig:
    t_steps: int
    n: int
    n_a: int
    l0: int
    family: str
    schedule_kind: str
    lambda_s: float
    lambda_kl: float
    lambda_l1: float
    lr: float
    epochs_per_block: int
    batch_size: int
    lr_step: int
    lr_gamma: float
    master_seed: int
    scrambler_layers: int = 2
    init_scale: float = 1.0
    config_echo: dict | None = field(default=None, repr=False)


def _block_dataset(model: DiffusionModel, t_train: int, latents):
    """Per-sample (block input, target) pairs, fixed while block t trains:
    the forward chain supplies the target x_{t-1} and the frozen reverse
    chain carries x_T down to the trainable block's input."""
    pairs = []
    for i, x0 in enumerate(latents):
        chain = model.forward_chain(x0, sample_index=i)
        target = np.asarray(x0, dtype=float) if t_train == 1 \
            else chain[t_train - 2]
        x_in = sample_chain(chain[-1], model, down_to=t_train)
        pairs.append((x_in, target))
    return pairs


def train_block(model: DiffusionModel, t_train: int, latents,
                cfg: TrainConfig) -> list[float]:
    """Train block t_train in place; returns the per-epoch mean loss."""
    block = model.block(t_train)
    pairs = _block_dataset(model, t_train, latents)
    opt = AdamState.zeros(block.params.size)
    trace = []
    for epoch in range(cfg.epochs_per_block):
        rng = np.random.default_rng(
            [cfg.master_seed, _TAG_SHUFFLE, t_train, epoch])
        order = rng.permutation(len(pairs))
        lr = steplr(epoch, cfg.lr, cfg.lr_step, cfg.lr_gamma)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grad_sum = np.zeros(block.params.size)
            for i in batch:
                x_in, target = pairs[i]
                loss, grad = grad_block(
                    block.params, block, x_in,
                    hybrid_loss_adjoint(target, cfg.lambda_kl,
                                        cfg.lambda_l1))
                grad_sum += grad
                losses.append(loss)
            block.params = adam_step(opt, block.params,
                                     grad_sum / len(batch), lr)
        mean_loss = float(np.mean(losses))
        if not np.isfinite(mean_loss):
            raise NonFiniteLoss(
                f"block {t_train} epoch {epoch}: mean loss {mean_loss}")
        trace.append(mean_loss)
        model.epochs_completed[t_train - 1] = epoch + 1
    return trace


def train_model(cfg: TrainConfig, latents,
                checkpoint_path=None,
                resume_model: DiffusionModel | None = None):
    """Train all blocks from t = T down to 1; checkpoints after each block
    so a killed run resumes at the first incomplete block.

    Returns (model, {t: per-epoch loss trace})."""
    if resume_model is not None:
        model = resume_model
    else:
        model = init_model(cfg.n, cfg.n_a, cfg.t_steps, cfg.l0, cfg.family,
                           cfg.schedule_kind, cfg.lambda_s, cfg.master_seed,
                           scrambler_layers=cfg.scrambler_layers,
                           init_scale=cfg.init_scale,
                           config_echo=cfg.config_echo)
    traces = {}
    for t in range(cfg.t_steps, 0, -1):
        if model.epochs_completed[t - 1] >= cfg.epochs_per_block:
            continue
        traces[t] = train_block(model, t, latents, cfg)
        if checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path)
    return model, traces
