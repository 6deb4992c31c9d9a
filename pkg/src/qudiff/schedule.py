"""Noise schedules: beta variances, scaled alphas, and scrambling angles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadKind

SCHEDULE_KINDS = ("cosine", "linear", "sigmoid", "log")

_COSINE_OFFSET = 0.008
_BETA_CLIP = 0.999
_LINEAR_START, _LINEAR_END = 1e-4, 0.02

# rng stream tag for the per-step angle draws
_TAG_EPSILON = 102


def make_betas(kind: str, t_steps: int) -> np.ndarray:
    """Variance schedule beta_1..beta_T (index 0 is beta_1)."""
    if t_steps < 1:
        raise BadKind(f"need T >= 1, got {t_steps}")
    if kind == "cosine":
        steps = np.arange(t_steps + 1, dtype=float) / t_steps
        f = np.cos((steps + _COSINE_OFFSET) / (1 + _COSINE_OFFSET)
                   * np.pi / 2) ** 2
        abar = f / f[0]
        betas = 1.0 - abar[1:] / abar[:-1]
        return np.minimum(betas, _BETA_CLIP)
    if kind == "linear":
        return np.linspace(_LINEAR_START, _LINEAR_END, t_steps)
    if kind == "sigmoid":
        x = -6.0 + 12.0 * np.arange(1, t_steps + 1, dtype=float) / t_steps
        sig = 1.0 / (1.0 + np.exp(-x))
        return sig * (_LINEAR_END - _LINEAR_START) + _LINEAR_START
    if kind == "log":
        return np.exp(np.linspace(np.log(_LINEAR_START), np.log(_LINEAR_END),
                                  t_steps))
    raise BadKind(f"unknown schedule kind {kind!r}")


@dataclass(frozen=True)
class NoiseSchedule:
    """betas/alphas/alpha_bars plus the per-step scrambling angle scales.

    alpha_t = 1 - lambda_s * beta_t (the scaled convention, not the classical
    1 - beta_t); alpha_bars has T+1 entries with alpha_bars[0] = 1.
    thetas[t-1] = sqrt(1 - alpha_bar_t) * eps_t with eps_t ~ U[0,1) drawn
    once from the seed."""
    kind: str
    t_steps: int
    lambda_s: float
    seed: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    thetas: np.ndarray

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t])

    def theta(self, t: int) -> float:
        return float(self.thetas[t - 1])


def make_schedule(kind: str, t_steps: int, lambda_s: float,
                  seed: int) -> NoiseSchedule:
    if not 0.0 <= lambda_s <= 1.0:
        raise BadKind(f"lambda_s must lie in [0,1], got {lambda_s}")
    betas = make_betas(kind, t_steps)
    alphas = 1.0 - lambda_s * betas
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    rng = np.random.default_rng([seed, _TAG_EPSILON])
    eps = rng.uniform(0.0, 1.0, size=t_steps)
    thetas = np.sqrt(1.0 - alpha_bars[1:]) * eps
    for a in (betas, alphas, alpha_bars, thetas):
        a.setflags(write=False)
    return NoiseSchedule(kind=kind, t_steps=t_steps, lambda_s=lambda_s,
                         seed=seed, betas=betas, alphas=alphas,
                         alpha_bars=alpha_bars, thetas=thetas)
