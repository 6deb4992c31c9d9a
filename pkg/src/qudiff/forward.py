"""Forward degradation processes: quantum scrambling with Gaussian noise
(QSC), the classical Gaussian chain (CDP), and the two unitary-only
scrambling variants (IUSP, GUSP).

Per-sample rng streams derive from (master_seed, tag, sample_index, step) so
batch order and parallelism never change results.
"""
from __future__ import annotations

import numpy as np

from . import qsim
from .circuits import ScramblerParams, build_circuit1, build_scrambler
from .errors import AllZero
from .schedule import NoiseSchedule

_TAG_FORWARD = 103
_TAG_IUSP = 104
_TAG_GUSP = 105


def forward_rng(master_seed: int, sample_index: int, step: int,
                tag: int = _TAG_FORWARD) -> np.random.Generator:
    return np.random.default_rng([master_seed, tag, sample_index, step])


def max_normalize(p: np.ndarray) -> np.ndarray:
    """Divide by the maximum entry so the largest value is exactly 1."""
    p = np.asarray(p, dtype=float)
    m = p.max() if p.size else 0.0
    if m <= 0.0:
        raise AllZero("cannot max-normalize an all-zero vector")
    return p / m


def gaussian_noising(x: np.ndarray, alpha_bar: float,
                     rng: np.random.Generator) -> np.ndarray:
    """z = sqrt(abar) x + sqrt(1 - abar) eps, eps ~ N(0, I)."""
    eps = rng.standard_normal(len(x))
    return np.sqrt(alpha_bar) * x + np.sqrt(1.0 - alpha_bar) * eps


def measure_normalize(state: np.ndarray) -> np.ndarray:
    return max_normalize(qsim.full_probs(state))


def qsc_step(x: np.ndarray, t: int, schedule: NoiseSchedule,
             scrambler: ScramblerParams,
             rng: np.random.Generator) -> np.ndarray:
    """One scrambling step: noise x_{t-1}, embed, scramble, measure,
    max-normalize. Noising uses alpha_bar_{t-1} to produce x_t."""
    z = gaussian_noising(x, schedule.alpha_bar(t - 1), rng)
    state = qsim.amplitude_embed(z)  # clamps negatives internally
    gates = build_scrambler(t, schedule.theta(t), scrambler)
    state = qsim.apply_circuit(state, gates)
    return measure_normalize(state)


def qsc_chain(x0: np.ndarray, schedule: NoiseSchedule,
              scrambler: ScramblerParams, master_seed: int,
              sample_index: int = 0) -> list[np.ndarray]:
    """Latents x_1..x_T of the scrambling chain."""
    out = []
    x = np.asarray(x0, dtype=float)
    for t in range(1, schedule.t_steps + 1):
        x = qsc_step(x, t, schedule, scrambler,
                     forward_rng(master_seed, sample_index, t))
        out.append(x)
    return out


def cdp_chain(x0: np.ndarray, schedule: NoiseSchedule, master_seed: int,
              sample_index: int = 0) -> list[np.ndarray]:
    """Classical Gaussian forward marginals, clamped to [0,1] and
    max-normalized so they feed the same reverse pipeline.

    Uses the classical alpha_t = 1 - beta_t, independent of lambda_s."""
    abar = np.cumprod(1.0 - schedule.betas)
    out = []
    x0 = np.asarray(x0, dtype=float)
    for t in range(1, schedule.t_steps + 1):
        rng = forward_rng(master_seed, sample_index, t)
        x = np.sqrt(abar[t - 1]) * x0 \
            + np.sqrt(1.0 - abar[t - 1]) * rng.standard_normal(len(x0))
        out.append(max_normalize(np.clip(x, 0.0, 1.0)))
    return out


def _unitary_scramble_chain(x0, t_steps, layers, angle_fn, master_seed,
                            sample_index, tag) -> list[np.ndarray]:
    m = int(len(x0)).bit_length() - 1
    out = []
    x = np.asarray(x0, dtype=float)
    for t in range(1, t_steps + 1):
        rng = forward_rng(master_seed, sample_index, t, tag)
        angles = angle_fn(t, rng.uniform(0.0, 1.0, size=(layers, m, 3)))
        gates = build_circuit1(angles.reshape(-1), m, layers,
                               trainable=False)
        state = qsim.apply_circuit(qsim.amplitude_embed(x), gates)
        x = measure_normalize(state)
        out.append(x)
    return out


def iusp_chain(x0: np.ndarray, t_steps: int, layers: int, master_seed: int,
               sample_index: int = 0) -> list[np.ndarray]:
    """Independent per-step unitaries, angles drawn U(0,1) at full strength."""
    return _unitary_scramble_chain(x0, t_steps, layers, lambda t, u: u,
                                   master_seed, sample_index, _TAG_IUSP)


def gusp_chain(x0: np.ndarray, schedule: NoiseSchedule, layers: int,
               master_seed: int, sample_index: int = 0) -> list[np.ndarray]:
    """Like IUSP but each step's angles are scaled by the schedule's
    theta_t; no Gaussian noise is injected."""
    return _unitary_scramble_chain(
        x0, schedule.t_steps, layers,
        lambda t, u: schedule.theta(t) * u,
        master_seed, sample_index, _TAG_GUSP)
