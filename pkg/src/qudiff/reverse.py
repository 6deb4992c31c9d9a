"""Reverse denoising chain and model persistence.

A model holds one denoiser block per diffusion step; block t runs a circuit
of depth l0 + t on n data qubits plus n_a ancillas, reads out the
ancilla-zero probabilities, and max-normalizes them into the next latent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .circuits import (ScramblerParams, build_family, make_scrambler,
                       param_count)
from .errors import AllZero, CheckpointError
from .forward import max_normalize, qsc_chain
from .schedule import NoiseSchedule, make_schedule

_TAG_INIT = 106
_TAG_NOISE_INIT = 107

CHECKPOINT_MAGIC = b"QUDIFCK1"


@dataclass
class DenoiserBlock:
    """Trainable circuit of one reverse step; depth grows with t."""
    t: int
    family: str
    n: int
    n_a: int
    l0: int
    params: np.ndarray

    @property
    def depth(self) -> int:
        return self.l0 + self.t

    @property
    def num_qubits(self) -> int:
        return self.n + self.n_a

    def expected_params(self) -> int:
        return param_count(self.family, self.num_qubits, self.depth)

    def gates(self, trainable: bool = False):
        return build_family(self.family, self.params, self.num_qubits,
                            self.depth, trainable=trainable)


def embed_with_ancilla(x: np.ndarray, n: int, n_a: int) -> np.ndarray:
    """Amplitude-embed x on n data qubits, tensored with |0>^n_a ancillas."""
    data = qsim.amplitude_embed(x)
    if len(data) != 1 << n:
        raise AllZero(f"latent length {len(x)} != 2^{n}")
    state = np.zeros(1 << (n + n_a), dtype=complex)
    state[:: 1 << n_a] = data
    return state


def denoise_step(x: np.ndarray, block: DenoiserBlock,
                 shots: int | None = None, rng=None) -> np.ndarray:
    """One reverse step: embed, run the block circuit, project ancillas to
    |0>, (optionally replace by finite-shot frequencies), max-normalize."""
    state = embed_with_ancilla(x, block.n, block.n_a)
    state = qsim.apply_circuit(state, block.gates())
    p = qsim.ancilla_projected_probs(state, block.n, block.n_a)
    if p.max() <= 0.0:
        raise AllZero(f"block t={block.t}: ancilla-zero branch has no mass")
    if shots is not None:
        p = qsim.sample_shots(p, shots, rng)
        if p.max() <= 0.0:
            raise AllZero(f"block t={block.t}: no shots landed")
    return max_normalize(p)


@dataclass
class DiffusionModel:
    n: int
    n_a: int
    t_steps: int
    l0: int
    family: str
    schedule: NoiseSchedule
    scrambler: ScramblerParams
    blocks: list[DenoiserBlock]
    master_seed: int
    epochs_completed: list[int] = field(default_factory=list)
    config_echo: dict | None = None

    def block(self, t: int) -> DenoiserBlock:
        return self.blocks[t - 1]

    def forward_chain(self, x0: np.ndarray,
                      sample_index: int = 0) -> list[np.ndarray]:
        return qsc_chain(x0, self.schedule, self.scrambler, self.master_seed,
                         sample_index)

    def total_param_count(self) -> int:
        return sum(b.params.size for b in self.blocks)


def init_model(n: int, n_a: int, t_steps: int, l0: int, family: str,
               schedule_kind: str, lambda_s: float, master_seed: int,
               scrambler_layers: int = 2, init_scale: float = 1.0,
               config_echo: dict | None = None) -> DiffusionModel:
    """Fresh model: scrambler angles drawn once, block parameters drawn
    N(0, init_scale) per block from a per-block stream."""
    sched = make_schedule(schedule_kind, t_steps, lambda_s, master_seed)
    scram = make_scrambler(master_seed, t_steps, n, scrambler_layers)
    blocks = []
    for t in range(1, t_steps + 1):
        count = param_count(family, n + n_a, l0 + t)
        rng = np.random.default_rng([master_seed, _TAG_INIT, t])
        blocks.append(DenoiserBlock(
            t=t, family=family, n=n, n_a=n_a, l0=l0,
            params=rng.normal(0.0, init_scale, size=count)))
    return DiffusionModel(n=n, n_a=n_a, t_steps=t_steps, l0=l0,
                          family=family, schedule=sched, scrambler=scram,
                          blocks=blocks, master_seed=master_seed,
                          epochs_completed=[0] * t_steps,
                          config_echo=config_echo)


def make_init(mode: str, model: DiffusionModel, rng=None,
              x0: np.ndarray | None = None,
              sample_index: int = 0) -> np.ndarray:
    """Starting latent for the reverse chain: i.i.d. uniform noise, or the
    forward chain's x_T of a given sample."""
    if mode == "noise":
        if rng is None:
            rng = np.random.default_rng(
                [model.master_seed, _TAG_NOISE_INIT, sample_index])
        return max_normalize(rng.uniform(0.0, 1.0, size=1 << model.n))
    if mode == "forward":
        if x0 is None:
            raise AllZero("forward-mode init requires x0")
        if model.t_steps == 0:
            return np.asarray(x0, dtype=float)
        return model.forward_chain(x0, sample_index)[-1]
    raise ValueError(f"unknown init mode {mode!r}")


def sample_chain(init: np.ndarray, model: DiffusionModel,
                 shots: int | None = None, seed=0,
                 down_to: int = 0) -> np.ndarray:
    """Run blocks T..down_to+1; deterministic given (model, init, seed)."""
    x = np.asarray(init, dtype=float)
    seed_words = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
    for t in range(model.t_steps, down_to, -1):
        rng = np.random.default_rng([model.master_seed, *seed_words, t]) \
            if shots is not None else None
        x = denoise_step(x, model.block(t), shots=shots, rng=rng)
    return x


# ---------------------------------------------------------------------------
# checkpoint serialization: magic, u64 header length, canonical JSON header,
# then the listed tensors as little-endian float64 blobs

def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")


def save_checkpoint(model: DiffusionModel, path) -> None:
    tensors = [(f"block_{b.t}", np.asarray(b.params, dtype="<f8"))
               for b in model.blocks]
    tensors.append(("scrambler_base",
                    np.asarray(model.scrambler.base_angles, dtype="<f8")))
    manifest, offset = [], 0
    for name, arr in tensors:
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset})
        offset += arr.nbytes
    header = {
        "model": {"n": model.n, "n_ancilla": model.n_a,
                  "t_steps": model.t_steps, "l0": model.l0,
                  "family": model.family,
                  "scrambler_layers": model.scrambler.layers},
        "schedule": {"kind": model.schedule.kind,
                     "lambda_s": model.schedule.lambda_s},
        "seed": model.master_seed,
        "epochs_completed": list(model.epochs_completed),
        "config": model.config_echo,
        "tensors": manifest,
    }
    blob = _canonical_json(header)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(len(blob).to_bytes(8, "little"))
        f.write(blob)
        for _, arr in tensors:
            f.write(np.ascontiguousarray(arr).tobytes())


def load_checkpoint(path) -> DiffusionModel:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:8]!r}")
    hlen = int.from_bytes(raw[8:16], "little")
    try:
        header = json.loads(raw[16:16 + hlen])
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    body = raw[16 + hlen:]
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = 8 * int(np.prod(shape)) if shape else 8
        start = entry["offset"]
        if start + size > len(body):
            raise CheckpointError(f"{path}: tensor {entry['name']} truncated")
        tensors[entry["name"]] = np.frombuffer(
            body[start:start + size], dtype="<f8").reshape(shape).copy()

    m = header["model"]
    sched = make_schedule(header["schedule"]["kind"], m["t_steps"],
                          header["schedule"]["lambda_s"], header["seed"])
    base = tensors["scrambler_base"]
    base.setflags(write=False)
    scram = ScramblerParams(base_angles=base, seed=header["seed"])
    blocks = []
    for t in range(1, m["t_steps"] + 1):
        params = tensors[f"block_{t}"]
        block = DenoiserBlock(t=t, family=m["family"], n=m["n"],
                              n_a=m["n_ancilla"], l0=m["l0"], params=params)
        if params.size != block.expected_params():
            raise CheckpointError(
                f"{path}: block {t} has {params.size} params, expected "
                f"{block.expected_params()}")
        blocks.append(block)
    return DiffusionModel(n=m["n"], n_a=m["n_ancilla"], t_steps=m["t_steps"],
                          l0=m["l0"], family=m["family"], schedule=sched,
                          scrambler=scram, blocks=blocks,
                          master_seed=header["seed"],
                          epochs_completed=list(header["epochs_completed"]),
                          config_echo=header["config"])
