"""Builders for the denoiser circuit templates and the fixed scrambling circuit.

All builders consume a flat float parameter vector and return a gate list.
Trainable builders record, on each gate, the flat index of every consumed
angle so the adjoint pass can scatter gradients back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadKind, BadShape, StepOutOfRange
from .qsim import Gate

FAMILIES = ("circuit1", "circuit2", "circuit3")

# Scrambler angle scale: base angles are uniform[0,1), theta_t in [0,1),
# pi maps full strength to maximal single-qubit rotations.
SCRAMBLER_ANGLE_SCALE = np.pi
DEFAULT_SCRAMBLER_LAYERS = 2


def _circuit3_pairs(layer: int, m: int) -> list[tuple[int, int]]:
    """Alternating even-odd / odd-even qubit pairs, wrapping only on even M."""
    start = layer % 2
    if m % 2 == 0:
        return [(q, (q + 1) % m) for q in range(start, m, 2)]
    return [(q, q + 1) for q in range(start, m - 1, 2)]


def param_count(family: str, m: int, layers: int) -> int:
    """Exact trainable-parameter count of one block."""
    if family == "circuit1":
        return layers * m * 3
    if family == "circuit2":
        return layers * (4 * m + 2 * (m - 1))
    if family == "circuit3":
        return sum(10 * len(_circuit3_pairs(l, m)) for l in range(layers))
    raise BadKind(f"unknown circuit family {family!r}")


def default_ranges(m: int, layers: int) -> list[int]:
    """Entanglement range per layer: cycles through all ring offsets."""
    return [(l % (m - 1)) + 1 for l in range(layers)]


def _check_flat(params: np.ndarray, expected: int, family: str) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != expected:
        raise BadShape(f"{family}: got {params.size} parameters, "
                       f"expected {expected}")
    return params


def build_circuit1(params, m: int, layers: int, ranges=None,
                   trainable: bool = True) -> list[Gate]:
    """Per layer: a Rot on every qubit, then CNOT(q, (q+r) mod M) ring."""
    params = _check_flat(params, param_count("circuit1", m, layers),
                         "circuit1")
    if ranges is None:
        ranges = default_ranges(m, layers)
    if len(ranges) != layers or any(r < 1 or r > m - 1 for r in ranges):
        raise BadShape(f"circuit1: need {layers} ranges in [1, {m - 1}]")
    gates = []
    i = 0
    for l in range(layers):
        for q in range(m):
            idx = (i, i + 1, i + 2) if trainable else (None, None, None)
            gates.append(Gate("rot", (q,), tuple(params[i:i + 3]), idx))
            i += 3
        for q in range(m):
            gates.append(Gate("cnot", (q, (q + ranges[l]) % m)))
    return gates


def build_circuit2(params, m: int, layers: int,
                   trainable: bool = True) -> list[Gate]:
    """Per layer: RY,RZ,RY,RZ on each qubit, then a staggered ladder of
    CRY+CRZ on adjacent pairs (even-q pairs first, then odd-q pairs)."""
    params = _check_flat(params, param_count("circuit2", m, layers),
                         "circuit2")
    gates = []
    i = 0
    for _ in range(layers):
        for q in range(m):
            for kind in ("ry", "rz", "ry", "rz"):
                idx = (i,) if trainable else (None,)
                gates.append(Gate(kind, (q,), (params[i],), idx))
                i += 1
        # ladder parameters are laid out pair-major: pair (q, q+1) uses
        # angles (ladder + 2q, ladder + 2q + 1) regardless of stagger order
        ladder = i
        for parity in (0, 1):
            for q in range(parity, m - 1, 2):
                j = ladder + 2 * q
                idx0 = (j,) if trainable else (None,)
                idx1 = (j + 1,) if trainable else (None,)
                gates.append(Gate("cry", (q, q + 1), (params[j],), idx0))
                gates.append(Gate("crz", (q, q + 1), (params[j + 1],), idx1))
        i = ladder + 2 * (m - 1)
    return gates


def build_circuit3(params, m: int, layers: int,
                   trainable: bool = True) -> list[Gate]:
    """Per layer, SU(4)-like blocks on alternating qubit pairs: U3 on both
    qubits, RZ+RY on both, then CNOTs in both directions."""
    params = _check_flat(params, param_count("circuit3", m, layers),
                         "circuit3")
    gates = []
    i = 0
    for l in range(layers):
        for a, b in _circuit3_pairs(l, m):
            p = params[i:i + 10]
            idx = list(range(i, i + 10)) if trainable else [None] * 10
            gates.append(Gate("u3", (a,), tuple(p[0:3]), tuple(idx[0:3])))
            gates.append(Gate("u3", (b,), tuple(p[3:6]), tuple(idx[3:6])))
            gates.append(Gate("rz", (a,), (p[6],), (idx[6],)))
            gates.append(Gate("ry", (a,), (p[7],), (idx[7],)))
            gates.append(Gate("rz", (b,), (p[8],), (idx[8],)))
            gates.append(Gate("ry", (b,), (p[9],), (idx[9],)))
            gates.append(Gate("cnot", (a, b)))
            gates.append(Gate("cnot", (b, a)))
            i += 10
    return gates


_BUILDERS = {
    "circuit1": build_circuit1,
    "circuit2": build_circuit2,
    "circuit3": build_circuit3,
}


def build_family(family: str, params, m: int, layers: int,
                 trainable: bool = True) -> list[Gate]:
    if family not in _BUILDERS:
        raise BadKind(f"unknown circuit family {family!r}")
    return _BUILDERS[family](params, m, layers, trainable=trainable)


@dataclass(frozen=True)
class ScramblerParams:
    """Fixed base angles of the forward scrambling circuits.

    base_angles[t-1] holds the uniform[0,1) draws for step t, shaped
    (layers, m, 3); sampled once from the seed and immutable thereafter."""
    base_angles: np.ndarray
    seed: int

    @property
    def num_steps(self) -> int:
        return self.base_angles.shape[0]

    @property
    def layers(self) -> int:
        return self.base_angles.shape[1]

    @property
    def num_qubits(self) -> int:
        return self.base_angles.shape[2]


# rng stream tag, keeps scrambler draws disjoint from other seed uses
_TAG_SCRAMBLER = 101


def make_scrambler(seed: int, t_steps: int, m: int,
                   layers: int = DEFAULT_SCRAMBLER_LAYERS) -> ScramblerParams:
    rng = np.random.default_rng([seed, _TAG_SCRAMBLER])
    base = rng.uniform(0.0, 1.0, size=(t_steps, layers, m, 3))
    base.setflags(write=False)
    return ScramblerParams(base_angles=base, seed=seed)


def build_scrambler(t: int, theta_t: float,
                    base: ScramblerParams) -> list[Gate]:
    """Strongly entangling layers with angles pi * theta_t * base_angles[t]."""
    if theta_t < 0:
        raise BadShape(f"theta_t must be >= 0, got {theta_t}")
    if t < 1 or t > base.num_steps:
        raise StepOutOfRange(f"step {t} outside 1..{base.num_steps}")
    if base.layers == 0:
        return []
    angles = SCRAMBLER_ANGLE_SCALE * theta_t * base.base_angles[t - 1]
    return build_circuit1(angles.reshape(-1), base.num_qubits, base.layers,
                          trainable=False)
