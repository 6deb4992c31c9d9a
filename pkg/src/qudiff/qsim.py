"""Exact statevector simulation of small qubit registers.

Conventions: wire 0 is the most significant bit of the basis index, ancilla
qubits occupy the last wire positions, all arithmetic is complex128.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin

import numpy as np

from .errors import BadLength, BadSplit, WireOutOfRange, ZeroShots, ZeroVector

GATE_KINDS = ("rot", "u3", "ry", "rz", "cnot", "cz", "cry", "crz")

# number of angle parameters per gate kind
GATE_NPARAMS = {
    "rot": 3, "u3": 3, "ry": 1, "rz": 1,
    "cnot": 0, "cz": 0, "cry": 1, "crz": 1,
}
GATE_NWIRES = {
    "rot": 1, "u3": 1, "ry": 1, "rz": 1,
    "cnot": 2, "cz": 2, "cry": 2, "crz": 2,
}


@dataclass(frozen=True)
class Gate:
    """A single gate: kind, target wires, angles, and (for trainable gates)
    the flat indices of its angles in the owning parameter vector."""
    kind: str
    wires: tuple[int, ...]
    params: tuple[float, ...] = ()
    grad_idx: tuple[int | None, ...] = field(default=(), compare=False)


def _ry(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    e = np.exp(-0.5j * theta)
    return np.array([[e, 0], [0, np.conj(e)]], dtype=complex)


def _d_ry(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return 0.5 * np.array([[-s, -c], [c, -s]], dtype=complex)


def _d_rz(theta: float) -> np.ndarray:
    e = np.exp(-0.5j * theta)
    return np.array([[-0.5j * e, 0], [0, 0.5j * np.conj(e)]], dtype=complex)


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s],
         [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


def _controlled(u: np.ndarray) -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[2:, 2:] = u
    return m


_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                 dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


def gate_matrix(g: Gate) -> np.ndarray:
    """Dense unitary for one gate, on its own wires (control first)."""
    k, p = g.kind, g.params
    if k == "ry":
        return _ry(p[0])
    if k == "rz":
        return _rz(p[0])
    if k == "rot":
        phi, theta, omega = p
        return _rz(omega) @ _ry(theta) @ _rz(phi)
    if k == "u3":
        return _u3(*p)
    if k == "cnot":
        return _CNOT
    if k == "cz":
        return _CZ
    if k == "cry":
        return _controlled(_ry(p[0]))
    if k == "crz":
        return _controlled(_rz(p[0]))
    raise ValueError(f"unknown gate kind {k!r}")


def gate_param_grads(g: Gate) -> list[np.ndarray]:
    """dU/d(angle) for each angle of the gate, in parameter order."""
    k, p = g.kind, g.params
    if k == "ry":
        return [_d_ry(p[0])]
    if k == "rz":
        return [_d_rz(p[0])]
    if k == "rot":
        phi, theta, omega = p
        return [
            _rz(omega) @ _ry(theta) @ _d_rz(phi),
            _rz(omega) @ _d_ry(theta) @ _rz(phi),
            _d_rz(omega) @ _ry(theta) @ _rz(phi),
        ]
    if k == "u3":
        theta, phi, lam = p
        c, s = cos(theta / 2), sin(theta / 2)
        d_theta = 0.5 * np.array(
            [[-s, -np.exp(1j * lam) * c],
             [np.exp(1j * phi) * c, -np.exp(1j * (phi + lam)) * s]],
            dtype=complex)
        d_phi = np.array(
            [[0, 0],
             [1j * np.exp(1j * phi) * s, 1j * np.exp(1j * (phi + lam)) * c]],
            dtype=complex)
        d_lam = np.array(
            [[0, -1j * np.exp(1j * lam) * s],
             [0, 1j * np.exp(1j * (phi + lam)) * c]], dtype=complex)
        return [d_theta, d_phi, d_lam]
    if k in ("cry", "crz"):
        d = _d_ry(p[0]) if k == "cry" else _d_rz(p[0])
        m = np.zeros((4, 4), dtype=complex)
        m[2:, 2:] = d
        return [m]
    return []


def num_qubits(state: np.ndarray) -> int:
    n = int(len(state)).bit_length() - 1
    if 1 << n != len(state):
        raise BadLength(f"state length {len(state)} is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    s = np.zeros(1 << n, dtype=complex)
    s[0] = 1.0
    return s


def amplitude_embed(v: np.ndarray) -> np.ndarray:
    """Load a nonnegative vector into amplitudes after L2 normalization.

    Negative entries are clamped to zero first (Gaussian noising can push
    latents below zero)."""
    v = np.asarray(v, dtype=float)
    n = int(len(v)).bit_length() - 1
    if 1 << n != len(v):
        raise BadLength(f"vector length {len(v)} is not a power of two")
    v = np.maximum(v, 0.0)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroVector("cannot embed an all-zero vector")
    return (v / norm).astype(complex)


def apply_matrix(state: np.ndarray, mat: np.ndarray,
                 wires: tuple[int, ...]) -> np.ndarray:
    """Apply a 2^k x 2^k matrix on the given wires (tensor-product embedding)."""
    n = num_qubits(state)
    k = len(wires)
    psi = state.reshape([2] * n)
    psi = np.moveaxis(psi, wires, range(k))
    psi = (mat @ psi.reshape(1 << k, -1)).reshape([2] * n)
    psi = np.moveaxis(psi, range(k), wires)
    return np.ascontiguousarray(psi).reshape(-1)


def apply_gate(state: np.ndarray, g: Gate) -> np.ndarray:
    n = num_qubits(state)
    if len(set(g.wires)) != len(g.wires) or any(
            w < 0 or w >= n for w in g.wires):
        raise WireOutOfRange(f"gate {g.kind} wires {g.wires} invalid for "
                             f"{n}-qubit register")
    return apply_matrix(state, gate_matrix(g), g.wires)


def apply_circuit(state: np.ndarray, gates) -> np.ndarray:
    for g in gates:
        state = apply_gate(state, g)
    return state


def full_probs(state: np.ndarray) -> np.ndarray:
    """Born-rule probabilities over the full computational basis."""
    return np.abs(state) ** 2


def ancilla_projected_probs(state: np.ndarray, n: int, n_a: int) -> np.ndarray:
    """Joint-basis probabilities with all ancillas (last n_a wires) in |0>.

    Returns a length-2^n vector whose sum may be < 1: the mass on ancilla
    branches other than |0...0> is dropped, not renormalized."""
    if n + n_a != num_qubits(state):
        raise BadSplit(f"{n}+{n_a} qubits != register size "
                       f"{num_qubits(state)}")
    # wire 0 is the MSB, so the ancilla=0 slice is a stride-2^n_a gather
    return np.abs(state[:: 1 << n_a]) ** 2


def sample_shots(p: np.ndarray, n_shots: int, seed) -> np.ndarray:
    """Empirical frequencies of n_shots multinomial draws from p.

    p is renormalized to sum 1 before sampling; deterministic given seed."""
    if n_shots < 1:
        raise ZeroShots("n_shots must be >= 1")
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if total <= 0:
        raise ZeroVector("cannot sample from an all-zero distribution")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    counts = rng.multinomial(n_shots, p / total)
    return counts / n_shots
