"""Gradients of scalar losses w.r.t. the trainable block parameters.

The backward pass runs the adjoint method directly on the statevector: one
un-computation sweep plus one derivative-gate application per parameter,
exact for analytic (infinite-shot) probabilities. A parameter-shift path is
kept as an independent cross-check for families whose parameters all enter
as plain single-qubit rotation angles.
"""
from __future__ import annotations

import numpy as np

from . import qsim
from .errors import BadKind, NonFiniteLoss
from .reverse import DenoiserBlock, embed_with_ancilla
from .circuits import build_family
from .forward import max_normalize


def max_normalize_vjp(p: np.ndarray, d_x: np.ndarray) -> np.ndarray:
    """Backward of x = p / p[argmax p], with the argmax index held fixed
    (its own derivative is 0: x[j*] is locally constant at 1)."""
    j = int(np.argmax(p))
    m = p[j]
    g = d_x / m
    g[j] = -(np.dot(d_x, p) - d_x[j] * p[j]) / (m * m)
    return g


def adjoint_gradient(gates, final_state: np.ndarray, d_probs: np.ndarray,
                     num_params: int) -> np.ndarray:
    """Reverse sweep: d_probs is dL/d(full Born probabilities) at the final
    state; returns dL/d(theta) scattered through each gate's grad_idx."""
    grad = np.zeros(num_params)
    lam = d_probs * final_state
    phi = final_state
    for g in reversed(gates):
        u_dag = gate_matrix_dag(g)
        phi = qsim.apply_matrix(phi, u_dag, g.wires)
        if any(i is not None for i in g.grad_idx):
            for du, idx in zip(qsim.gate_param_grads(g), g.grad_idx):
                if idx is None:
                    continue
                mu = qsim.apply_matrix(phi, du, g.wires)
                grad[idx] += 2.0 * np.real(np.vdot(lam, mu))
        lam = qsim.apply_matrix(lam, u_dag, g.wires)
    return grad


def gate_matrix_dag(g: qsim.Gate) -> np.ndarray:
    return qsim.gate_matrix(g).conj().T


def _block_forward(theta, block: DenoiserBlock, input_latent):
    gates = build_family(block.family, theta, block.num_qubits, block.depth,
                         trainable=True)
    state = embed_with_ancilla(input_latent, block.n, block.n_a)
    psi = qsim.apply_circuit(state, gates)
    p = qsim.ancilla_projected_probs(psi, block.n, block.n_a)
    return gates, psi, p


def grad_block(theta: np.ndarray, block: DenoiserBlock,
               input_latent: np.ndarray, loss_and_adjoint):
    """Loss and exact gradient through circuit -> ancilla projection ->
    max-normalization -> loss.

    loss_and_adjoint maps the max-normalized output latent to
    (loss, dL/d_latent)."""
    theta = np.asarray(theta, dtype=float)
    gates, psi, p = _block_forward(theta, block, input_latent)
    x_out = max_normalize(p)
    loss, d_x = loss_and_adjoint(x_out)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    d_p = max_normalize_vjp(p, np.asarray(d_x, dtype=float))
    d_full = np.zeros(len(psi))
    d_full[:: 1 << block.n_a] = d_p
    grad = adjoint_gradient(gates, psi, d_full, theta.size)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteLoss("gradient contains NaN/Inf")
    return float(loss), grad


def finite_diff_oracle(theta: np.ndarray, f, h: float = 1e-4) -> np.ndarray:
    """Central differences (f(t + h e_i) - f(t - h e_i)) / 2h."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros(theta.size)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        grad[i] = (f(tp) - f(tm)) / (2 * h)
    return grad


_SHIFT_FAMILIES = ("circuit1", "circuit3")


def parameter_shift_gradient(theta: np.ndarray, block: DenoiserBlock,
                             input_latent: np.ndarray,
                             loss_and_adjoint) -> np.ndarray:
    """Two-term shift rule cross-check. Only valid when every parameter is a
    single-qubit rotation angle (controlled-rotation angles would need
    four-term shifts)."""
    if block.family not in _SHIFT_FAMILIES:
        raise BadKind(f"parameter-shift unsupported for {block.family}")
    theta = np.asarray(theta, dtype=float)
    _, _, p0 = _block_forward(theta, block, input_latent)
    _, d_x = loss_and_adjoint(max_normalize(p0))
    d_p = max_normalize_vjp(p0, np.asarray(d_x, dtype=float))
    grad = np.zeros(theta.size)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += np.pi / 2
        tm[i] -= np.pi / 2
        _, _, pp = _block_forward(tp, block, input_latent)
        _, _, pm = _block_forward(tm, block, input_latent)
        grad[i] = np.dot(d_p, (pp - pm) / 2.0)
    return grad
