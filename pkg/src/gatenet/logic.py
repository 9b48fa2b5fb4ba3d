"""Differentiable two-input gates and N-input lookup tables.

Every real-valued gate is bilinear in its inputs, so it is stored as four
coefficients ``(c0, c1, c2, c3)`` of ``c0 + c1*x0 + c2*x1 + c3*x0*x1``.
The truth table column order is the input pair ``(x0, x1)`` read as a
two-bit number: 00, 01, 10, 11.

LUT inputs follow the multiplexer convention: input ``L[0]`` is the most
significant selector bit, so ``W[i]`` is selected when ``L`` spells ``i``
in big-endian binary.
"""

from __future__ import annotations

import numpy as np

NUM_GATES = 16

GATE_NAMES = (
    "FALSE", "AND", "A_AND_NOT_B", "A", "NOT_A_AND_B", "B", "XOR", "OR",
    "NOR", "XNOR", "NOT_B", "A_OR_NOT_B", "NOT_A", "NOT_A_OR_B", "NAND", "TRUE",
)

# Row i is the binary expansion of i, most significant bit first.
TRUTH_TABLES = np.array(
    [[(i >> (3 - k)) & 1 for k in range(4)] for i in range(NUM_GATES)], dtype=np.uint8
)

# Coefficients of (1, x0, x1, x0*x1).
GATE_COEFFS = np.array(
    [
        [0, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 1, 0, -1],
        [0, 1, 0, 0],
        [0, 0, 1, -1],
        [0, 0, 1, 0],
        [0, 1, 1, -2],
        [0, 1, 1, -1],
        [1, -1, -1, 1],
        [1, -1, -1, 2],
        [1, 0, -1, 0],
        [1, 0, -1, 1],
        [1, -1, 0, 0],
        [1, -1, 0, 1],
        [1, 0, 0, -1],
        [1, 0, 0, 0],
    ],
    dtype=np.float64,
)


def _check_unit(name, x):
    if not np.all(np.isfinite(x)) or np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > 1):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")


def gate_eval(i: int, x0: float, x1: float) -> float:
    """Evaluate the real-valued form of gate ``i`` at ``(x0, x1)``."""
    if not 0 <= int(i) < NUM_GATES or int(i) != i:
        raise ValueError(f"gate index must be an integer in 0..15, got {i!r}")
    _check_unit("x0", x0)
    _check_unit("x1", x1)
    c = GATE_COEFFS[int(i)]
    return float(c[0] + c[1] * x0 + c[2] * x1 + c[3] * x0 * x1)


def softmax(w: np.ndarray, axis: int = -1) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("non-finite logits")
    z = np.exp(w - w.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def gate_superposition(w: np.ndarray, x0: float, x1: float) -> float:
    """Softmax-weighted mixture of all 16 gates at one input pair."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (NUM_GATES,):
        raise ValueError(f"expected 16 logits, got shape {w.shape}")
    _check_unit("x0", x0)
    _check_unit("x1", x1)
    p = softmax(w)
    c = p @ GATE_COEFFS
    return float(c[0] + c[1] * x0 + c[2] * x1 + c[3] * x0 * x1)


def gate_superposition_backward(w, x0, x1, upstream_grad=1.0):
    """Return ``(grad_w, grad_x0, grad_x1)`` of :func:`gate_superposition`."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (NUM_GATES,):
        raise ValueError(f"expected 16 logits, got shape {w.shape}")
    _check_unit("x0", x0)
    _check_unit("x1", x1)
    p = softmax(w)
    f = GATE_COEFFS @ np.array([1.0, x0, x1, x0 * x1])
    a = p @ f
    grad_w = upstream_grad * p * (f - a)
    c = p @ GATE_COEFFS
    grad_x0 = upstream_grad * (c[1] + c[3] * x1)
    grad_x1 = upstream_grad * (c[2] + c[3] * x0)
    return grad_w, float(grad_x0), float(grad_x1)


def selector_matrix(n: int) -> np.ndarray:
    """The ``2**n x n`` matrix whose row ``i`` is ``i`` in big-endian binary."""
    if int(n) != n or n < 1:
        raise ValueError(f"LUT fan-in must be a positive integer, got {n!r}")
    rows = np.arange(2**n)[:, None]
    shifts = np.arange(n - 1, -1, -1)[None, :]
    return ((rows >> shifts) & 1).astype(np.uint8)


def _check_lut_args(W, L, s):
    W = np.asarray(W, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[-1] if L.ndim else 0
    if L.ndim != 1 or n < 1:
        raise ValueError(f"L must be a non-empty vector, got shape {L.shape}")
    if W.shape != (2**n,):
        raise ValueError(f"W must have 2**{n} = {2**n} entries, got shape {W.shape}")
    if s is None:
        s = selector_matrix(n)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (2**n, n):
        raise ValueError(f"selector must have shape {(2**n, n)}, got {s.shape}")
    return W, L, s


def minterms(L: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Product terms ``prod_j (s_ij L_j + (1 - s_ij)(1 - L_j))`` along the last axis.

    ``L`` may carry leading batch axes; the result has shape ``L.shape[:-1] + (2**N,)``.
    """
    L = np.asarray(L, dtype=np.float64)[..., None, :]
    return np.prod(L * s + (1.0 - L) * (1.0 - s), axis=-1)


def lut_forward(W, L, s=None) -> float:
    """Evaluate the multiplexer expansion of one N-input LUT."""
    W, L, s = _check_lut_args(W, L, s)
    return float(minterms(L, s) @ W)


def lut_forward_backward(W, L, s=None, upstream_grad=1.0):
    """Return ``(grad_W, grad_L)`` of :func:`lut_forward`."""
    W, L, s = _check_lut_args(W, L, s)
    terms = L[None, :] * s + (1.0 - L[None, :]) * (1.0 - s)
    grad_W = upstream_grad * np.prod(terms, axis=1)
    grad_L = upstream_grad * (W[:, None] * (2.0 * s - 1.0) * _prod_except(terms)).sum(axis=0)
    return grad_W, grad_L


def _prod_except(terms: np.ndarray) -> np.ndarray:
    """Product over the last axis leaving out each position in turn.

    Uses prefix and suffix products, so zero factors are handled exactly.
    """
    n = terms.shape[-1]
    ones = np.ones(terms.shape[:-1] + (1,))
    prefix = np.concatenate([ones, np.cumprod(terms[..., :-1], axis=-1)], axis=-1)
    suffix = np.concatenate(
        [np.cumprod(terms[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1
    )
    assert prefix.shape[-1] == n
    return prefix * suffix


# Batched layer kernels used by the network module. Inputs carry a leading
# batch axis; parameters carry a leading neuron axis.


def gate_layer_forward(probs: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mixture output for ``probs`` of shape (O, 16) and inputs (B, O)."""
    c = probs @ GATE_COEFFS
    return c[:, 0] + c[:, 1] * a + c[:, 2] * b + c[:, 3] * a * b


def gate_layer_backward(probs, a, b, grad_out):
    """Gradients w.r.t. logits (O, 16) and both input operands (B, O)."""
    c = probs @ GATE_COEFFS
    basis = np.stack(
        [grad_out.sum(axis=0), (grad_out * a).sum(axis=0),
         (grad_out * b).sum(axis=0), (grad_out * a * b).sum(axis=0)],
        axis=1,
    )
    grad_p = basis @ GATE_COEFFS.T
    grad_w = probs * (grad_p - (grad_p * probs).sum(axis=1, keepdims=True))
    grad_a = grad_out * (c[:, 1] + c[:, 3] * b)
    grad_b = grad_out * (c[:, 2] + c[:, 3] * a)
    return grad_w, grad_a, grad_b


def lut_layer_forward(W: np.ndarray, L: np.ndarray, s: np.ndarray):
    """Forward pass for ``W`` (O, 2**N) and gathered inputs ``L`` (B, O, N).

    Returns the outputs (B, O) and the per-input factors needed by the
    backward pass.
    """
    terms = L[:, :, None, :] * s + (1.0 - L[:, :, None, :]) * (1.0 - s)
    mt = np.prod(terms, axis=-1)
    return np.einsum("bok,ok->bo", mt, W), (terms, mt)


def lut_layer_backward(W, s, cache, grad_out):
    terms, mt = cache
    grad_W = np.einsum("bo,bok->ok", grad_out, mt)
    sign = 2.0 * s - 1.0
    partial = _prod_except(terms) * sign
    grad_L = np.einsum("bo,ok,boki->boi", grad_out, W, partial)
    return grad_W, grad_L
