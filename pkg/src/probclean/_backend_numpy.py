"""Pure-numpy implementation of the network's hot kernels.

This is the fallback backend and the reference the compiled extension is
checked against.  All entry points operate on the flat parameter layout
defined in ``network``: six tensors per channel (w_in, b_in, w_code,
b_code, w_out, b_out) for the five channels in activation order, followed
by the merge weight and bias; parameters, gradients, and Adam moments each
live in one contiguous buffer the per-tensor arrays are views into.
"""

from __future__ import annotations

import numpy as np

from .losses import batch_jsd_grad

NAME = "numpy"

N_CHANNELS = 5
# Channel order is fixed: index c selects the activation below.
_SIN, _COS, _LINEAR, _RELU, _SWISH = range(N_CHANNELS)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp overflow for very negative z yields inf and a correct 0.0 result
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _activate(c: int, z: np.ndarray) -> np.ndarray:
    if c == _SIN:
        return np.sin(z)
    if c == _COS:
        return np.cos(z)
    if c == _LINEAR:
        return z
    if c == _RELU:
        return np.maximum(z, 0.0)
    return z * _sigmoid(z)


def _activate_grad(c: int, z: np.ndarray) -> np.ndarray:
    if c == _SIN:
        return np.cos(z)
    if c == _COS:
        return -np.sin(z)
    if c == _LINEAR:
        return np.ones_like(z)
    if c == _RELU:
        return np.where(z > 0.0, 1.0, 0.0)
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def softmax_slices(zm: np.ndarray, slices) -> np.ndarray:
    """Per-attribute softmax over each (lo, hi) span of the rows."""
    q = np.empty_like(zm)
    for lo, hi in slices:
        s = zm[:, lo:hi]
        e = np.exp(s - s.max(axis=1, keepdims=True))
        q[:, lo:hi] = e / e.sum(axis=1, keepdims=True)
    return q


def forward(tensors: list[np.ndarray], slices, x: np.ndarray, want_trace: bool):
    """Run a batch through the five channels, merge layer, and softmax head.

    Returns (q, trace); the trace holds every pre-activation and activation
    needed by ``backward`` and is None when ``want_trace`` is false.
    """
    b, d = x.shape
    h = np.empty((b, N_CHANNELS * d))
    trace = {"x": x, "z1": [], "a1": [], "z2": [], "a2": [], "z3": []} if want_trace else None
    for c in range(N_CHANNELS):
        w1, b1, w2, b2, w3, b3 = tensors[6 * c : 6 * c + 6]
        z1 = x @ w1 + b1
        a1 = _activate(c, z1)
        z2 = a1 @ w2 + b2
        a2 = _activate(c, z2)
        z3 = a2 @ w3 + b3
        h[:, c * d : (c + 1) * d] = _activate(c, z3)
        if want_trace:
            trace["z1"].append(z1)
            trace["a1"].append(a1)
            trace["z2"].append(z2)
            trace["a2"].append(a2)
            trace["z3"].append(z3)
    zm = h @ tensors[30] + tensors[31]
    q = softmax_slices(zm, slices)
    if want_trace:
        trace["h"] = h
        trace["q"] = q
    return q, trace


def backward(
    tensors: list[np.ndarray],
    slices,
    trace: dict,
    targets: np.ndarray,
    mask: np.ndarray | None,
    l2_activity: float,
    grads: list[np.ndarray],
):
    """Analytic gradients of the batch objective, written into ``grads``.

    The objective is the summed per-attribute JSD between targets and
    outputs plus ``l2_activity`` times the squared code activations of every
    channel.  Returns (data_loss, penalty).
    """
    x, q, h = trace["x"], trace["q"], trace["h"]
    data_loss, dq = batch_jsd_grad(targets, q, slices, mask)

    # Chain through the per-attribute softmax.
    dzm = np.empty_like(dq)
    for lo, hi in slices:
        qs = q[:, lo:hi]
        gs = dq[:, lo:hi]
        dot = np.sum(qs * gs, axis=1, keepdims=True)
        dzm[:, lo:hi] = qs * (gs - dot)

    np.matmul(h.T, dzm, out=grads[30])
    np.sum(dzm, axis=0, out=grads[31])
    dh = dzm @ tensors[30].T

    d = x.shape[1]
    penalty = 0.0
    for c in range(N_CHANNELS):
        w2, w3 = tensors[6 * c + 2], tensors[6 * c + 4]
        z1, a1 = trace["z1"][c], trace["a1"][c]
        z2, a2 = trace["z2"][c], trace["a2"][c]
        z3 = trace["z3"][c]
        penalty += l2_activity * float(np.sum(a2 * a2))

        dz3 = dh[:, c * d : (c + 1) * d] * _activate_grad(c, z3)
        np.matmul(a2.T, dz3, out=grads[6 * c + 4])
        np.sum(dz3, axis=0, out=grads[6 * c + 5])

        da2 = dz3 @ w3.T + (2.0 * l2_activity) * a2
        dz2 = da2 * _activate_grad(c, z2)
        np.matmul(a1.T, dz2, out=grads[6 * c + 2])
        np.sum(dz2, axis=0, out=grads[6 * c + 3])

        da1 = dz2 @ w2.T
        dz1 = da1 * _activate_grad(c, z1)
        np.matmul(x.T, dz1, out=grads[6 * c + 0])
        np.sum(dz1, axis=0, out=grads[6 * c + 1])

    return data_loss, penalty


def adam_step(
    flat_params: np.ndarray,
    flat_grads: np.ndarray,
    flat_m: np.ndarray,
    flat_v: np.ndarray,
    t: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    scratch: np.ndarray,
) -> int:
    """One in-place Adam update with bias correction; returns the new step.

    Fused over the whole parameter vector; ``scratch`` is a caller-owned
    buffer of the same length, so no allocations happen per step.
    """
    t += 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    # lr*(m/c1)/(sqrt(v/c2)+eps) rewritten with the corrections folded into
    # the step size: step*m/(sqrt(v)+eps') with step = lr*sqrt(c2)/c1 and
    # eps' = eps*sqrt(c2).  Identical up to rounding, one pass fewer.
    step = lr * np.sqrt(c2) / c1
    eps_c = eps * np.sqrt(c2)
    np.multiply(flat_m, beta1, out=flat_m)
    np.multiply(flat_grads, 1.0 - beta1, out=scratch)
    flat_m += scratch
    np.multiply(flat_v, beta2, out=flat_v)
    np.multiply(flat_grads, flat_grads, out=scratch)
    scratch *= 1.0 - beta2
    flat_v += scratch
    np.sqrt(flat_v, out=scratch)
    scratch += eps_c
    np.divide(flat_m, scratch, out=scratch)
    scratch *= step
    flat_params -= scratch
    return t
