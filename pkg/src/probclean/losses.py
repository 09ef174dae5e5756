"""Jensen-Shannon divergence loss for per-attribute categorical outputs.

The divergence between a cell's input pmf p and output pmf q is

    JSD(p || q) = 0.5*KL(p || r) + 0.5*KL(q || r),   r = (p + q) / 2

with natural logarithms and the convention 0*log(0/x) = 0.  Unlike
KL(p || q) it stays finite when q has zeros, which is the common case of a
cell without uncertainty.  Record loss is the sum of per-attribute JSDs;
dataset loss is the sum over records.

The gradient of JSD with respect to q is 0.5*log(q/r) elementwise, which is
what the network backward pass chains through its softmax head.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import Record, Schema

__all__ = ["jsd", "record_loss", "batch_jsd", "batch_jsd_grad", "LOG_2"]

LOG_2 = float(np.log(2.0))

# Floor for probabilities inside log/ratio computations, so saturated
# softmax outputs cannot produce infinities.
_FLOOR = 1e-12


def _kl_terms(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise a*log(a/b) with 0*log(0/x) = 0."""
    ratio = np.log(np.maximum(a, _FLOOR) / np.maximum(b, _FLOOR))
    return np.where(a > 0.0, a * ratio, 0.0)


def jsd(p: Sequence[float] | np.ndarray, q: Sequence[float] | np.ndarray) -> float:
    """Jensen-Shannon divergence between two pmfs of equal length.

    Symmetric, and bounded to [0, ln 2].
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"pmf length mismatch: {p.shape} vs {q.shape}")
    r = 0.5 * (p + q)
    return float(0.5 * _kl_terms(p, r).sum() + 0.5 * _kl_terms(q, r).sum())


def record_loss(x: Record, y: Record, schema: Schema, mask: Sequence[bool] | None = None) -> float:
    """Sum of per-attribute JSDs between two records.

    ``mask[j]`` true excludes attribute j from the sum (missing-entry cells
    carry no information worth reconstructing).
    """
    x.validate_against(schema)
    y.validate_against(schema)
    total = 0.0
    for j in range(schema.n_attributes):
        if mask is not None and mask[j]:
            continue
        total += jsd(x[j].probs, y[j].probs)
    return total


def batch_jsd(
    targets: np.ndarray,
    outputs: np.ndarray,
    slices: Sequence[tuple[int, int]],
    mask: np.ndarray | None = None,
) -> float:
    """Summed JSD over a (B, D) batch of flattened records.

    ``mask`` is a (B, N) boolean array marking cells to exclude.
    """
    r = 0.5 * (targets + outputs)
    terms = 0.5 * _kl_terms(targets, r) + 0.5 * _kl_terms(outputs, r)
    if mask is None:
        return float(terms.sum())
    total = 0.0
    for j, (lo, hi) in enumerate(slices):
        keep = ~mask[:, j]
        total += float(terms[keep, lo:hi].sum())
    return total


def batch_jsd_grad(
    targets: np.ndarray,
    outputs: np.ndarray,
    slices: Sequence[tuple[int, int]],
    mask: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Summed JSD and its gradient with respect to ``outputs``.

    Masked cells contribute zero loss and zero gradient.
    """
    r = 0.5 * (targets + outputs)
    terms = 0.5 * _kl_terms(targets, r) + 0.5 * _kl_terms(outputs, r)
    grad = 0.5 * np.log(np.maximum(outputs, _FLOOR) / np.maximum(r, _FLOOR))
    if mask is not None:
        for j, (lo, hi) in enumerate(slices):
            dead = mask[:, j]
            terms[dead, lo:hi] = 0.0
            grad[dead, lo:hi] = 0.0
    return float(terms.sum()), grad
