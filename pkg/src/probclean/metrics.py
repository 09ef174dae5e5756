"""Cleaning-quality measures.

Quality is always measured against a ground-truth table: Q_before compares
the corrupted data with the truth, Q_after compares the cleaned data with
the truth, and improvement is 100 - 100 * Q_after / Q_before (negative when
cleaning added noise).  Q is the summed per-cell JSD for any data, plus a
rescaled mean-squared error of expected values for continuous attributes.

Categorical cells are additionally scored as a binary classification of
"flips": cells whose most likely category changed during cleaning.  A flip
on a cell that disagreed with the truth is a true positive (even if the new
argmax is still wrong); leaving a correct cell alone is a true negative.
Argmax ties break toward the lowest category index everywhere, so a tie can
never manufacture a flip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CONTINUOUS, Dataset
from .losses import _kl_terms

__all__ = [
    "EvalReport",
    "dataset_jsd",
    "dataset_rescaled_mse",
    "quality_improvement",
    "flip_confusion",
    "evaluate",
]


@dataclass(frozen=True)
class EvalReport:
    """Evaluation summary for one cleaning run."""

    q_before: float
    q_after: float
    improvement_pct: float
    mse_before: float | None
    mse_after: float | None
    mse_improvement_pct: float | None
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float | None
    f1: float | None

    CSV_FIELDS = (
        "q_before",
        "q_after",
        "improvement_pct",
        "mse_before",
        "mse_after",
        "mse_improvement_pct",
        "tp",
        "tn",
        "fp",
        "fn",
        "accuracy",
        "f1",
    )

    def to_csv_row(self) -> list[str]:
        out = []
        for name in self.CSV_FIELDS:
            value = getattr(self, name)
            out.append("" if value is None else repr(value))
        return out

    @classmethod
    def from_csv_row(cls, row: list[str]) -> "EvalReport":
        kwargs = {}
        for name, text in zip(cls.CSV_FIELDS, row):
            if text == "":
                kwargs[name] = None
            elif name in ("tp", "tn", "fp", "fn"):
                kwargs[name] = int(text)
            else:
                kwargs[name] = float(text)
        return cls(**kwargs)

    def to_text(self) -> str:
        lines = [
            f"JSD before/after:   {self.q_before:.6g} / {self.q_after:.6g}",
            f"JSD improvement:    {self.improvement_pct:.2f}%",
        ]
        if self.mse_before is not None:
            lines += [
                f"MSE before/after:   {self.mse_before:.6g} / {self.mse_after:.6g}",
                f"MSE improvement:    {self.mse_improvement_pct:.2f}%",
            ]
        lines.append(
            f"Flips (categorical): TP={self.tp} TN={self.tn} FP={self.fp} FN={self.fn}"
        )
        if self.accuracy is not None:
            lines.append(f"Flip accuracy:      {self.accuracy:.4f}")
            lines.append(f"Flip F1:            {self.f1:.4f}")
        return "\n".join(lines)


def _check_shapes(x: Dataset, y: Dataset) -> None:
    if x.schema != y.schema:
        raise ValueError("datasets have different schemas")
    if x.n_records != y.n_records:
        raise ValueError(f"record counts differ: {x.n_records} vs {y.n_records}")


def dataset_jsd(x: Dataset, y: Dataset) -> float:
    """Summed JSD over all records and attributes."""
    _check_shapes(x, y)
    p, q = x.matrix, y.matrix
    r = 0.5 * (p + q)
    terms = 0.5 * _kl_terms(p, r) + 0.5 * _kl_terms(q, r)
    return float(terms.sum())


def dataset_rescaled_mse(x: Dataset, y: Dataset) -> float | None:
    """Summed squared expected-value error over continuous attributes.

    Expected values are taken in bin-center units and the difference is
    divided by the span between the first and last center, so each cell
    contributes at most 1.  Returns None when no attribute is continuous.
    """
    _check_shapes(x, y)
    total = 0.0
    seen = False
    for spec, (lo, hi) in zip(x.schema.attributes, x.schema.slices):
        if spec.kind != CONTINUOUS:
            continue
        seen = True
        centers = np.asarray(spec.bin_centers)
        span = centers[-1] - centers[0]
        vx = x.matrix[:, lo:hi] @ centers
        vy = y.matrix[:, lo:hi] @ centers
        total += float(np.sum(((vx - vy) / span) ** 2))
    return total if seen else None


def quality_improvement(q_before: float, q_after: float) -> float:
    """Percent of the 'distance to truth' removed; at most 100, may be negative."""
    if q_before <= 0.0:
        raise ValueError("quality improvement is undefined when q_before is 0")
    return 100.0 - 100.0 * (q_after / q_before)


def _categorical_argmaxes(ds: Dataset) -> list[np.ndarray]:
    out = []
    for spec, (lo, hi) in zip(ds.schema.attributes, ds.schema.slices):
        if spec.kind == CONTINUOUS:
            continue
        out.append(np.argmax(ds.matrix[:, lo:hi], axis=1))
    return out


def flip_confusion(gt: Dataset, before: Dataset, after: Dataset) -> dict:
    """Classify every categorical cell by whether cleaning flipped its argmax.

    Returns the four confusion counts plus accuracy and F1 (None when the
    schema has no categorical attributes; F1 is 0 when it has no positives).
    """
    _check_shapes(gt, before)
    _check_shapes(gt, after)
    tp = tn = fp = fn = 0
    for g, b, a in zip(
        _categorical_argmaxes(gt), _categorical_argmaxes(before), _categorical_argmaxes(after)
    ):
        wrong_before = b != g
        flipped = a != b
        tp += int(np.sum(wrong_before & flipped))
        fn += int(np.sum(wrong_before & ~flipped))
        fp += int(np.sum(~wrong_before & flipped))
        tn += int(np.sum(~wrong_before & ~flipped))
    total = tp + tn + fp + fn
    accuracy = (tp + tn) / total if total else None
    if total == 0:
        f1 = None
    else:
        denom = 2 * tp + fp + fn
        f1 = (2 * tp / denom) if denom else 0.0
    return {"tp": tp, "tn": tn, "fp": fp, "fn": fn, "accuracy": accuracy, "f1": f1}


def evaluate(gt: Dataset, before: Dataset, after: Dataset) -> EvalReport:
    """Full report: JSD and MSE improvements plus the flip classification."""
    q_before = dataset_jsd(gt, before)
    q_after = dataset_jsd(gt, after)
    improvement = quality_improvement(q_before, q_after) if q_before > 0 else math.nan
    mse_before = dataset_rescaled_mse(gt, before)
    mse_after = dataset_rescaled_mse(gt, after)
    if mse_before is None:
        mse_improvement = None
    elif mse_before > 0:
        mse_improvement = quality_improvement(mse_before, mse_after)
    else:
        mse_improvement = math.nan
    flips = flip_confusion(gt, before, after)
    return EvalReport(
        q_before=q_before,
        q_after=q_after,
        improvement_pct=improvement,
        mse_before=mse_before,
        mse_after=mse_after,
        mse_improvement_pct=mse_improvement,
        **flips,
    )
