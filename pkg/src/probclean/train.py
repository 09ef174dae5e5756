"""Training schedules for the cleaning network.

Unsupervised training asks the network to reproduce the corrupted records
themselves (the classic denoising setup: noise is added on the way in, the
loss compares against the un-noised record).  Cells flagged as missing can
be excluded from the loss, since a uniform pmf carries nothing worth
reproducing.  The semi-supervised schedule runs the unsupervised phase on
everything, then continues on a small labeled subset with the clean
ground-truth records as targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .network import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    ADAM_LR,
    DcaeArchitecture,
    DcaeParams,
    adam_step,
    backward,
    forward,
    init_params,
)

__all__ = ["TrainConfig", "SemiSupSplit", "TrainResult", "make_split",
           "train_unsupervised", "train_semi_supervised"]

PHASE_UNSUPERVISED = "unsupervised"
PHASE_SUPERVISED = "supervised"


@dataclass(frozen=True)
class TrainConfig:
    epochs_unsupervised: int = 100
    epochs_supervised: int = 100
    batch_size: int = 32
    labeled_fraction: float = 0.02
    seed: int = 0
    mask_missing_in_unsupervised_loss: bool = True
    learning_rate: float = ADAM_LR
    adam_beta1: float = ADAM_BETA1
    adam_beta2: float = ADAM_BETA2
    adam_eps: float = ADAM_EPS

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs_unsupervised < 0 or self.epochs_supervised < 0:
            raise ValueError("epoch counts must be >= 0")
        if not 0.0 <= self.labeled_fraction <= 1.0:
            raise ValueError("labeled_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SemiSupSplit:
    """Disjoint, covering partition of record indices."""

    labeled: tuple[int, ...]
    unlabeled: tuple[int, ...]

    def __post_init__(self):
        labeled = set(self.labeled)
        unlabeled = set(self.unlabeled)
        if labeled & unlabeled:
            raise ValueError("labeled and unlabeled indices overlap")
        if len(labeled) != len(self.labeled) or len(unlabeled) != len(self.unlabeled):
            raise ValueError("duplicate indices in split")


def make_split(n_records: int, labeled_fraction: float, seed: int) -> SemiSupSplit:
    """Uniformly random labeled/unlabeled split; |labeled| = round(fraction*M)."""
    if not 0.0 <= labeled_fraction <= 1.0:
        raise ValueError("labeled_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_records)
    n_labeled = int(round(labeled_fraction * n_records))
    labeled = np.sort(perm[:n_labeled])
    unlabeled = np.sort(perm[n_labeled:])
    return SemiSupSplit(tuple(int(i) for i in labeled), tuple(int(i) for i in unlabeled))


@dataclass
class TrainResult:
    params: DcaeParams
    # (epoch, phase, summed JSD loss) per epoch, both phases concatenated
    loss_log: list[tuple[int, str, float]] = field(default_factory=list)


def _run_epochs(
    params: DcaeParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray | None,
    epochs: int,
    phase: str,
    cfg: TrainConfig,
    shuffle_rng: np.random.Generator,
    noise_rng: np.random.Generator,
    log: list,
) -> None:
    m = inputs.shape[0]
    for epoch in range(epochs):
        order = shuffle_rng.permutation(m)
        epoch_loss = 0.0
        for lo in range(0, m, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch = inputs[idx]
            q, trace = forward(params, batch, training=True, rng=noise_rng)
            grads, loss = backward(
                params, trace, targets[idx], mask[idx] if mask is not None else None
            )
            adam_step(
                params, grads, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
            )
            epoch_loss += loss
        log.append((epoch, phase, epoch_loss))


def train_unsupervised(
    corrupted: Dataset,
    mask: np.ndarray | None,
    cfg: TrainConfig,
    arch: DcaeArchitecture | None = None,
    params: DcaeParams | None = None,
) -> TrainResult:
    """Train on the corrupted data with itself as the target.

    Every epoch visits each record exactly once in a seeded shuffled order
    (the last batch may be short).  With the masking flag set, cells in
    ``mask`` contribute neither loss nor gradient.  The result is fully
    determined by (dataset, cfg, seed).
    """
    if arch is None:
        arch = DcaeArchitecture(corrupted.schema)
    seeds = np.random.SeedSequence(cfg.seed).spawn(5)
    if params is None:
        params = init_params(arch, seeds[0])
    result = TrainResult(params=params)
    loss_mask = mask if cfg.mask_missing_in_unsupervised_loss else None
    data = corrupted.matrix
    _run_epochs(
        params,
        data,
        data,
        loss_mask,
        cfg.epochs_unsupervised,
        PHASE_UNSUPERVISED,
        cfg,
        np.random.default_rng(seeds[1]),
        np.random.default_rng(seeds[2]),
        result.loss_log,
    )
    return result


def train_semi_supervised(
    corrupted: Dataset,
    ground_truth_labeled: Dataset,
    split: SemiSupSplit,
    mask: np.ndarray | None,
    cfg: TrainConfig,
    arch: DcaeArchitecture | None = None,
) -> TrainResult:
    """Unsupervised phase on everything, then supervised on the labeled rows.

    ``ground_truth_labeled`` holds the clean records for ``split.labeled``
    in that order; phase 2 trains the network to map the corrupted labeled
    rows to them, with no loss masking.
    """
    labeled = np.asarray(split.labeled, dtype=np.int64)
    if ground_truth_labeled.n_records != labeled.size:
        raise ValueError(
            f"ground truth has {ground_truth_labeled.n_records} records for "
            f"{labeled.size} labeled indices"
        )
    if ground_truth_labeled.schema != corrupted.schema:
        raise ValueError("labeled ground truth schema does not match the data")
    if labeled.size and (labeled.min() < 0 or labeled.max() >= corrupted.n_records):
        raise ValueError("labeled indices out of range")

    if arch is None:
        arch = DcaeArchitecture(corrupted.schema)
    seeds = np.random.SeedSequence(cfg.seed).spawn(5)
    params = init_params(arch, seeds[0])
    result = TrainResult(params=params)
    loss_mask = mask if cfg.mask_missing_in_unsupervised_loss else None
    data = corrupted.matrix
    _run_epochs(
        params,
        data,
        data,
        loss_mask,
        cfg.epochs_unsupervised,
        PHASE_UNSUPERVISED,
        cfg,
        np.random.default_rng(seeds[1]),
        np.random.default_rng(seeds[2]),
        result.loss_log,
    )
    if labeled.size:
        _run_epochs(
            params,
            data[labeled],
            ground_truth_labeled.matrix,
            None,
            cfg.epochs_supervised,
            PHASE_SUPERVISED,
            cfg,
            np.random.default_rng(seeds[3]),
            np.random.default_rng(seeds[4]),
            result.loss_log,
        )
    return result
