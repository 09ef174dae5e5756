"""Noise injection: turns a ground-truth table into a corrupted one.

Two unstructured, cell-independent corruptions model data-quality problems:
missing entries (a cell's pmf becomes uniform, representing zero knowledge)
and Gaussian noise (each pmf entry is perturbed, clamped to [0, 1], and the
slice renormalized).  Missing entries are injected first and never receive
Gaussian noise on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset

__all__ = ["NoiseConfig", "add_gaussian_noise", "add_missing_entries", "corrupt"]


@dataclass(frozen=True)
class NoiseConfig:
    """Corruption settings.

    ``sigma_pdb`` is the Gaussian noise std: a single value for all
    attributes, or one value per attribute.  The experiment presets follow
    the convention sigma = c * (100 / K_j), which keeps the injected noise
    comparable across sampling densities.
    """

    sigma_pdb: float | tuple[float, ...]
    missing_prob: float
    seed: int = 0

    def __post_init__(self):
        sig = self.sigma_pdb
        if isinstance(sig, (int, float)):
            if sig < 0:
                raise ValueError("sigma_pdb must be >= 0")
        else:
            sig = tuple(float(s) for s in sig)
            if any(s < 0 for s in sig):
                raise ValueError("sigma_pdb entries must be >= 0")
            object.__setattr__(self, "sigma_pdb", sig)
        if not 0.0 <= self.missing_prob <= 1.0:
            raise ValueError("missing_prob must lie in [0, 1]")

    def sigma_for(self, schema) -> np.ndarray:
        """Per-attribute sigma vector resolved against a schema."""
        if isinstance(self.sigma_pdb, tuple):
            if len(self.sigma_pdb) != schema.n_attributes:
                raise ValueError(
                    f"sigma_pdb has {len(self.sigma_pdb)} entries for "
                    f"{schema.n_attributes} attributes"
                )
            return np.asarray(self.sigma_pdb)
        return np.full(schema.n_attributes, float(self.sigma_pdb))


def add_gaussian_noise(
    ds: Dataset,
    sigma: float | Sequence[float],
    rng: np.random.Generator,
    skip_mask: np.ndarray | None = None,
) -> Dataset:
    """Perturb every pmf entry with N(0, sigma), clamp, and renormalize.

    Cells flagged in ``skip_mask`` (boolean, records x attributes) are left
    untouched.  In the rare event that clamping empties a whole slice, that
    slice's noise is redrawn so renormalization stays well defined.
    """
    schema = ds.schema
    sigma_attr = np.broadcast_to(
        np.asarray(sigma, dtype=np.float64), (schema.n_attributes,)
    )
    if np.all(sigma_attr == 0.0):
        return Dataset.from_matrix(schema, ds.matrix, validate=False)
    out = np.array(ds.matrix)
    noise = rng.standard_normal(out.shape)
    for j, (lo, hi) in enumerate(schema.slices):
        if sigma_attr[j] == 0.0:
            continue
        rows = (
            np.arange(ds.n_records)
            if skip_mask is None
            else np.flatnonzero(~skip_mask[:, j])
        )
        if rows.size == 0:
            continue
        noisy = np.clip(out[rows, lo:hi] + sigma_attr[j] * noise[rows, lo:hi], 0.0, 1.0)
        totals = noisy.sum(axis=1)
        while np.any(totals <= 0.0):
            dead = np.flatnonzero(totals <= 0.0)
            redraw = rng.standard_normal((dead.size, hi - lo))
            noisy[dead] = np.clip(out[rows[dead], lo:hi] + sigma_attr[j] * redraw, 0.0, 1.0)
            totals[dead] = noisy[dead].sum(axis=1)
        out[rows, lo:hi] = noisy / totals[:, None]
    return Dataset.from_matrix(schema, out, validate=False)


def add_missing_entries(
    ds: Dataset, prob: float, rng: np.random.Generator
) -> tuple[Dataset, np.ndarray]:
    """Independently blank each cell to the uniform pmf with probability ``prob``.

    Returns the new dataset and a boolean (records x attributes) mask of the
    blanked cells.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError("missing probability must lie in [0, 1]")
    schema = ds.schema
    mask = rng.random((ds.n_records, schema.n_attributes)) < prob
    out = np.array(ds.matrix)
    for j, (lo, hi) in enumerate(schema.slices):
        k = hi - lo
        out[mask[:, j], lo:hi] = 1.0 / k
    return Dataset.from_matrix(schema, out, validate=False), mask


def corrupt(
    ds: Dataset, cfg: NoiseConfig, existing_mask: np.ndarray | None = None
) -> tuple[Dataset, np.ndarray]:
    """Apply missing-entry noise, then Gaussian noise to the remaining cells.

    ``existing_mask`` marks cells that are already missing (e.g. from
    ingesting a file with NULLs); they receive no Gaussian noise either.
    The returned mask is the union of existing and newly blanked cells.
    """
    rng = np.random.default_rng(cfg.seed)
    noisy, new_mask = add_missing_entries(ds, cfg.missing_prob, rng)
    mask = new_mask if existing_mask is None else (new_mask | existing_mask)
    noisy = add_gaussian_noise(noisy, cfg.sigma_for(ds.schema), rng, skip_mask=mask)
    return noisy, mask
