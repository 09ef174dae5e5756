"""Ground-truth generation from a chain-structured Bayesian network.

Records are sampled attribute by attribute down a chain A -> B -> C -> ...:
the root is a truncated standard normal on [-2, 2], quantized to K bins;
each child, given parent category a (0-based), is a Gamma(30a/K + 1, 1)
variable truncated to [4, 5 + 30a/K] and quantized into K uniform bins over
the union support [4, 5 + 30(K-1)/K].  The same conditional kernel is
reused for every edge, so a high parent category makes a high child
category likely.  Sampled category tables are lifted to one-hot
probabilistic records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .data import CATEGORICAL, CONTINUOUS, AttributeSpec, Dataset, Schema
from .quantize import BinningRule, pmf_from_cdf, uniform_bins

__all__ = [
    "ChainSpec",
    "root_rule",
    "root_pmf",
    "child_rule",
    "conditional_pmf",
    "sample_root",
    "sample_conditional",
    "sample_chain",
    "chain_schema",
    "generate_ground_truth",
]

ROOT_LOW, ROOT_HIGH = -2.0, 2.0
CHILD_LOW = 4.0


@dataclass(frozen=True)
class ChainSpec:
    """Shape of one synthetic dataset.

    ``kind`` tags the generated attributes for the metrics layer: low
    sampling densities model categorical data, high densities model
    quantized continuous data (which additionally reports expected-value
    error against the bin centers).
    """

    n_attributes: int
    sampling_density: int
    n_records: int
    seed: int = 0
    kind: str = CATEGORICAL

    def __post_init__(self):
        if self.n_attributes < 2:
            raise ValueError("chain needs at least 2 attributes")
        if self.sampling_density < 2:
            raise ValueError("sampling density must be >= 2")
        if self.n_records < 1:
            raise ValueError("need at least one record")
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise ValueError(f"unknown kind {self.kind!r}")


def root_rule(k: int) -> BinningRule:
    return uniform_bins(ROOT_LOW, ROOT_HIGH, k)


def _truncated_normal_cdf(x: np.ndarray) -> np.ndarray:
    lo = special.ndtr(ROOT_LOW)
    hi = special.ndtr(ROOT_HIGH)
    return (special.ndtr(np.asarray(x, dtype=np.float64)) - lo) / (hi - lo)


def root_pmf(k: int) -> np.ndarray:
    """Analytic bin masses of the truncated, quantized standard normal."""
    return pmf_from_cdf(_truncated_normal_cdf, root_rule(k)).probs


def child_rule(k: int) -> BinningRule:
    """Bins covering the union of all conditional truncation intervals."""
    return uniform_bins(CHILD_LOW, 5.0 + 30.0 * (k - 1) / k, k)


def _gamma_shape(parent: int, k: int) -> float:
    return 30.0 * parent / k + 1.0


def _gamma_interval(parent: int, k: int) -> tuple[float, float]:
    return CHILD_LOW, 5.0 + 30.0 * parent / k


def conditional_pmf(parent: int, k: int) -> np.ndarray:
    """Analytic child-category masses given the parent's 0-based category."""
    shape = _gamma_shape(parent, k)
    lo, hi = _gamma_interval(parent, k)
    edges = np.asarray(child_rule(k).edges)
    g_lo = special.gammainc(shape, lo)
    g_hi = special.gammainc(shape, hi)
    f = (special.gammainc(shape, np.clip(edges, lo, hi)) - g_lo) / (g_hi - g_lo)
    return np.maximum(np.diff(f), 0.0)


def sample_root(k: int, rng: np.random.Generator, size: int | None = None):
    """Root category indices via inverse-CDF over the analytic bin masses."""
    cum = np.cumsum(root_pmf(k))
    u = rng.random(size if size is not None else 1)
    idx = np.searchsorted(cum, u, side="right")
    idx = np.minimum(idx, k - 1)
    return int(idx[0]) if size is None else idx.astype(np.int64)


def _conditional_values(parent: int, k: int, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws from the truncated Gamma for one parent category."""
    shape = _gamma_shape(parent, k)
    lo, hi = _gamma_interval(parent, k)
    g_lo = special.gammainc(shape, lo)
    g_hi = special.gammainc(shape, hi)
    x = special.gammaincinv(shape, g_lo + u * (g_hi - g_lo))
    return np.clip(x, lo, hi)


def sample_conditional(parent: int, k: int, rng: np.random.Generator, size: int | None = None):
    """Child category indices given the parent's 0-based category index."""
    if not 0 <= parent < k:
        raise ValueError(f"parent index {parent} outside 0..{k - 1}")
    rule = child_rule(k)
    u = rng.random(size if size is not None else 1)
    values = _conditional_values(parent, k, u)
    idx = np.searchsorted(np.asarray(rule.edges), values, side="right") - 1
    idx = np.clip(idx, 0, k - 1)
    return int(idx[0]) if size is None else idx.astype(np.int64)


def sample_chain(spec: ChainSpec) -> np.ndarray:
    """Sample an (M, N) table of category indices down the chain.

    One uniform draw per cell, consumed in attribute-major order, so the
    output is fully determined by the seed.
    """
    rng = np.random.default_rng(spec.seed)
    m, n, k = spec.n_records, spec.n_attributes, spec.sampling_density
    table = np.empty((m, n), dtype=np.int64)
    table[:, 0] = sample_root(k, rng, size=m)
    rule_edges = np.asarray(child_rule(k).edges)
    for j in range(1, n):
        u = rng.random(m)
        values = np.empty(m)
        parents = table[:, j - 1]
        for a in np.unique(parents):
            sel = parents == a
            values[sel] = _conditional_values(int(a), k, u[sel])
        idx = np.searchsorted(rule_edges, values, side="right") - 1
        table[:, j] = np.clip(idx, 0, k - 1)
    return table


def chain_schema(spec: ChainSpec) -> Schema:
    """Schema for the generated table; attribute names are A, B, C, ..."""
    attrs = []
    for j in range(spec.n_attributes):
        name = _attribute_name(j)
        if spec.kind == CONTINUOUS:
            rule = root_rule(spec.sampling_density) if j == 0 else child_rule(spec.sampling_density)
            attrs.append(
                AttributeSpec(
                    name=name,
                    kind=CONTINUOUS,
                    cardinality=spec.sampling_density,
                    bin_edges=tuple(rule.edges),
                )
            )
        else:
            attrs.append(
                AttributeSpec(name=name, kind=CATEGORICAL, cardinality=spec.sampling_density)
            )
    return Schema(tuple(attrs))


def _attribute_name(j: int) -> str:
    # A, B, ..., Z, A1, B1, ... for very long chains
    letter = chr(ord("A") + j % 26)
    round_ = j // 26
    return letter if round_ == 0 else f"{letter}{round_}"


def generate_ground_truth(spec: ChainSpec) -> Dataset:
    """Sample the chain and lift the crisp table to one-hot records."""
    table = sample_chain(spec)
    schema = chain_schema(spec)
    matrix = np.zeros((spec.n_records, schema.total_width))
    for j, (lo, _) in enumerate(schema.slices):
        matrix[np.arange(spec.n_records), lo + table[:, j]] = 1.0
    return Dataset.from_matrix(schema, matrix, validate=False)
