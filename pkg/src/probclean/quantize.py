"""Binning of continuous attributes into categorical distributions.

A continuous value (or distribution) on an interval [a, b] becomes a pmf
over K bins: uniform thresholds, left-closed bins, with the last bin closed
on both sides.  Bin counts for ingested data follow the numpy.histogram
rule (max of Freedman-Diaconis and Sturges) clamped to the number of
distinct values so that discrete attributes stay discrete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import Pmf

__all__ = [
    "BinningRule",
    "uniform_bins",
    "pmf_from_cdf",
    "pmf_from_value",
    "choose_bin_count",
    "expected_value",
]


@dataclass(frozen=True)
class BinningRule:
    """K bins over [edges[0], edges[-1]] with precomputed centers."""

    edges: tuple[float, ...]
    centers: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        if edges.size < 3:
            raise ValueError("need at least 2 bins (3 edges)")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        object.__setattr__(self, "edges", tuple(float(e) for e in edges))
        centers = (edges[:-1] + edges[1:]) / 2.0
        object.__setattr__(self, "centers", tuple(float(c) for c in centers))

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def low(self) -> float:
        return self.edges[0]

    @property
    def high(self) -> float:
        return self.edges[-1]

    def bin_of(self, x: float) -> int:
        """0-based bin index for a value in [low, high].

        Bins are left-closed: a value exactly on an interior edge belongs to
        the bin to its right; the last bin is closed at both ends.
        """
        if not self.low <= x <= self.high:
            raise ValueError(f"value {x!r} outside [{self.low}, {self.high}]")
        idx = int(np.searchsorted(self.edges, x, side="right")) - 1
        return min(idx, self.k - 1)


def uniform_bins(a: float, b: float, k: int) -> BinningRule:
    """Equally spaced edges a + i*(b-a)/k for i = 0..k."""
    if not (np.isfinite(a) and np.isfinite(b)) or a >= b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if k < 2:
        raise ValueError(f"need at least 2 bins, got {k}")
    edges = a + np.arange(k + 1) * ((b - a) / k)
    edges[-1] = b  # guard against rounding drift at the top edge
    return BinningRule(tuple(edges.tolist()))


def pmf_from_cdf(cdf: Callable[[np.ndarray], np.ndarray], rule: BinningRule) -> Pmf:
    """Per-bin mass F(L_k) - F(L_{k-1}) of a distribution given by its CDF.

    The CDF must satisfy F(low) = 0 and F(high) = 1 (truncate/renormalize
    first if the support is wider) and be non-decreasing across the edges.
    """
    edges = np.asarray(rule.edges)
    f = np.asarray(cdf(edges), dtype=np.float64)
    if f.shape != edges.shape:
        raise ValueError("cdf must evaluate elementwise on the edge vector")
    if abs(f[0]) > 1e-9 or abs(f[-1] - 1.0) > 1e-9:
        raise ValueError("cdf must be 0 at the lower edge and 1 at the upper edge")
    masses = np.diff(f)
    if np.any(masses < -1e-12):
        raise ValueError("cdf is decreasing across bin edges")
    return Pmf(np.maximum(masses, 0.0))


def pmf_from_value(x: float, rule: BinningRule) -> Pmf:
    """One-hot pmf on the bin containing x (point-mass quantization)."""
    p = np.zeros(rule.k)
    p[rule.bin_of(x)] = 1.0
    return Pmf(p)


def choose_bin_count(values: Sequence[float] | np.ndarray) -> int:
    """Bin count for an observed sample: min(n, max(fd, sturges)).

    fd and sturges are evaluated on the full sample of size m; n is the
    number of distinct values, which caps the count so attributes with few
    distinct levels are not over-resolved.  With zero IQR the fd estimate
    degenerates and is treated as 1.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need a non-empty 1-d sample")
    if not np.all(np.isfinite(v)):
        raise ValueError("sample must be finite")
    n_distinct = np.unique(v).size
    if n_distinct < 2:
        raise ValueError("need at least 2 distinct values")
    m = v.size
    sturges = math.ceil(math.log2(m)) + 1
    q75, q25 = np.percentile(v, [75.0, 25.0])
    iqr = q75 - q25
    if iqr <= 0.0:
        fd = 1
    else:
        fd = math.ceil((v.max() - v.min()) / (2.0 * iqr * m ** (-1.0 / 3.0)))
    return int(min(n_distinct, max(fd, sturges)))


def expected_value(pmf: Pmf, rule: BinningRule) -> float:
    """Mean of the quantized distribution in bin-center units."""
    if len(pmf) != rule.k:
        raise ValueError(f"pmf has {len(pmf)} entries for {rule.k} bins")
    return float(np.dot(pmf.probs, np.asarray(rule.centers)))
