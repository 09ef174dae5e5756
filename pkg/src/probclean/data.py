"""Core data model for probabilistic tables.

A table cell holds a probability mass function (pmf) over the attribute's
categories rather than a single value.  Records are concatenations of their
cell pmfs into one flat vector, which is the layout the cleaning network
consumes.  Crisp (certain) tables are the special case where every pmf is
one-hot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "CATEGORICAL",
    "CONTINUOUS",
    "Pmf",
    "AttributeSpec",
    "Schema",
    "Record",
    "Dataset",
    "vectorize",
    "devectorize",
    "one_hot",
    "lift_crisp_table",
]

CATEGORICAL = "categorical"
CONTINUOUS = "continuous-binned"

# Construction renormalizes pmfs whose total mass deviates from 1 by at most
# this much; larger deviations are rejected as corrupt input.
RENORM_TOLERANCE = 1e-6
# After construction every pmf sums to 1 within this tolerance.
SUM_TOLERANCE = 1e-9


class Pmf:
    """A probability mass function over one attribute's categories.

    Entries are validated to lie in [0, 1] and sum to 1.  Sums that are off
    by no more than ``RENORM_TOLERANCE`` (file-format rounding) are silently
    renormalized; anything worse raises ``ValueError``.  A pmf with zero
    total mass is always rejected.
    """

    __slots__ = ("_probs",)

    def __init__(self, probs: Sequence[float] | np.ndarray):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("pmf must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(p)):
            raise ValueError("pmf entries must be finite")
        if np.any(p < 0.0) or np.any(p > 1.0 + RENORM_TOLERANCE):
            raise ValueError(f"pmf entries must lie in [0, 1], got {p!r}")
        total = float(p.sum())
        if total <= 0.0:
            raise ValueError("pmf has zero total mass")
        if abs(total - 1.0) > RENORM_TOLERANCE:
            raise ValueError(
                f"pmf mass {total!r} deviates from 1 by more than {RENORM_TOLERANCE}"
            )
        # Renormalize only genuine deviations; sums already within the 1e-9
        # invariant are kept bit-exact so round trips are lossless.
        if abs(total - 1.0) > SUM_TOLERANCE:
            p = p / total
        p = p.copy()
        p.flags.writeable = False
        self._probs = p

    @property
    def probs(self) -> np.ndarray:
        """Read-only float64 view of the probabilities."""
        return self._probs

    def __len__(self) -> int:
        return self._probs.size

    def __getitem__(self, k: int) -> float:
        return float(self._probs[k])

    def __iter__(self) -> Iterator[float]:
        return iter(self._probs.tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return np.array_equal(self._probs, other._probs)

    def __hash__(self) -> int:
        return hash(self._probs.tobytes())

    def __repr__(self) -> str:
        return f"Pmf({self._probs.tolist()!r})"

    def argmax(self) -> int:
        """Most likely category index; ties break toward the lowest index."""
        return int(np.argmax(self._probs))


@dataclass(frozen=True)
class AttributeSpec:
    """One column of the schema.

    ``labels`` maps external category labels to 0-based indices for
    categorical attributes (defaults to "0".."K-1").  Continuous attributes
    instead carry ``bin_edges``; their bin centers are derived.
    """

    name: str
    kind: str
    cardinality: int
    labels: tuple[str, ...] | None = None
    bin_edges: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if self.cardinality < 2:
            raise ValueError(f"attribute {self.name!r}: cardinality must be >= 2")
        if self.kind == CONTINUOUS:
            if self.bin_edges is None:
                raise ValueError(f"attribute {self.name!r}: continuous attributes need bin_edges")
            edges = np.asarray(self.bin_edges, dtype=np.float64)
            if edges.size != self.cardinality + 1:
                raise ValueError(
                    f"attribute {self.name!r}: need {self.cardinality + 1} bin edges, got {edges.size}"
                )
            if np.any(np.diff(edges) <= 0):
                raise ValueError(f"attribute {self.name!r}: bin edges must be strictly increasing")
            object.__setattr__(self, "bin_edges", tuple(float(e) for e in edges))
        elif self.bin_edges is not None:
            raise ValueError(f"attribute {self.name!r}: categorical attributes take no bin_edges")
        if self.labels is not None:
            labels = tuple(str(l) for l in self.labels)
            if len(labels) != self.cardinality:
                raise ValueError(f"attribute {self.name!r}: need {self.cardinality} labels")
            if len(set(labels)) != len(labels):
                raise ValueError(f"attribute {self.name!r}: labels must be unique")
            object.__setattr__(self, "labels", labels)
        elif self.kind == CATEGORICAL:
            object.__setattr__(self, "labels", tuple(str(k) for k in range(self.cardinality)))

    @property
    def bin_centers(self) -> tuple[float, ...]:
        if self.bin_edges is None:
            raise ValueError(f"attribute {self.name!r} has no bins")
        edges = np.asarray(self.bin_edges)
        return tuple(((edges[:-1] + edges[1:]) / 2.0).tolist())

    def label_to_index(self, label) -> int:
        """Resolve an external category label to its 0-based index."""
        if self.labels is not None:
            try:
                return self.labels.index(str(label))
            except ValueError:
                pass
        if isinstance(label, (int, np.integer)) and 0 <= int(label) < self.cardinality:
            return int(label)
        raise KeyError(f"attribute {self.name!r}: unknown category label {label!r}")

    def category_names(self) -> tuple[str, ...]:
        """Display names per category: labels, or bin indices for binned data."""
        if self.labels is not None:
            return self.labels
        return tuple(str(k) for k in range(self.cardinality))

    def to_dict(self) -> dict:
        out: dict = {"name": self.name, "kind": self.kind, "cardinality": self.cardinality}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        if self.bin_edges is not None:
            out["bin_edges"] = list(self.bin_edges)
        return out

    @classmethod
    def from_dict(cls, entry: dict) -> "AttributeSpec":
        return cls(
            name=entry["name"],
            kind=entry["kind"],
            cardinality=int(entry["cardinality"]),
            labels=tuple(entry["labels"]) if entry.get("labels") is not None else None,
            bin_edges=tuple(entry["bin_edges"]) if entry.get("bin_edges") is not None else None,
        )


@dataclass(frozen=True)
class Schema:
    """Ordered attribute specs for one table."""

    attributes: tuple[AttributeSpec, ...]
    _slices: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        attrs = tuple(self.attributes)
        if len(attrs) < 1:
            raise ValueError("schema needs at least one attribute")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        object.__setattr__(self, "attributes", attrs)
        bounds = np.cumsum([0] + [a.cardinality for a in attrs])
        object.__setattr__(
            self, "_slices", tuple((int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]))
        )

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(a.cardinality for a in self.attributes)

    @property
    def total_width(self) -> int:
        """Length of a flattened record: sum of all cardinalities."""
        return self._slices[-1][1]

    @property
    def slices(self) -> tuple[tuple[int, int], ...]:
        """Per-attribute (start, stop) spans within a flattened record."""
        return self._slices

    def attribute(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(f"no attribute named {name!r}")

    def to_dict(self) -> list[dict]:
        return [a.to_dict() for a in self.attributes]

    @classmethod
    def from_dict(cls, entries: list[dict]) -> "Schema":
        return cls(tuple(AttributeSpec.from_dict(e) for e in entries))


class Record:
    """One row: an ordered sequence of cell pmfs."""

    __slots__ = ("_cells",)

    def __init__(self, cells: Iterable[Pmf]):
        cells = tuple(cells)
        if not cells:
            raise ValueError("record needs at least one cell")
        for c in cells:
            if not isinstance(c, Pmf):
                raise TypeError("record cells must be Pmf instances")
        self._cells = cells

    @property
    def cells(self) -> tuple[Pmf, ...]:
        return self._cells

    def __len__(self) -> int:
        return len(self._cells)

    def __getitem__(self, j: int) -> Pmf:
        return self._cells[j]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Record):
            return NotImplemented
        return self._cells == other._cells

    def __hash__(self) -> int:
        return hash(self._cells)

    def __repr__(self) -> str:
        return f"Record({list(self._cells)!r})"

    def validate_against(self, schema: Schema) -> None:
        if len(self._cells) != schema.n_attributes:
            raise ValueError(
                f"record has {len(self._cells)} cells, schema has {schema.n_attributes} attributes"
            )
        for cell, spec in zip(self._cells, schema.attributes):
            if len(cell) != spec.cardinality:
                raise ValueError(
                    f"cell for {spec.name!r} has {len(cell)} entries, expected {spec.cardinality}"
                )


def vectorize(record: Record, schema: Schema) -> np.ndarray:
    """Flatten a record into the concatenated-pmf layout.

    The output places attribute j's probabilities at ``schema.slices[j]``,
    in category order.  ``devectorize`` inverts this exactly.
    """
    record.validate_against(schema)
    return np.concatenate([cell.probs for cell in record.cells])


def devectorize(vector: np.ndarray | Sequence[float], schema: Schema) -> Record:
    """Rebuild a record from a flattened vector.

    Each attribute slice must carry positive total mass within
    ``RENORM_TOLERANCE`` of 1; slices are renormalized on construction so the
    round trip through ``vectorize`` is exact for valid inputs.
    """
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size != schema.total_width:
        raise ValueError(f"expected a vector of length {schema.total_width}, got shape {v.shape}")
    return Record(Pmf(v[lo:hi]) for lo, hi in schema.slices)


def one_hot(category_index: int, cardinality: int) -> Pmf:
    """Pmf with all mass on one category (1-based index)."""
    if not 1 <= category_index <= cardinality:
        raise ValueError(f"category index {category_index} outside 1..{cardinality}")
    p = np.zeros(cardinality)
    p[category_index - 1] = 1.0
    return Pmf(p)


class Dataset:
    """An immutable probabilistic table: M records over one schema.

    Stored densely as an (M, D) float64 matrix in the flattened-record
    layout; ``Record``/``Pmf`` views are materialized on demand.
    """

    __slots__ = ("_schema", "_matrix")

    def __init__(self, schema: Schema, records: Iterable[Record]):
        records = list(records)
        matrix = np.empty((len(records), schema.total_width), dtype=np.float64)
        for i, rec in enumerate(records):
            matrix[i] = vectorize(rec, schema)
        self._schema = schema
        matrix.flags.writeable = False
        self._matrix = matrix

    @classmethod
    def from_matrix(cls, schema: Schema, matrix: np.ndarray, validate: bool = True) -> "Dataset":
        """Build a dataset directly from an (M, D) matrix of cell slices."""
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != schema.total_width:
            raise ValueError(
                f"expected matrix with {schema.total_width} columns, got shape {m.shape}"
            )
        if validate:
            if not np.all(np.isfinite(m)):
                raise ValueError("matrix entries must be finite")
            if np.any(m < 0.0) or np.any(m > 1.0 + RENORM_TOLERANCE):
                raise ValueError("matrix entries must lie in [0, 1]")
            for lo, hi in schema.slices:
                totals = m[:, lo:hi].sum(axis=1)
                if np.any(totals <= 0.0):
                    raise ValueError("attribute slice with zero total mass")
                if np.any(np.abs(totals - 1.0) > RENORM_TOLERANCE):
                    raise ValueError("attribute slice mass deviates from 1 beyond tolerance")
                off = np.abs(totals - 1.0) > SUM_TOLERANCE
                if np.any(off):
                    m[off, lo:hi] /= totals[off, None]
        obj = object.__new__(cls)
        m.flags.writeable = False
        obj._schema = schema
        obj._matrix = m
        return obj

    @property
    def schema(self) -> Schema:
        return self._schema

    @property
    def matrix(self) -> np.ndarray:
        """Read-only (M, D) view in flattened-record layout."""
        return self._matrix

    @property
    def n_records(self) -> int:
        return self._matrix.shape[0]

    def __len__(self) -> int:
        return self.n_records

    def record(self, i: int) -> Record:
        return devectorize(self._matrix[i], self._schema)

    def records(self) -> Iterator[Record]:
        return (self.record(i) for i in range(self.n_records))

    def cell(self, i: int, j: int) -> Pmf:
        lo, hi = self._schema.slices[j]
        return Pmf(self._matrix[i, lo:hi])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self._schema == other._schema and np.array_equal(self._matrix, other._matrix)


def lift_crisp_table(rows: Iterable[Sequence], schema: Schema) -> Dataset:
    """Lift a table of category labels to a dataset of one-hot records.

    Certain data is the probabilistic special case where one category takes
    all the mass.  Labels resolve through the schema; unknown labels raise.
    """
    rows = list(rows)
    width = schema.total_width
    matrix = np.zeros((len(rows), width), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != schema.n_attributes:
            raise ValueError(
                f"row {i} has {len(row)} values, schema has {schema.n_attributes} attributes"
            )
        for j, (label, spec) in enumerate(zip(row, schema.attributes)):
            k = spec.label_to_index(label)
            matrix[i, schema.slices[j][0] + k] = 1.0
    return Dataset.from_matrix(schema, matrix, validate=False)
