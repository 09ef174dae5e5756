"""Turning real-world CSV files into probabilistic tables.

Columns whose header carries the marker token (default "CATEGORICAL")
become categorical attributes over their distinct observed labels; all
other columns must parse as numbers and are binned over their observed
[min, max] range with an automatically chosen bin count.  The marker
convention keeps numeric-looking codes (foreign keys, boolean flags) from
being treated as quantities.  Null tokens (empty cells, "NULL") become
uniform pmfs and are flagged in the returned missing mask.

Values that encode intervals ("20-29") are not interpreted; replace them
with representative numbers before ingesting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, CONTINUOUS, AttributeSpec, Dataset, Schema
from .quantize import choose_bin_count, uniform_bins

__all__ = ["IngestionRules", "ingest_csv"]


@dataclass(frozen=True)
class IngestionRules:
    categorical_marker: str = "CATEGORICAL"
    null_tokens: frozenset[str] = frozenset({"", "NULL"})


def _is_null(value: str, rules: IngestionRules) -> bool:
    return value.strip() in rules.null_tokens


def ingest_csv(path, rules: IngestionRules | None = None):
    """Read a crisp CSV with a header row into a one-hot dataset.

    Returns (dataset, missing_mask, schema).  Numeric columns with fewer
    than 2 distinct values and non-numeric values in unmarked columns are
    errors.  A file with only a header yields an empty dataset (over a
    placeholder binary schema, since nothing can be inferred from no rows).
    """
    rules = rules or IngestionRules()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file (no header row)") from None
        rows = [row for row in reader]

    names = []
    is_categorical = []
    for raw in header:
        tokens = raw.split()
        marked = rules.categorical_marker in tokens
        name = " ".join(t for t in tokens if t != rules.categorical_marker) or raw.strip()
        names.append(name)
        is_categorical.append(marked)
    if len(set(names)) != len(names):
        raise ValueError(f"{path}: duplicate column names after removing markers")

    for i, row in enumerate(rows):
        if len(row) != len(names):
            raise ValueError(f"{path}: row {i} has {len(row)} cells for {len(names)} columns")

    if not rows:
        attrs = tuple(
            AttributeSpec(name=n, kind=CATEGORICAL, cardinality=2, labels=("0", "1"))
            for n in names
        )
        schema = Schema(attrs)
        empty = Dataset.from_matrix(schema, np.zeros((0, schema.total_width)), validate=False)
        return empty, np.zeros((0, len(names)), dtype=bool), schema

    n_rows, n_cols = len(rows), len(names)
    mask = np.zeros((n_rows, n_cols), dtype=bool)
    attrs = []
    column_codes = []

    for j in range(n_cols):
        observed = [(i, rows[i][j]) for i in range(n_rows) if not _is_null(rows[i][j], rules)]
        for i in range(n_rows):
            if _is_null(rows[i][j], rules):
                mask[i, j] = True
        codes = np.full(n_rows, -1, dtype=np.int64)
        if is_categorical[j]:
            labels = sorted({value.strip() for _, value in observed})
            if len(labels) < 2:
                raise ValueError(f"{path}: column {names[j]!r} has fewer than 2 distinct values")
            index = {label: k for k, label in enumerate(labels)}
            for i, value in observed:
                codes[i] = index[value.strip()]
            attrs.append(
                AttributeSpec(
                    name=names[j],
                    kind=CATEGORICAL,
                    cardinality=len(labels),
                    labels=tuple(labels),
                )
            )
        else:
            values = np.empty(len(observed))
            for pos, (i, value) in enumerate(observed):
                try:
                    values[pos] = float(value)
                except ValueError:
                    raise ValueError(
                        f"{path}: column {names[j]!r} has non-numeric value {value!r}; "
                        f"mark it {rules.categorical_marker} or fix the data"
                    ) from None
            if np.unique(values).size < 2:
                raise ValueError(f"{path}: column {names[j]!r} has fewer than 2 distinct values")
            k = choose_bin_count(values)
            rule = uniform_bins(float(values.min()), float(values.max()), k)
            for pos, (i, _) in enumerate(observed):
                codes[i] = rule.bin_of(float(values[pos]))
            attrs.append(
                AttributeSpec(
                    name=names[j],
                    kind=CONTINUOUS,
                    cardinality=k,
                    bin_edges=tuple(rule.edges),
                )
            )
        column_codes.append(codes)

    schema = Schema(tuple(attrs))
    matrix = np.zeros((n_rows, schema.total_width))
    for j, (lo, hi) in enumerate(schema.slices):
        codes = column_codes[j]
        known = codes >= 0
        matrix[np.flatnonzero(known), lo + codes[known]] = 1.0
        matrix[~known, lo:hi] = 1.0 / (hi - lo)
    ds = Dataset.from_matrix(schema, matrix, validate=False)
    return ds, mask, schema
