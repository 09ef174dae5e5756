"""File formats for probabilistic tables and run outputs.

A dataset is stored as a CSV with one column per category, headers
``<attribute>#<category>`` (category label for categorical attributes, bin
index for binned ones), plus a JSON schema sidecar recording kinds,
cardinalities, labels, and bin edges.  Floats are written with ``repr`` so
values round-trip exactly.  Missing-cell masks are 0/1 CSVs with one column
per attribute.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .data import CONTINUOUS, Dataset, Schema
from .metrics import EvalReport

__all__ = [
    "save_schema",
    "load_schema",
    "save_dataset",
    "load_dataset",
    "save_mask",
    "load_mask",
    "save_loss_log",
    "save_report_csv",
    "load_report_csv",
    "export_cleaned",
]

SCHEMA_VERSION = 1

EXPORT_MODES = ("probabilistic", "argmax", "expected-value")


def save_schema(schema: Schema, path) -> None:
    payload = {"format_version": SCHEMA_VERSION, "attributes": schema.to_dict()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_schema(path) -> Schema:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {payload.get('format_version')!r}")
    return Schema.from_dict(payload["attributes"])


def _dataset_header(schema: Schema) -> list[str]:
    header = []
    for spec in schema.attributes:
        header += [f"{spec.name}#{cat}" for cat in spec.category_names()]
    return header


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_dataset_header(ds.schema))
        for row in ds.matrix:
            writer.writerow([repr(x) for x in row.tolist()])


def load_dataset(path, schema: Schema) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _dataset_header(schema):
            raise ValueError(f"dataset header does not match schema in {path}")
        rows = [[float(x) for x in row] for row in reader]
    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), schema.total_width)
    return Dataset.from_matrix(schema, matrix)


def save_mask(mask: np.ndarray, schema: Schema, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([a.name for a in schema.attributes])
        for row in np.asarray(mask, dtype=int):
            writer.writerow(row.tolist())


def load_mask(path, schema: Schema) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != [a.name for a in schema.attributes]:
            raise ValueError(f"mask header does not match schema in {path}")
        rows = [[int(x) for x in row] for row in reader]
    return np.asarray(rows, dtype=bool).reshape(len(rows), schema.n_attributes)


def save_loss_log(log, path) -> None:
    """Per-epoch training losses: CSV of (epoch, phase, loss)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "phase", "loss"])
        for epoch, phase, loss in log:
            writer.writerow([epoch, phase, repr(loss)])


def save_report_csv(reports: list[tuple[dict, EvalReport]], path) -> None:
    """Reports with their context columns (sweep value, repeat, seed, ...)."""
    if not reports:
        raise ValueError("no reports to save")
    context_fields = list(reports[0][0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(context_fields + list(EvalReport.CSV_FIELDS))
        for context, report in reports:
            if list(context.keys()) != context_fields:
                raise ValueError("inconsistent report context fields")
            writer.writerow([str(context[k]) for k in context_fields] + report.to_csv_row())


def load_report_csv(path) -> list[tuple[dict, EvalReport]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_context = len(header) - len(EvalReport.CSV_FIELDS)
        out = []
        for row in reader:
            context = dict(zip(header[:n_context], row[:n_context]))
            out.append((context, EvalReport.from_csv_row(row[n_context:])))
    return out


def export_cleaned(ds: Dataset, path, mode: str = "probabilistic") -> None:
    """Write a cleaned dataset for downstream use.

    probabilistic: the full pmf table (same format as ``save_dataset``).
    argmax: one column per attribute with the most likely category (its
        label, or the bin center for binned attributes).
    expected-value: like argmax for categorical attributes, but binned
        attributes get their expected value over bin centers.
    """
    if mode not in EXPORT_MODES:
        raise ValueError(f"unknown export mode {mode!r}")
    if mode == "probabilistic":
        save_dataset(ds, path)
        return
    schema = ds.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([a.name for a in schema.attributes])
        for i in range(ds.n_records):
            row = []
            for spec, (lo, hi) in zip(schema.attributes, schema.slices):
                cell = ds.matrix[i, lo:hi]
                if spec.kind == CONTINUOUS:
                    centers = np.asarray(spec.bin_centers)
                    if mode == "expected-value":
                        row.append(repr(float(cell @ centers)))
                    else:
                        row.append(repr(float(centers[int(np.argmax(cell))])))
                else:
                    row.append(spec.labels[int(np.argmax(cell))])
            writer.writerow(row)
