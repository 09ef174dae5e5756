"""Experiment pipelines: generate/ingest -> corrupt -> train -> clean -> evaluate.

An experiment spec holds one or more series (pipeline x data source), a
sweep over one parameter, and a repeat count.  Every (series, sweep value,
repeat) job derives its own seeds from the master seed, the series label,
and the sweep value itself, so jobs are independent of execution order and
re-running a spec reproduces its reports exactly.

Per job the pipeline persists the evaluation report, the loss log, a model
checkpoint, and the cleaned dataset; per series it aggregates repeats into
mean and a normal-approximation confidence interval and renders sweep
charts as SVG.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import CATEGORICAL, CONTINUOUS, Dataset
from .ingest import ingest_csv
from .metrics import EvalReport, evaluate
from .network import clean, save_checkpoint
from .noise import NoiseConfig, corrupt
from .synth import ChainSpec, generate_ground_truth
from .tableio import save_dataset, save_loss_log, save_mask, save_report_csv, save_schema
from .train import TrainConfig, make_split, train_semi_supervised, train_unsupervised

__all__ = [
    "SyntheticSource",
    "CsvSource",
    "NoiseSettings",
    "SeriesSpec",
    "ExperimentSpec",
    "load_spec",
    "preset_names",
    "load_preset",
    "run_experiment",
    "aggregate_reports",
    "emit_plots",
]

PIPELINES = ("unsupervised", "semi-supervised")

OUTPUT_DIR_ENV = "PROBCLEAN_OUTPUT_DIR"
PARALLEL_ENV = "PROBCLEAN_PARALLEL"

_PRESET_DIR = Path(__file__).parent / "presets"

CI_Z = 1.96  # normal-approximation 95% band over repeats


@dataclass(frozen=True)
class SyntheticSource:
    attributes: int = 3
    density: int = 4
    records: int = 10000
    kind: str = CATEGORICAL


@dataclass(frozen=True)
class CsvSource:
    path: str


@dataclass(frozen=True)
class NoiseSettings:
    """Corruption levels; sigma is per-attribute c * (100 / K_j)."""

    sigma_coeff: float = 0.02
    missing_prob: float = 0.0


@dataclass(frozen=True)
class SeriesSpec:
    label: str
    pipeline: str
    source: SyntheticSource | CsvSource
    noise: NoiseSettings = NoiseSettings()
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.pipeline!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    series: tuple[SeriesSpec, ...]
    sweep_parameter: str
    sweep_values: tuple
    repeats: int = 3
    seed: int = 0

    def __post_init__(self):
        if not self.series:
            raise ValueError("experiment needs at least one series")
        if not self.sweep_values:
            raise ValueError("sweep needs at least one value")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


# ---------------------------------------------------------------------------
# Spec files
# ---------------------------------------------------------------------------


def _series_from_dict(entry: dict) -> SeriesSpec:
    source = dict(entry["source"])
    kind = source.get("type", "synthetic")
    if kind == "synthetic":
        src_kind = source.get("kind", "categorical")
        src = SyntheticSource(
            attributes=int(source.get("attributes", 3)),
            density=int(source.get("density", 4)),
            records=int(source.get("records", 10000)),
            kind=CONTINUOUS if src_kind in (CONTINUOUS, "continuous") else CATEGORICAL,
        )
    elif kind == "csv":
        if not source.get("path"):
            raise ValueError(f"series {entry.get('label')!r}: csv source needs a path")
        src = CsvSource(path=str(source["path"]))
    else:
        raise ValueError(f"unknown source type {kind!r}")
    noise = entry.get("noise", {})
    train = entry.get("train", {})
    return SeriesSpec(
        label=str(entry["label"]),
        pipeline=str(entry["pipeline"]),
        source=src,
        noise=NoiseSettings(
            sigma_coeff=float(noise.get("sigma_coeff", 0.02)),
            missing_prob=float(noise.get("missing_prob", 0.0)),
        ),
        train=TrainConfig(**train),
    )


def spec_from_dict(payload: dict) -> ExperimentSpec:
    sweep = payload["sweep"]
    return ExperimentSpec(
        name=str(payload["name"]),
        series=tuple(_series_from_dict(s) for s in payload["series"]),
        sweep_parameter=str(sweep["parameter"]),
        sweep_values=tuple(sweep["values"]),
        repeats=int(payload.get("repeats", 3)),
        seed=int(payload.get("seed", 0)),
    )


def load_spec(path, csv_path: str | None = None) -> ExperimentSpec:
    """Load a spec file; ``csv_path`` fills in csv sources with a null path."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if csv_path is not None:
        for series in payload.get("series", []):
            src = series.get("source", {})
            if src.get("type") == "csv" and not src.get("path"):
                src["path"] = csv_path
    return spec_from_dict(payload)


def preset_names() -> list[str]:
    return sorted(p.stem for p in _PRESET_DIR.glob("*.json"))


def load_preset(name: str, csv_path: str | None = None) -> ExperimentSpec:
    path = _PRESET_DIR / f"{name}.json"
    if not path.exists():
        raise KeyError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return load_spec(path, csv_path=csv_path)


# ---------------------------------------------------------------------------
# Sweep application and seeding
# ---------------------------------------------------------------------------

_SWEEPABLE = {
    "noise.sigma_coeff": lambda s, v: dataclasses.replace(
        s, noise=dataclasses.replace(s.noise, sigma_coeff=float(v))
    ),
    "noise.missing_prob": lambda s, v: dataclasses.replace(
        s, noise=dataclasses.replace(s.noise, missing_prob=float(v))
    ),
    "source.records": lambda s, v: dataclasses.replace(
        s, source=dataclasses.replace(s.source, records=int(v))
    ),
    "source.density": lambda s, v: dataclasses.replace(
        s, source=dataclasses.replace(s.source, density=int(v))
    ),
    "source.attributes": lambda s, v: dataclasses.replace(
        s, source=dataclasses.replace(s.source, attributes=int(v))
    ),
    "train.labeled_fraction": lambda s, v: dataclasses.replace(
        s, train=dataclasses.replace(s.train, labeled_fraction=float(v))
    ),
}


def apply_sweep(series: SeriesSpec, parameter: str, value) -> SeriesSpec:
    try:
        setter = _SWEEPABLE[parameter]
    except KeyError:
        raise ValueError(
            f"unknown sweep parameter {parameter!r}; supported: {sorted(_SWEEPABLE)}"
        ) from None
    if parameter.startswith("source.") and not isinstance(series.source, SyntheticSource):
        raise ValueError(f"sweep parameter {parameter!r} needs a synthetic source")
    return setter(series, value)


def _job_seed_key(label: str, value) -> int:
    digest = hashlib.sha256(f"{label}\x1f{value!r}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _job_seeds(master: int, label: str, value, repeat: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=master, spawn_key=(_job_seed_key(label, value), repeat))
    return [int(s) for s in ss.generate_state(4, np.uint64)]


# ---------------------------------------------------------------------------
# Single pipeline run
# ---------------------------------------------------------------------------


def _load_source(series: SeriesSpec, seed: int):
    """Returns (ground truth, pre-existing missing mask or None)."""
    if isinstance(series.source, SyntheticSource):
        src = series.source
        spec = ChainSpec(
            n_attributes=src.attributes,
            sampling_density=src.density,
            n_records=src.records,
            seed=seed,
            kind=src.kind,
        )
        return generate_ground_truth(spec), None
    ds, native_mask, _ = ingest_csv(series.source.path)
    return ds, native_mask


def run_single(series: SeriesSpec, seeds: list[int], out_dir: Path | None = None) -> EvalReport:
    """One full pipeline run; writes artifacts into ``out_dir`` when given."""
    gen_seed, corrupt_seed, split_seed, train_seed = seeds
    gt, native_mask = _load_source(series, gen_seed)

    sigma = tuple(
        series.noise.sigma_coeff * (100.0 / spec.cardinality) for spec in gt.schema.attributes
    )
    noise_cfg = NoiseConfig(sigma_pdb=sigma, missing_prob=series.noise.missing_prob,
                            seed=corrupt_seed)
    corrupted, mask = corrupt(gt, noise_cfg, existing_mask=native_mask)

    train_cfg = dataclasses.replace(series.train, seed=train_seed)
    if series.pipeline == "semi-supervised":
        split = make_split(gt.n_records, train_cfg.labeled_fraction, split_seed)
        labeled = np.asarray(split.labeled, dtype=np.int64)
        gt_labeled = Dataset.from_matrix(gt.schema, gt.matrix[labeled], validate=False)
        result = train_semi_supervised(corrupted, gt_labeled, split, mask, train_cfg)
    else:
        result = train_unsupervised(corrupted, mask, train_cfg)

    cleaned = clean(result.params, corrupted)
    report = evaluate(gt, corrupted, cleaned)

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        save_loss_log(result.loss_log, out_dir / "loss_log.csv")
        save_checkpoint(result.params, out_dir / "model.npz", seed_lineage=seeds)
        save_schema(gt.schema, out_dir / "cleaned.schema.json")
        save_dataset(cleaned, out_dir / "cleaned.csv")
        save_mask(mask, gt.schema, out_dir / "mask.csv")
        (out_dir / "report.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    return report


def _run_job(args):
    series, parameter, value, repeat, master_seed, out_dir = args
    applied = apply_sweep(series, parameter, value)
    seeds = _job_seeds(master_seed, series.label, value, repeat)
    report = run_single(applied, seeds, out_dir)
    context = {
        "series": series.label,
        "pipeline": series.pipeline,
        "sweep_parameter": parameter,
        "sweep_value": value,
        "repeat": repeat,
    }
    return context, report


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text)


def run_experiment(spec: ExperimentSpec, out_dir=None, workers: int | None = None):
    """Run every (series, sweep value, repeat) job and write all outputs.

    Returns the list of (context, report) pairs.  A failing job aborts only
    itself; the cause is recorded next to its output directory.
    """
    if out_dir is None:
        out_dir = Path(os.environ.get(OUTPUT_DIR_ENV, "runs")) / _slug(spec.name)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = int(os.environ.get(PARALLEL_ENV, "1"))

    jobs = []
    for series in spec.series:
        for value in spec.sweep_values:
            for repeat in range(spec.repeats):
                job_dir = (
                    out_dir
                    / _slug(series.label)
                    / f"sweep_{_slug(repr(value))}"
                    / f"rep_{repeat}"
                )
                jobs.append((series, spec.sweep_parameter, value, repeat, spec.seed, job_dir))

    results = []
    failures = []

    def record_failure(job, exc):
        failures.append((job, exc))
        job_dir = job[-1]
        job_dir.mkdir(parents=True, exist_ok=True)
        (job_dir / "FAILED.txt").write_text(f"{exc}\n", encoding="utf-8")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_job, job) for job in jobs]
            for job, future in zip(jobs, futures):
                try:
                    results.append(future.result())
                except Exception as exc:  # noqa: BLE001 - job isolation is the contract
                    record_failure(job, exc)
    else:
        for job in jobs:
            try:
                results.append(_run_job(job))
            except Exception as exc:  # noqa: BLE001 - job isolation is the contract
                record_failure(job, exc)

    if not results:
        raise RuntimeError(f"all {len(jobs)} jobs failed; first cause: {failures[0][1]}")
    save_report_csv(results, out_dir / "reports.csv")
    aggregated = aggregate_reports(results)
    _save_aggregate_csv(aggregated, out_dir / "aggregate.csv")
    emit_plots(results, out_dir / "plots")
    return results


_AGG_METRICS = ("improvement_pct", "mse_improvement_pct", "accuracy", "f1")


def aggregate_reports(results) -> dict:
    """Mean and CI half-width per (series, sweep value) over repeats."""
    grouped: dict = {}
    for context, report in results:
        grouped.setdefault((context["series"], context["sweep_value"]), []).append(report)
    aggregated = {}
    for key, reports in grouped.items():
        stats = {"repeats": len(reports)}
        for metric in _AGG_METRICS:
            values = [getattr(r, metric) for r in reports]
            values = [v for v in values if v is not None and np.isfinite(v)]
            if not values:
                stats[metric] = (None, None)
                continue
            mean = float(np.mean(values))
            if len(values) > 1:
                half = float(CI_Z * np.std(values, ddof=1) / np.sqrt(len(values)))
            else:
                half = 0.0
            stats[metric] = (mean, half)
        aggregated[key] = stats
    return aggregated


def _save_aggregate_csv(aggregated: dict, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["series", "sweep_value", "repeats"]
        for metric in _AGG_METRICS:
            header += [f"{metric}_mean", f"{metric}_ci"]
        writer.writerow(header)
        for (series, value), stats in sorted(aggregated.items(), key=lambda kv: repr(kv[0])):
            row = [series, repr(value), stats["repeats"]]
            for metric in _AGG_METRICS:
                mean, half = stats[metric]
                row += ["" if mean is None else repr(mean), "" if half is None else repr(half)]
            writer.writerow(row)


_PLOT_LABELS = {
    "improvement_pct": "JSD improvement (%)",
    "mse_improvement_pct": "MSE improvement (%)",
    "accuracy": "flip accuracy",
    "f1": "flip F1",
}


def emit_plots(results, plot_dir) -> list[Path]:
    """One SVG sweep chart per metric, one line + CI band per series."""
    if not results:
        raise ValueError("no reports to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    aggregated = aggregate_reports(results)
    series_names = sorted({context["series"] for context, _ in results})
    sweep_values = sorted({context["sweep_value"] for context, _ in results})
    parameter = results[0][0]["sweep_parameter"]

    written = []
    for metric in _AGG_METRICS:
        has_data = False
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for name in series_names:
            xs, means, halves = [], [], []
            for value in sweep_values:
                stats = aggregated.get((name, value))
                if stats is None or stats[metric][0] is None:
                    continue
                xs.append(value)
                means.append(stats[metric][0])
                halves.append(stats[metric][1])
            if not xs:
                continue
            has_data = True
            means = np.asarray(means)
            halves = np.asarray(halves)
            ax.plot(xs, means, marker="o", label=name)
            ax.fill_between(xs, means - halves, means + halves, alpha=0.2)
        if not has_data:
            plt.close(fig)
            continue
        ax.set_xlabel(parameter)
        ax.set_ylabel(_PLOT_LABELS[metric])
        ax.legend(fontsize="small")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = plot_dir / f"{metric}.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
