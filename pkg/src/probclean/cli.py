"""Command-line front end.

Subcommands cover the full pipeline: ``synth`` (sample a ground-truth
table), ``corrupt`` (inject noise), ``train``, ``clean``, ``eval``,
``ingest`` (CSV to probabilistic table), and ``experiment`` (sweeps with
repeats, reports, and plots).  Datasets travel as a CSV plus a JSON schema
sidecar; every command takes ``--seed`` (default 0) where randomness is
involved.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import backends
from .data import CATEGORICAL, CONTINUOUS, Dataset
from .experiments import (
    OUTPUT_DIR_ENV,
    load_preset,
    load_spec,
    preset_names,
    run_experiment,
)
from .ingest import IngestionRules, ingest_csv
from .metrics import evaluate
from .network import (
    DEFAULT_L2_ACTIVITY,
    DEFAULT_NOISE_COEFF,
    DcaeArchitecture,
    clean,
    load_checkpoint,
    save_checkpoint,
)
from .noise import NoiseConfig, corrupt
from .synth import ChainSpec, generate_ground_truth
from .tableio import (
    EXPORT_MODES,
    export_cleaned,
    load_dataset,
    load_mask,
    load_schema,
    save_dataset,
    save_loss_log,
    save_mask,
    save_report_csv,
    save_schema,
)
from .train import TrainConfig, make_split, train_semi_supervised, train_unsupervised


def _add_seed(parser):
    parser.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")


def _load_table(data_path, schema_path):
    schema = load_schema(schema_path)
    return load_dataset(data_path, schema), schema


def cmd_synth(args) -> int:
    spec = ChainSpec(
        n_attributes=args.attributes,
        sampling_density=args.density,
        n_records=args.records,
        seed=args.seed,
        kind=CONTINUOUS if args.kind == "continuous" else CATEGORICAL,
    )
    ds = generate_ground_truth(spec)
    save_dataset(ds, f"{args.out}.csv")
    save_schema(ds.schema, f"{args.out}.schema.json")
    print(f"wrote {ds.n_records} records to {args.out}.csv (+ schema sidecar)")
    return 0


def cmd_corrupt(args) -> int:
    ds, schema = _load_table(args.data, args.schema)
    if args.sigma is not None:
        sigma = args.sigma
    else:
        sigma = tuple(args.sigma_coeff * (100.0 / a.cardinality) for a in schema.attributes)
    existing = load_mask(args.existing_mask, schema) if args.existing_mask else None
    cfg = NoiseConfig(sigma_pdb=sigma, missing_prob=args.missing_prob, seed=args.seed)
    noisy, mask = corrupt(ds, cfg, existing_mask=existing)
    save_dataset(noisy, f"{args.out}.csv")
    save_mask(mask, schema, f"{args.out}.mask.csv")
    print(f"wrote corrupted table to {args.out}.csv, mask to {args.out}.mask.csv")
    return 0


def cmd_train(args) -> int:
    ds, schema = _load_table(args.data, args.schema)
    mask = load_mask(args.mask, schema) if args.mask else None
    arch = DcaeArchitecture(schema, noise_coeff=args.noise_coeff, l2_activity=args.l2_activity)
    cfg = TrainConfig(
        epochs_unsupervised=args.epochs_unsupervised,
        epochs_supervised=args.epochs_supervised,
        batch_size=args.batch_size,
        labeled_fraction=args.labeled_fraction,
        seed=args.seed,
        mask_missing_in_unsupervised_loss=not args.no_mask_loss,
        learning_rate=args.learning_rate,
    )
    if args.pipeline == "semi-supervised":
        if not args.ground_truth:
            print("error: semi-supervised training needs --ground-truth", file=sys.stderr)
            return 2
        gt = load_dataset(args.ground_truth, schema)
        if gt.n_records != ds.n_records:
            print("error: ground truth and data record counts differ", file=sys.stderr)
            return 2
        split = make_split(ds.n_records, cfg.labeled_fraction, args.seed)
        labeled = np.asarray(split.labeled, dtype=np.int64)
        gt_labeled = Dataset.from_matrix(schema, gt.matrix[labeled], validate=False)
        result = train_semi_supervised(ds, gt_labeled, split, mask, cfg, arch=arch)
    else:
        result = train_unsupervised(ds, mask, cfg, arch=arch)
    save_checkpoint(result.params, args.out, seed_lineage=[args.seed])
    if args.loss_log:
        save_loss_log(result.loss_log, args.loss_log)
    final = result.loss_log[-1][2] if result.loss_log else float("nan")
    print(f"trained with backend {backends.backend_name()!r}; final epoch loss {final:.6g}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_clean(args) -> int:
    ds, schema = _load_table(args.data, args.schema)
    params, _ = load_checkpoint(args.model)
    if params.arch.schema != schema:
        print("error: checkpoint schema does not match the dataset schema", file=sys.stderr)
        return 2
    cleaned = clean(params, ds)
    export_cleaned(cleaned, args.out, mode=args.mode)
    print(f"wrote cleaned table ({args.mode}) to {args.out}")
    return 0


def cmd_eval(args) -> int:
    gt, schema = _load_table(args.ground_truth, args.schema)
    before = load_dataset(args.before, schema)
    after = load_dataset(args.after, schema)
    report = evaluate(gt, before, after)
    save_report_csv([({"ground_truth": args.ground_truth}, report)], f"{args.out}.csv")
    Path(f"{args.out}.txt").write_text(report.to_text() + "\n", encoding="utf-8")
    print(report.to_text())
    return 0


def cmd_ingest(args) -> int:
    rules = IngestionRules(categorical_marker=args.marker)
    ds, mask, schema = ingest_csv(args.csv, rules)
    save_dataset(ds, f"{args.out}.csv")
    save_schema(schema, f"{args.out}.schema.json")
    save_mask(mask, schema, f"{args.out}.mask.csv")
    kinds = ", ".join(f"{a.name}:{'cat' if a.kind == CATEGORICAL else 'bin'}{a.cardinality}"
                      for a in schema.attributes)
    print(f"ingested {ds.n_records} records, {schema.n_attributes} attributes ({kinds})")
    print(f"wrote {args.out}.csv, {args.out}.schema.json, {args.out}.mask.csv")
    return 0


def cmd_experiment(args) -> int:
    if args.preset:
        spec = load_preset(args.preset, csv_path=args.csv)
    else:
        spec = load_spec(args.spec, csv_path=args.csv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.repeats is not None:
        overrides["repeats"] = args.repeats
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    if args.records is not None:
        spec = dataclasses.replace(
            spec,
            series=tuple(
                dataclasses.replace(s, source=dataclasses.replace(s.source, records=args.records))
                if hasattr(s.source, "records")
                else s
                for s in spec.series
            ),
        )
    out_dir = args.out_dir or Path(os.environ.get(OUTPUT_DIR_ENV, "runs")) / spec.name
    results = run_experiment(spec, out_dir=out_dir, workers=args.workers)
    print(f"{len(results)} runs completed; outputs in {out_dir}")
    for context, report in results:
        line = (
            f"{context['series']} @ {context['sweep_parameter']}={context['sweep_value']} "
            f"rep {context['repeat']}: JSD improvement {report.improvement_pct:.2f}%"
        )
        if report.mse_improvement_pct is not None:
            line += f", MSE improvement {report.mse_improvement_pct:.2f}%"
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probclean",
        description="Autoencoder-based cleaning for probabilistic tabular data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a synthetic ground-truth table")
    p.add_argument("--attributes", type=int, default=3, help="chain length N")
    p.add_argument("--density", type=int, default=4, help="categories per attribute K")
    p.add_argument("--records", type=int, default=10000)
    p.add_argument("--kind", choices=["categorical", "continuous"], default="categorical")
    p.add_argument("--out", required=True, help="output prefix")
    _add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corrupt", help="inject missing-entry and Gaussian noise")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--sigma", type=float, default=None,
                   help="absolute Gaussian noise std (overrides --sigma-coeff)")
    p.add_argument("--sigma-coeff", type=float, default=0.02,
                   help="per-attribute std = coeff * 100 / K_j (default 0.02)")
    p.add_argument("--missing-prob", type=float, default=0.0)
    p.add_argument("--existing-mask", default=None,
                   help="mask of cells that are already missing")
    p.add_argument("--out", required=True, help="output prefix")
    _add_seed(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", help="train the cleaning network")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--mask", default=None, help="missing-cell mask CSV")
    p.add_argument("--pipeline", choices=["unsupervised", "semi-supervised"],
                   default="unsupervised")
    p.add_argument("--ground-truth", default=None,
                   help="clean table (semi-supervised targets)")
    p.add_argument("--epochs-unsupervised", type=int, default=100)
    p.add_argument("--epochs-supervised", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--labeled-fraction", type=float, default=0.02)
    p.add_argument("--no-mask-loss", action="store_true",
                   help="include missing cells in the unsupervised loss")
    p.add_argument("--noise-coeff", type=float, default=DEFAULT_NOISE_COEFF,
                   help="train-time input noise scale (std = coeff * 100 / K_j)")
    p.add_argument("--l2-activity", type=float, default=DEFAULT_L2_ACTIVITY)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--loss-log", default=None, help="write per-epoch losses here")
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("clean", help="apply a trained model to a table")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--mode", choices=list(EXPORT_MODES), default="probabilistic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("eval", help="score cleaned data against ground truth")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True, help="report prefix (.csv and .txt)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ingest", help="convert a crisp CSV to a probabilistic table")
    p.add_argument("--csv", required=True)
    p.add_argument("--marker", default="CATEGORICAL",
                   help="header token marking categorical columns")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("experiment", help="run a sweep spec or preset")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=preset_names())
    group.add_argument("--spec", help="experiment spec JSON file")
    p.add_argument("--csv", default=None, help="CSV path for ingestion presets")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--repeats", type=int, default=None, help="override spec repeats")
    p.add_argument("--records", type=int, default=None, help="override synthetic record count")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel jobs (default $PROBCLEAN_PARALLEL or 1)")
    p.add_argument("--seed", type=int, default=None, help="override spec master seed")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
