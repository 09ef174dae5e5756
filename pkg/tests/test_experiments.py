import dataclasses
import json

import numpy as np
import pytest

from probclean.experiments import (
    CsvSource,
    ExperimentSpec,
    NoiseSettings,
    SeriesSpec,
    SyntheticSource,
    _job_seeds,
    aggregate_reports,
    apply_sweep,
    emit_plots,
    load_preset,
    load_spec,
    preset_names,
    run_experiment,
    run_single,
    spec_from_dict,
)
from probclean.train import TrainConfig


def tiny_series(**overrides):
    base = dict(
        label="tiny categorical semi",
        pipeline="semi-supervised",
        source=SyntheticSource(attributes=3, density=4, records=200),
        noise=NoiseSettings(sigma_coeff=0.02, missing_prob=0.0),
        train=TrainConfig(epochs_unsupervised=2, epochs_supervised=2, labeled_fraction=0.05),
    )
    base.update(overrides)
    return SeriesSpec(**base)


def tiny_spec(**overrides):
    base = dict(
        name="tiny",
        series=(tiny_series(),),
        sweep_parameter="noise.sigma_coeff",
        sweep_values=(0.01, 0.05),
        repeats=2,
        seed=1,
    )
    base.update(overrides)
    return ExperimentSpec(**base)


class TestSpecParsing:
    def test_from_dict(self):
        payload = {
            "name": "demo",
            "series": [
                {
                    "label": "s1",
                    "pipeline": "unsupervised",
                    "source": {"type": "synthetic", "attributes": 2, "density": 3,
                               "records": 50, "kind": "continuous"},
                    "noise": {"sigma_coeff": 0.1, "missing_prob": 0.2},
                    "train": {"epochs_unsupervised": 1},
                }
            ],
            "sweep": {"parameter": "noise.missing_prob", "values": [0.0, 0.5]},
            "repeats": 1,
            "seed": 7,
        }
        spec = spec_from_dict(payload)
        assert spec.series[0].source.records == 50
        assert spec.series[0].train.epochs_unsupervised == 1
        assert spec.sweep_values == (0.0, 0.5)

    def test_all_presets_parse(self):
        names = preset_names()
        assert len(names) == 10
        for name in names:
            if "csv" in name:
                spec = load_preset(name, csv_path="placeholder.csv")
                assert isinstance(spec.series[0].source, CsvSource)
            else:
                spec = load_preset(name)
            assert spec.repeats >= 1

    def test_csv_preset_requires_path(self):
        with pytest.raises(ValueError):
            load_preset("exp08_csv_gaussian_noise")

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            load_preset("exp99")

    def test_spec_file_round_trip(self, tmp_path):
        payload = {
            "name": "file-demo",
            "series": [
                {"label": "a", "pipeline": "unsupervised",
                 "source": {"type": "synthetic"}}
            ],
            "sweep": {"parameter": "noise.sigma_coeff", "values": [0.01]},
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(payload))
        spec = load_spec(path)
        assert spec.name == "file-demo"
        assert spec.repeats == 3  # default


class TestSweep:
    def test_apply_noise_parameter(self):
        s = tiny_series()
        assert apply_sweep(s, "noise.sigma_coeff", 0.2).noise.sigma_coeff == 0.2
        assert apply_sweep(s, "noise.missing_prob", 0.3).noise.missing_prob == 0.3

    def test_apply_source_parameter(self):
        s = tiny_series()
        assert apply_sweep(s, "source.records", 123).source.records == 123
        assert apply_sweep(s, "source.density", 7).source.density == 7

    def test_apply_train_parameter(self):
        s = tiny_series()
        assert apply_sweep(s, "train.labeled_fraction", 0.5).train.labeled_fraction == 0.5

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            apply_sweep(tiny_series(), "source.colour", 1)

    def test_source_parameter_needs_synthetic(self):
        s = tiny_series(source=CsvSource(path="x.csv"), label="csv series")
        with pytest.raises(ValueError):
            apply_sweep(s, "source.records", 10)


class TestSeeding:
    def test_seeds_depend_on_value_not_order(self):
        a = _job_seeds(0, "series", 0.1, 0)
        b = _job_seeds(0, "series", 0.2, 0)
        assert a != b
        assert a == _job_seeds(0, "series", 0.1, 0)

    def test_seeds_depend_on_repeat_and_label(self):
        assert _job_seeds(0, "s", 0.1, 0) != _job_seeds(0, "s", 0.1, 1)
        assert _job_seeds(0, "s", 0.1, 0) != _job_seeds(0, "t", 0.1, 0)
        assert _job_seeds(1, "s", 0.1, 0) != _job_seeds(0, "s", 0.1, 0)


class TestRunSingle:
    def test_unsupervised_run(self, tmp_path):
        series = tiny_series(pipeline="unsupervised", label="tiny unsup")
        report = run_single(series, [1, 2, 3, 4], tmp_path / "run")
        assert np.isfinite(report.q_before)
        for name in ("loss_log.csv", "model.npz", "cleaned.csv",
                     "cleaned.schema.json", "mask.csv", "report.txt"):
            assert (tmp_path / "run" / name).exists()

    def test_csv_source_run(self, tmp_path):
        csv = tmp_path / "in.csv"
        csv.write_text(
            "A CATEGORICAL,B\n" + "\n".join(f"{i % 3},{i % 5}" for i in range(60)) + "\n"
        )
        series = tiny_series(
            label="csv run",
            pipeline="unsupervised",
            source=CsvSource(path=str(csv)),
            train=TrainConfig(epochs_unsupervised=1),
        )
        report = run_single(series, [1, 2, 3, 4])
        assert np.isfinite(report.q_before)


class TestRunExperiment:
    def test_outputs_and_determinism(self, tmp_path):
        spec = tiny_spec(repeats=1, sweep_values=(0.02,))
        results1 = run_experiment(spec, out_dir=tmp_path / "r1")
        results2 = run_experiment(spec, out_dir=tmp_path / "r2")
        assert (tmp_path / "r1" / "reports.csv").read_bytes() == (
            tmp_path / "r2" / "reports.csv"
        ).read_bytes()
        assert (tmp_path / "r1" / "aggregate.csv").exists()
        assert (tmp_path / "r1" / "plots" / "improvement_pct.svg").exists()
        assert len(results1) == len(results2) == 1

    def test_sweep_order_independent(self, tmp_path):
        base = tiny_spec(repeats=1, sweep_values=(0.01, 0.05))
        flipped = dataclasses.replace(base, sweep_values=(0.05, 0.01))
        r1 = dict_of_reports(run_experiment(base, out_dir=tmp_path / "a"))
        r2 = dict_of_reports(run_experiment(flipped, out_dir=tmp_path / "b"))
        assert r1 == r2

    def test_failed_job_isolated(self, tmp_path):
        bad = tiny_series(
            label="bad series",
            source=CsvSource(path=str(tmp_path / "missing.csv")),
            pipeline="unsupervised",
        )
        spec = tiny_spec(series=(tiny_series(), bad), repeats=1, sweep_values=(0.02,))
        results = run_experiment(spec, out_dir=tmp_path / "mix")
        assert len(results) == 1
        failed = list((tmp_path / "mix" / "bad_series").rglob("FAILED.txt"))
        assert len(failed) == 1


def dict_of_reports(results):
    return {
        (c["series"], c["sweep_value"], c["repeat"]): r.to_csv_row() for c, r in results
    }


class TestAggregation:
    def test_mean_and_ci(self):
        from probclean.metrics import EvalReport

        def report(impr):
            return EvalReport(
                q_before=1.0, q_after=1.0 - impr / 100, improvement_pct=impr,
                mse_before=None, mse_after=None, mse_improvement_pct=None,
                tp=0, tn=0, fp=0, fn=0, accuracy=None, f1=None,
            )

        results = [
            ({"series": "s", "sweep_value": 0.1, "repeat": i}, report(v))
            for i, v in enumerate([10.0, 20.0, 30.0])
        ]
        agg = aggregate_reports(results)
        mean, half = agg[("s", 0.1)]["improvement_pct"]
        assert mean == pytest.approx(20.0)
        assert half == pytest.approx(1.96 * 10.0 / np.sqrt(3))

    def test_plots_require_reports(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plots([], tmp_path)
