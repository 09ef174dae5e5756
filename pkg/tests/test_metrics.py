"""Metric checks against independently written brute-force oracles.

The oracles below use plain Python loops and scalar math so they share no
code with the vectorized implementations they verify.
"""

import math

import numpy as np
import pytest

from probclean.data import CATEGORICAL, CONTINUOUS, AttributeSpec, Dataset, Schema
from probclean.metrics import (
    EvalReport,
    dataset_jsd,
    dataset_rescaled_mse,
    evaluate,
    flip_confusion,
    quality_improvement,
)


def brute_force_jsd(x: Dataset, y: Dataset) -> float:
    total = 0.0
    for i in range(x.n_records):
        for j in range(x.schema.n_attributes):
            p = x.cell(i, j).probs.tolist()
            q = y.cell(i, j).probs.tolist()
            for pk, qk in zip(p, q):
                r = (pk + qk) / 2.0
                if pk > 0.0:
                    total += 0.5 * pk * math.log(pk / r)
                if qk > 0.0:
                    total += 0.5 * qk * math.log(qk / r)
    return total


def brute_force_mse(x: Dataset, y: Dataset):
    total = None
    for j, spec in enumerate(x.schema.attributes):
        if spec.kind != CONTINUOUS:
            continue
        centers = list(spec.bin_centers)
        span = centers[-1] - centers[0]
        if total is None:
            total = 0.0
        for i in range(x.n_records):
            vx = sum(c * p for c, p in zip(centers, x.cell(i, j).probs.tolist()))
            vy = sum(c * p for c, p in zip(centers, y.cell(i, j).probs.tolist()))
            total += ((vx - vy) / span) ** 2
    return total


def brute_force_flips(gt: Dataset, before: Dataset, after: Dataset):
    counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for j, spec in enumerate(gt.schema.attributes):
        if spec.kind == CONTINUOUS:
            continue
        for i in range(gt.n_records):
            def argmax(cell):
                probs = cell.probs.tolist()
                return probs.index(max(probs))

            g = argmax(gt.cell(i, j))
            b = argmax(before.cell(i, j))
            a = argmax(after.cell(i, j))
            if b != g:
                counts["tp" if a != b else "fn"] += 1
            else:
                counts["fp" if a != b else "tn"] += 1
    return counts


def random_pair(schema, n, seed):
    rng = np.random.default_rng(seed)

    def one():
        cols = [rng.dirichlet(np.ones(hi - lo), n) for lo, hi in schema.slices]
        return Dataset.from_matrix(schema, np.hstack(cols))

    return one(), one(), one()


MIXED = Schema(
    (
        AttributeSpec("c1", CATEGORICAL, 3),
        AttributeSpec("v1", CONTINUOUS, 4, bin_edges=(0.0, 1.0, 2.0, 3.0, 4.0)),
        AttributeSpec("c2", CATEGORICAL, 2),
    )
)

CATEGORICAL_ONLY = Schema(
    (AttributeSpec("a", CATEGORICAL, 4), AttributeSpec("b", CATEGORICAL, 3))
)


class TestDatasetJsd:
    def test_identity_zero(self, random_dataset_factory):
        ds = random_dataset_factory(MIXED, 6, 0)
        assert dataset_jsd(ds, ds) == pytest.approx(0.0, abs=1e-12)

    def test_single_cell_ln2(self):
        schema = Schema((AttributeSpec("a", CATEGORICAL, 2),))
        x = Dataset.from_matrix(schema, np.array([[1.0, 0.0]]))
        y = Dataset.from_matrix(schema, np.array([[0.0, 1.0]]))
        assert dataset_jsd(x, y) == pytest.approx(math.log(2.0), abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        x, y, _ = random_pair(MIXED, 5, seed)
        assert dataset_jsd(x, y) == pytest.approx(brute_force_jsd(x, y), abs=1e-9)

    def test_symmetry(self):
        x, y, _ = random_pair(MIXED, 7, 99)
        assert dataset_jsd(x, y) == pytest.approx(dataset_jsd(y, x), abs=1e-12)

    def test_shape_mismatch(self, random_dataset_factory):
        a = random_dataset_factory(MIXED, 3, 0)
        b = random_dataset_factory(MIXED, 4, 0)
        with pytest.raises(ValueError):
            dataset_jsd(a, b)


class TestDatasetRescaledMse:
    def test_identity_zero(self, random_dataset_factory):
        ds = random_dataset_factory(MIXED, 6, 1)
        assert dataset_rescaled_mse(ds, ds) == pytest.approx(0.0, abs=1e-15)

    def test_extreme_bins_contribute_one(self):
        schema = Schema(
            (AttributeSpec("v", CONTINUOUS, 4, bin_edges=(0.0, 1.0, 2.0, 3.0, 4.0)),)
        )
        x = Dataset.from_matrix(schema, np.array([[1.0, 0.0, 0.0, 0.0]]))
        y = Dataset.from_matrix(schema, np.array([[0.0, 0.0, 0.0, 1.0]]))
        assert dataset_rescaled_mse(x, y) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        x, y, _ = random_pair(MIXED, 8, 10 + seed)
        assert dataset_rescaled_mse(x, y) == pytest.approx(
            brute_force_mse(x, y), abs=1e-10
        )

    def test_none_without_continuous_attributes(self, random_dataset_factory):
        x = random_dataset_factory(CATEGORICAL_ONLY, 4, 2)
        assert dataset_rescaled_mse(x, x) is None


class TestQualityImprovement:
    def test_perfect_cleaning(self):
        assert quality_improvement(5.0, 0.0) == 100.0

    def test_no_change(self):
        assert quality_improvement(5.0, 5.0) == 0.0

    def test_added_noise_is_negative(self):
        assert quality_improvement(5.0, 10.0) == -100.0

    def test_undefined_at_zero(self):
        with pytest.raises(ValueError):
            quality_improvement(0.0, 1.0)


class TestFlipConfusion:
    def test_after_equals_before_means_no_flips(self):
        gt, before, _ = random_pair(CATEGORICAL_ONLY, 10, 3)
        counts = flip_confusion(gt, before, before)
        assert counts["tp"] == 0 and counts["fp"] == 0
        oracle = brute_force_flips(gt, before, before)
        assert counts["tn"] == oracle["tn"] and counts["fn"] == oracle["fn"]

    def test_perfect_repair_of_fully_wrong(self):
        schema = Schema((AttributeSpec("a", CATEGORICAL, 3),))
        gt = Dataset.from_matrix(schema, np.tile([1.0, 0.0, 0.0], (4, 1)))
        before = Dataset.from_matrix(schema, np.tile([0.0, 1.0, 0.0], (4, 1)))
        counts = flip_confusion(gt, before, gt)
        assert counts == {"tp": 4, "tn": 0, "fp": 0, "fn": 0, "accuracy": 1.0, "f1": 1.0}

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        gt, before, after = random_pair(MIXED, 10, 40 + seed)
        counts = flip_confusion(gt, before, after)
        oracle = brute_force_flips(gt, before, after)
        for key in ("tp", "tn", "fp", "fn"):
            assert counts[key] == oracle[key]

    def test_counts_cover_categorical_cells(self):
        gt, before, after = random_pair(MIXED, 12, 60)
        counts = flip_confusion(gt, before, after)
        n_categorical = sum(
            1 for a in MIXED.attributes if a.kind == CATEGORICAL
        )
        assert (
            counts["tp"] + counts["tn"] + counts["fp"] + counts["fn"]
            == 12 * n_categorical
        )

    def test_ties_never_make_flips(self):
        schema = Schema((AttributeSpec("a", CATEGORICAL, 2),))
        uniform = Dataset.from_matrix(schema, np.tile([0.5, 0.5], (3, 1)))
        counts = flip_confusion(uniform, uniform, uniform)
        assert counts["tp"] == 0 and counts["fp"] == 0


class TestEvaluate:
    def test_report_fields(self):
        gt, before, after = random_pair(MIXED, 6, 70)
        report = evaluate(gt, before, after)
        assert report.q_before == pytest.approx(dataset_jsd(gt, before), rel=1e-12)
        assert report.q_after == pytest.approx(dataset_jsd(gt, after), rel=1e-12)
        assert report.improvement_pct == pytest.approx(
            quality_improvement(report.q_before, report.q_after), rel=1e-12
        )
        assert report.mse_before is not None

    def test_csv_round_trip(self):
        gt, before, after = random_pair(MIXED, 6, 71)
        report = evaluate(gt, before, after)
        again = EvalReport.from_csv_row(report.to_csv_row())
        assert again == report

    def test_text_rendering(self):
        gt, before, after = random_pair(CATEGORICAL_ONLY, 5, 72)
        text = evaluate(gt, before, after).to_text()
        assert "JSD improvement" in text
        assert "MSE" not in text  # no continuous attributes
