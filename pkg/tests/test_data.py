import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probclean.data import (
    CATEGORICAL,
    CONTINUOUS,
    AttributeSpec,
    Dataset,
    Pmf,
    Record,
    Schema,
    devectorize,
    lift_crisp_table,
    one_hot,
    vectorize,
)


class TestPmf:
    def test_valid_construction(self):
        p = Pmf([0.7, 0.3])
        assert np.allclose(p.probs, [0.7, 0.3])
        assert len(p) == 2

    def test_renormalizes_small_deviation(self):
        p = Pmf([0.5000001, 0.4999999])
        assert abs(float(p.probs.sum()) - 1.0) <= 1e-9

    def test_rejects_large_deviation(self):
        with pytest.raises(ValueError):
            Pmf([0.5, 0.6])

    def test_rejects_negative_and_above_one(self):
        with pytest.raises(ValueError):
            Pmf([-0.1, 1.1])

    def test_rejects_zero_mass(self):
        with pytest.raises(ValueError):
            Pmf([0.0, 0.0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Pmf([np.nan, 1.0])

    def test_immutable(self):
        p = Pmf([1.0, 0.0])
        with pytest.raises(ValueError):
            p.probs[0] = 0.5

    def test_argmax_tie_breaks_low(self):
        assert Pmf([0.5, 0.5]).argmax() == 0

    @given(st.lists(st.floats(0.001, 1.0), min_size=2, max_size=8))
    def test_normalized_input_always_valid(self, raw):
        arr = np.asarray(raw)
        p = Pmf(arr / arr.sum())
        assert abs(float(p.probs.sum()) - 1.0) <= 1e-9
        assert np.all(p.probs >= 0.0) and np.all(p.probs <= 1.0)


class TestAttributeSpec:
    def test_cardinality_floor(self):
        with pytest.raises(ValueError):
            AttributeSpec("x", CATEGORICAL, 1)

    def test_default_labels(self):
        spec = AttributeSpec("x", CATEGORICAL, 3)
        assert spec.labels == ("0", "1", "2")

    def test_continuous_needs_edges(self):
        with pytest.raises(ValueError):
            AttributeSpec("x", CONTINUOUS, 3)

    def test_edges_must_increase(self):
        with pytest.raises(ValueError):
            AttributeSpec("x", CONTINUOUS, 2, bin_edges=(0.0, 0.0, 1.0))

    def test_bin_centers_are_midpoints(self):
        spec = AttributeSpec("x", CONTINUOUS, 4, bin_edges=(0.0, 1.0, 2.0, 3.0, 4.0))
        assert spec.bin_centers == (0.5, 1.5, 2.5, 3.5)

    def test_label_resolution(self):
        spec = AttributeSpec("x", CATEGORICAL, 2, labels=("no", "yes"))
        assert spec.label_to_index("yes") == 1
        assert spec.label_to_index(0) == 0
        with pytest.raises(KeyError):
            spec.label_to_index("maybe")


class TestSchema:
    def test_unique_names(self):
        a = AttributeSpec("x", CATEGORICAL, 2)
        with pytest.raises(ValueError):
            Schema((a, a))

    def test_slices(self, mixed_schema):
        assert mixed_schema.slices == ((0, 3), (3, 7))
        assert mixed_schema.total_width == 7

    def test_dict_round_trip(self, mixed_schema):
        assert Schema.from_dict(mixed_schema.to_dict()) == mixed_schema


class TestVectorize:
    def test_worked_example(self, eye_hair_schema):
        # Row 1 of the example table: eyes (0.7, 0.3), hair (1.0, 0.0).
        rec = Record([Pmf([0.7, 0.3]), Pmf([1.0, 0.0])])
        assert vectorize(rec, eye_hair_schema).tolist() == [0.7, 0.3, 1.0, 0.0]

    def test_single_attribute_identity(self):
        schema = Schema((AttributeSpec("a", CATEGORICAL, 3),))
        rec = Record([Pmf([1.0, 0.0, 0.0])])
        assert vectorize(rec, schema).tolist() == [1.0, 0.0, 0.0]

    def test_concatenation(self):
        schema = Schema(
            (AttributeSpec("a", CATEGORICAL, 2), AttributeSpec("b", CATEGORICAL, 3))
        )
        rec = Record([Pmf([0.5, 0.5]), Pmf([0.2, 0.3, 0.5])])
        assert vectorize(rec, schema).tolist() == [0.5, 0.5, 0.2, 0.3, 0.5]

    def test_schema_mismatch(self, eye_hair_schema):
        rec = Record([Pmf([1.0, 0.0])])
        with pytest.raises(ValueError):
            vectorize(rec, eye_hair_schema)

    def test_devectorize_worked_example(self, eye_hair_schema):
        rec = devectorize(np.array([0.7, 0.3, 1.0, 0.0]), eye_hair_schema)
        assert rec == Record([Pmf([0.7, 0.3]), Pmf([1.0, 0.0])])

    def test_devectorize_renormalizes(self, eye_hair_schema):
        rec = devectorize(np.array([0.5000001, 0.4999999, 1.0, 0.0]), eye_hair_schema)
        assert abs(float(rec[0].probs.sum()) - 1.0) <= 1e-9

    def test_devectorize_wrong_length(self, eye_hair_schema):
        with pytest.raises(ValueError):
            devectorize(np.array([1.0, 0.0, 0.0]), eye_hair_schema)

    def test_devectorize_zero_slice(self, eye_hair_schema):
        with pytest.raises(ValueError):
            devectorize(np.array([0.0, 0.0, 1.0, 0.0]), eye_hair_schema)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        schema = Schema(
            tuple(
                AttributeSpec(f"a{j}", CATEGORICAL, int(k))
                for j, k in enumerate(rng.integers(2, 6, size=rng.integers(1, 4)))
            )
        )
        cells = []
        for spec in schema.attributes:
            raw = rng.dirichlet(np.ones(spec.cardinality))
            cells.append(Pmf(raw))
        rec = Record(cells)
        v = vectorize(rec, schema)
        back = devectorize(v, schema)
        for a, b in zip(rec.cells, back.cells):
            assert np.array_equal(a.probs, b.probs)


class TestOneHot:
    def test_examples(self):
        assert one_hot(3, 4).probs.tolist() == [0.0, 0.0, 1.0, 0.0]
        assert one_hot(1, 2).probs.tolist() == [1.0, 0.0]
        assert one_hot(4, 4).probs.tolist() == [0.0, 0.0, 0.0, 1.0]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            one_hot(0, 4)
        with pytest.raises(ValueError):
            one_hot(5, 4)


class TestLiftCrispTable:
    def test_chain_example(self):
        # First sampled row A=0, B=0, C=2 lifts to the one-hot layout.
        schema = Schema(tuple(AttributeSpec(n, CATEGORICAL, 4) for n in "ABC"))
        ds = lift_crisp_table([[0, 0, 2]], schema)
        assert ds.matrix[0].tolist() == [1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0]

    def test_empty_table(self, eye_hair_schema):
        ds = lift_crisp_table([], eye_hair_schema)
        assert ds.n_records == 0

    def test_unknown_label(self, eye_hair_schema):
        with pytest.raises(KeyError):
            lift_crisp_table([["blue", "purple"]], eye_hair_schema)

    def test_one_hot_output(self, eye_hair_schema):
        ds = lift_crisp_table([["blue", "dark"], ["brown", "light"]], eye_hair_schema)
        assert set(np.unique(ds.matrix)) == {0.0, 1.0}
        for lo, hi in eye_hair_schema.slices:
            assert np.all(ds.matrix[:, lo:hi].sum(axis=1) == 1.0)


class TestDataset:
    def test_matrix_read_only(self, mixed_schema, random_dataset_factory):
        ds = random_dataset_factory(mixed_schema, 5, 0)
        with pytest.raises(ValueError):
            ds.matrix[0, 0] = 2.0

    def test_from_matrix_validates(self, eye_hair_schema):
        bad = np.array([[0.9, 0.2, 1.0, 0.0]])
        with pytest.raises(ValueError):
            Dataset.from_matrix(eye_hair_schema, bad)

    def test_record_access(self, eye_hair_schema):
        ds = Dataset(
            eye_hair_schema,
            [Record([Pmf([0.7, 0.3]), Pmf([1.0, 0.0])])],
        )
        assert ds.record(0)[0] == Pmf([0.7, 0.3])
        assert ds.cell(0, 1) == Pmf([1.0, 0.0])
