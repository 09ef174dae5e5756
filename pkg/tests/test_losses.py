import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probclean.data import Pmf, Record, Schema, AttributeSpec, CATEGORICAL
from probclean.losses import LOG_2, batch_jsd, batch_jsd_grad, jsd, record_loss


def pmf_pair(draw_len):
    return st.tuples(
        st.lists(st.floats(0.0, 1.0), min_size=draw_len, max_size=draw_len),
        st.lists(st.floats(0.0, 1.0), min_size=draw_len, max_size=draw_len),
    )


def normalize(raw):
    arr = np.asarray(raw, dtype=float) + 1e-12
    return arr / arr.sum()


class TestJsd:
    def test_identity_is_zero(self):
        for p in ([1.0, 0.0], [0.25, 0.25, 0.5], [0.1] * 10):
            assert jsd(p, p) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_point_masses(self):
        # r = (0.5, 0.5); each KL term is ln 2.
        assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(LOG_2, abs=1e-9)

    def test_point_mass_vs_uniform(self):
        # 0.5*ln(4/3) + 0.5*(0.5*ln(2/3) + 0.5*ln 2) evaluated directly.
        expected = 0.21576155433883565
        assert jsd([1.0, 0.0], [0.5, 0.5]) == pytest.approx(expected, abs=1e-9)

    def test_handles_zeros_without_infinities(self):
        assert math.isfinite(jsd([1.0, 0.0, 0.0], [0.0, 0.5, 0.5]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            jsd([1.0, 0.0], [1.0, 0.0, 0.0])

    @given(st.integers(2, 6), st.integers(0, 10**9))
    @settings(max_examples=60, deadline=None)
    def test_symmetry_and_bounds(self, k, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(k) * rng.uniform(0.2, 3.0))
        q = rng.dirichlet(np.ones(k) * rng.uniform(0.2, 3.0))
        forward_value = jsd(p, q)
        assert forward_value == pytest.approx(jsd(q, p), abs=1e-12)
        assert -1e-12 <= forward_value <= LOG_2 + 1e-12

    @given(st.integers(2, 6), st.integers(0, 10**9))
    @settings(max_examples=30, deadline=None)
    def test_zero_iff_equal(self, k, seed):
        rng = np.random.default_rng(seed)
        p = rng.dirichlet(np.ones(k))
        assert jsd(p, p) <= 1e-12
        q = p.copy()
        q[0], q[1] = q[0] + 0.05, max(q[1] - 0.05, 0.0)
        q = q / q.sum()
        if not np.allclose(p, q, atol=1e-9):
            assert jsd(p, q) > 1e-9


class TestRecordLoss:
    @pytest.fixture
    def schema(self):
        return Schema(
            (AttributeSpec("a", CATEGORICAL, 2), AttributeSpec("b", CATEGORICAL, 2))
        )

    def test_identical_records(self, schema):
        rec = Record([Pmf([0.3, 0.7]), Pmf([1.0, 0.0])])
        assert record_loss(rec, rec, schema) == pytest.approx(0.0, abs=1e-12)

    def test_additivity(self, schema):
        x = Record([Pmf([1.0, 0.0]), Pmf([1.0, 0.0])])
        y = Record([Pmf([0.0, 1.0]), Pmf([0.0, 1.0])])
        assert record_loss(x, y, schema) == pytest.approx(2 * LOG_2, abs=1e-9)

    def test_mask_excludes_attribute(self, schema):
        x = Record([Pmf([1.0, 0.0]), Pmf([1.0, 0.0])])
        y = Record([Pmf([0.0, 1.0]), Pmf([0.0, 1.0])])
        assert record_loss(x, y, schema, mask=[True, False]) == pytest.approx(
            LOG_2, abs=1e-9
        )


class TestBatchJsd:
    def test_matches_scalar_jsd(self):
        rng = np.random.default_rng(3)
        slices = ((0, 2), (2, 5))
        targets = np.hstack([rng.dirichlet(np.ones(2), 4), rng.dirichlet(np.ones(3), 4)])
        outputs = np.hstack([rng.dirichlet(np.ones(2), 4), rng.dirichlet(np.ones(3), 4)])
        total = sum(
            jsd(targets[i, lo:hi], outputs[i, lo:hi]) for i in range(4) for lo, hi in slices
        )
        assert batch_jsd(targets, outputs, slices) == pytest.approx(total, rel=1e-12)

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        slices = ((0, 3),)
        targets = rng.dirichlet(np.ones(3), 2)
        outputs = rng.dirichlet(np.ones(3), 2)
        _, grad = batch_jsd_grad(targets, outputs, slices)
        h = 1e-7
        for i in range(2):
            for j in range(3):
                bumped = outputs.copy()
                bumped[i, j] += h
                up = batch_jsd(targets, bumped, slices)
                bumped[i, j] -= 2 * h
                down = batch_jsd(targets, bumped, slices)
                fd = (up - down) / (2 * h)
                assert grad[i, j] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_mask_zeroes_loss_and_grad(self):
        rng = np.random.default_rng(5)
        slices = ((0, 2), (2, 4))
        targets = np.hstack([rng.dirichlet(np.ones(2), 3), rng.dirichlet(np.ones(2), 3)])
        outputs = np.hstack([rng.dirichlet(np.ones(2), 3), rng.dirichlet(np.ones(2), 3)])
        mask = np.zeros((3, 2), dtype=bool)
        mask[1, 0] = True
        loss, grad = batch_jsd_grad(targets, outputs, slices, mask)
        assert np.all(grad[1, 0:2] == 0.0)
        unmasked_loss, _ = batch_jsd_grad(targets, outputs, slices)
        removed = jsd(targets[1, 0:2], outputs[1, 0:2])
        assert loss == pytest.approx(unmasked_loss - removed, rel=1e-12)
