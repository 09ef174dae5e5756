import numpy as np
import pytest

from probclean.data import CATEGORICAL, CONTINUOUS, AttributeSpec, Dataset, Schema


@pytest.fixture
def eye_hair_schema():
    """Two binary categorical attributes, as in the worked example table."""
    return Schema(
        (
            AttributeSpec("eye colour", CATEGORICAL, 2, labels=("blue", "brown")),
            AttributeSpec("hair colour", CATEGORICAL, 2, labels=("light", "dark")),
        )
    )


@pytest.fixture
def mixed_schema():
    return Schema(
        (
            AttributeSpec("colour", CATEGORICAL, 3, labels=("red", "green", "blue")),
            AttributeSpec("size", CONTINUOUS, 4, bin_edges=(0.0, 1.0, 2.0, 3.0, 4.0)),
        )
    )


def random_dataset(schema: Schema, n_records: int, seed: int) -> Dataset:
    """Random valid pmf cells via a Dirichlet draw per cell."""
    rng = np.random.default_rng(seed)
    matrix = np.empty((n_records, schema.total_width))
    for lo, hi in schema.slices:
        matrix[:, lo:hi] = rng.dirichlet(np.ones(hi - lo), size=n_records)
    return Dataset.from_matrix(schema, matrix)


@pytest.fixture
def random_dataset_factory():
    return random_dataset
