import numpy as np
import pytest

from dispocf import kernels
from dispocf.ratings import Dataset
from dispocf.synthetic import generate_synthetic, two_population_config


def make_dataset(rows):
    """Dataset from ``(user, item, rating)`` tuples."""
    users, items, values = zip(*rows)
    return Dataset(users, items, np.array(values, dtype=float))


def random_dataset(rng, n_users=12, n_items=15, density=0.4, min_per_user=1):
    rows = []
    for u in range(n_users):
        n = max(min_per_user, rng.binomial(n_items, density))
        for i in rng.choice(n_items, size=min(n, n_items), replace=False):
            rows.append((f"u{u}", f"i{i}", float(rng.integers(1, 11)) / 2))
    return make_dataset(rows)


@pytest.fixture
def toy():
    return make_dataset([
        ("a", "x", 4.0), ("a", "y", 3.0), ("a", "z", 5.0),
        ("b", "x", 2.0), ("b", "y", 2.5),
        ("c", "y", 4.5), ("c", "z", 1.0), ("c", "w", 3.5),
    ])


@pytest.fixture(scope="session")
def synth_small():
    return generate_synthetic(two_population_config(n_users=40, n_items=120, items_min=15,
                                                    items_max=30, seed=11))


@pytest.fixture(params=kernels.available())
def backend(request):
    with kernels.using(request.param):
        yield request.param
