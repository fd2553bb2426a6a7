import numpy as np
import pytest

from align_lab.data import SynthSpec, gen_synthetic, split


def random_probvec(rng, n, floor=0.0):
    v = rng.dirichlet(np.ones(n)) + floor
    return v / v.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_split():
    ds = gen_synthetic(SynthSpec(n=3, d=4, priors=(0.6, 0.3, 0.1), count=300,
                                 mean_scale=2.0, seed=7))
    return split(ds, labeled_count=30, val_count=5, test_count=10, seed=7)
