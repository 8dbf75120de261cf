import numpy as np
import pytest

from clustercache.model import ContentLibrary, NetworkConfig
from clustercache.stochgeo import optimal_access_probability

# Default operating point: 20 clusters/km^2, 5 devices/cluster, 10 m
# displacement, alpha 4, 0 dB threshold, 23/43 dBm powers, 20 MHz.
TABLE1 = dict(
    lambda_p=20e-6,
    n_bar=5.0,
    sigma=10.0,
    alpha=4.0,
    theta=1.0,
    p_d=10 ** ((23.0 - 30.0) / 10.0),
    p_b=10 ** ((43.0 - 30.0) / 10.0),
    w_total=20e6,
    access_p=optimal_access_probability(0.1, 1.0),
)


@pytest.fixture(scope="session")
def table1_cfg() -> NetworkConfig:
    return NetworkConfig(**TABLE1)


@pytest.fixture(scope="session")
def table1_lib() -> ContentLibrary:
    return ContentLibrary.zipf(n_files=500, beta=1.0, cache_size=10,
                               mean_size_mbits=5.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20180907)


def random_box_simplex(rng, n_rows, n_files, budget):
    """Random matrix of feasible caching vectors (rows sum to budget, in [0,1]).

    Proportional scaling with a few vectorized clip-and-redistribute
    passes; rows that fail to converge are discarded by the caller.
    """
    b = rng.random((n_rows, n_files))
    for _ in range(12):
        b = np.clip(b, 0.0, 1.0)
        fixed = b >= 1.0
        deficit = budget - fixed.sum(axis=1)
        free_mass = np.where(~fixed, b, 0.0).sum(axis=1)
        scale = np.where(free_mass > 0, deficit / np.where(free_mass > 0, free_mass, 1.0), 0.0)
        b = np.where(fixed, 1.0, b * scale[:, None])
    ok = np.abs(b.sum(axis=1) - budget) < 1e-9
    return b[ok]
