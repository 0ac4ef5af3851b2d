import numpy as np
import pytest

from clprivacy import data, nn


@pytest.fixture
def small_net():
    return nn.init_network((4, 8, 3), seed=7)


@pytest.fixture
def separable_2d():
    """Two well-separated Gaussian blobs, 2 classes, 2 features."""
    rng = np.random.default_rng(11)
    n = 120
    x0 = rng.normal(loc=(-2.0, -2.0), scale=0.4, size=(n, 2))
    x1 = rng.normal(loc=(2.0, 2.0), scale=0.4, size=(n, 2))
    x = np.concatenate([x0, x1])
    y = np.concatenate([np.zeros(n, np.int64), np.ones(n, np.int64)])
    perm = rng.permutation(2 * n)
    return x[perm], y[perm]


@pytest.fixture
def tiny_tabular():
    return data.synth_tabular(
        n_samples=400, n_features=40, class_count=8,
        flip_noise=0.05, cluster_spread=0.2, seed=3,
    )


def nets_equal(a: nn.Network, b: nn.Network) -> bool:
    return (
        a.layer_dims == b.layer_dims
        and all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
        and all(np.array_equal(x, y) for x, y in zip(a.biases, b.biases))
    )
