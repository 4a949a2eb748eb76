import numpy as np
import pytest

from aefrc import make_dataset


@pytest.fixture(scope="session")
def iris_ds():
    from sklearn.datasets import load_iris
    raw = load_iris()
    return make_dataset(raw.data, raw.target + 1,
                        label_names=tuple(raw.target_names))


@pytest.fixture(scope="session")
def wine_ds():
    from sklearn.datasets import load_wine
    raw = load_wine()
    return make_dataset(raw.data, raw.target + 1,
                        label_names=tuple(raw.target_names))


@pytest.fixture()
def blobs3():
    """Three well-separated Gaussian blobs, 30 samples each."""
    rng = np.random.default_rng(42)
    X = np.vstack([rng.normal(c, 0.3, (30, 4)) for c in (0.0, 2.0, 4.0)])
    y = np.repeat([1, 2, 3], 30)
    return make_dataset(X, y)
