import numpy as np
import pytest

from geomorph.pipeline import Pipeline

DTYPES = (np.uint8, np.uint16, np.float32, np.float64)


def random_image(rng, shape, dtype):
    dtype = np.dtype(dtype)
    if dtype.kind == "f":
        return (rng.random(shape) * 200 - 50).astype(dtype)
    return rng.integers(0, np.iinfo(dtype).max, shape, endpoint=True).astype(dtype)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def pipelines():
    pipes = {T: Pipeline(T, "none") for T in (1, 2, 8)}
    yield pipes
    for p in pipes.values():
        p.close()
