import numpy as np
import pytest

from stainforge import MapperParams, compile_lut, unpack_params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, scale: float = 2.0) -> MapperParams:
    return unpack_params(rng.uniform(-scale, scale, size=59))


def random_u8(rng, h: int = 32, w: int = 32) -> np.ndarray:
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


@pytest.fixture(scope="session")
def fixed_params() -> MapperParams:
    return random_params(np.random.default_rng(777))


@pytest.fixture(scope="session")
def fixed_lut(fixed_params):
    # compiled once; LUT compilation covers the whole 256^3 grid
    return compile_lut(fixed_params)
