import numpy as np
import pytest

from app.engine.potential import PotentialField
from app.models.experiment import DEFAULT_RESOLUTION
from app.models.height import HeightConfig


class LinearField:
    """W(x, y) = slope * y in every column; ground states are discrete parabolas."""

    def __init__(self, system_size: int, slope: float = 0.0, resolution: float = DEFAULT_RESOLUTION):
        self.system_size = system_size
        self.slope = slope
        self.resolution = resolution

    def values(self, x, ys):
        return self.slope * np.asarray(ys, dtype=np.float64)

    def batch(self, xs, ys):
        xs, ys = np.broadcast_arrays(np.asarray(xs), np.asarray(ys, dtype=np.float64))
        return self.slope * ys.astype(np.float64)

    def grid(self, x, start, count, stride):
        return self.slope * self.resolution * (start + stride * np.arange(count, dtype=np.float64))


@pytest.fixture
def zero_field():
    def make(L: int) -> LinearField:
        return LinearField(L, 0.0)
    return make


@pytest.fixture
def linear_field():
    def make(L: int, slope: float) -> LinearField:
        return LinearField(L, slope)
    return make


@pytest.fixture
def field():
    return PotentialField(master_seed=20240611, system_size=64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_config(rng):
    """Zero-boundary Gaussian configuration of length L."""
    def make(L: int, spread: float | None = None) -> HeightConfig:
        heights = rng.normal(0.0, spread or np.sqrt(L), L + 1)
        heights[0] = heights[-1] = 0.0
        return HeightConfig(heights=heights)
    return make
