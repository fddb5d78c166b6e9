from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, model_validator


def _as_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.float64, copy=True).reshape(-1)
    array.setflags(write=False)
    return array


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda array: array.tolist(), return_type=list),
]


class HeightConfig(BaseModel):
    """A height function on {x_offset, ..., x_offset + L}; first/last entries are the boundary values."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x_offset: int        = Field(default=0, description="Left endpoint of the lattice interval")
    heights:  FloatArray = Field(description="Heights at every site, boundary included")

    @model_validator(mode='after')
    def _check_heights(self) -> 'HeightConfig':
        if self.heights.size < 2:
            raise ValueError('a height configuration needs at least two sites')
        if not np.all(np.isfinite(self.heights)):
            raise ValueError('heights must be finite')
        return self

    @classmethod
    def zeros(cls, length: int, x_offset: int = 0) -> 'HeightConfig':
        return cls(x_offset=x_offset, heights=np.zeros(length + 1))

    @property
    def length(self) -> int:
        """Interval length L (number of bonds)."""
        return self.heights.size - 1

    @property
    def boundary(self) -> tuple[float, float]:
        return float(self.heights[0]), float(self.heights[-1])

    @property
    def interior(self) -> np.ndarray:
        return self.heights[1:-1]

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.x_offset, self.x_offset + self.heights.size)

    @property
    def has_zero_boundary(self) -> bool:
        return self.heights[0] == 0.0 and self.heights[-1] == 0.0

    def same_span(self, other: 'HeightConfig') -> bool:
        return self.x_offset == other.x_offset and self.heights.size == other.heights.size

    def with_heights(self, heights: np.ndarray) -> 'HeightConfig':
        return HeightConfig(x_offset=self.x_offset, heights=heights)

    def __add__(self, other: 'HeightConfig') -> 'HeightConfig':
        return self.with_heights(self.heights + other.heights)

    def __sub__(self, other: 'HeightConfig') -> 'HeightConfig':
        return self.with_heights(self.heights - other.heights)

    def scaled(self, factor: float) -> 'HeightConfig':
        return self.with_heights(factor * self.heights)


class EnergyBreakdown(BaseModel):
    """All energy contributions of one configuration; `total = dirichlet - field`."""
    model_config = ConfigDict(frozen=True)

    dirichlet:   float
    p_dirichlet: dict[float, float] = Field(default_factory=dict)
    field:       float
    total:       float
    mass:        float


class GreenFunction(BaseModel):
    """Discrete Green function phi_y of the Dirichlet form on {0, ..., L}."""
    model_config = ConfigDict(frozen=True)

    L:      int
    y:      int
    values: HeightConfig
