from enum import IntEnum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.height import EnergyBreakdown, HeightConfig


class TieBreak(IntEnum):
    """Rule applied among equal-cost heights in the DP"""
    SMALLEST_ABS = 1
    LOWEST = 2
    HIGHEST = 3


class MinimizeOptions(BaseModel):
    """Options of one ground-state computation"""
    model_config = ConfigDict(frozen=True)

    grid_spacing:      float            = Field(default=0.125, gt=0,                      description="Height grid spacing delta")
    band_half_width:   Optional[float]  = Field(default=None, gt=0,                       description="Initial band half-width B; default 4*sqrt(L) rounded to delta")
    adaptive_band:     bool             = Field(default=True,                             description="Double the band while the argmin is within 2*delta of its edge")
    band_doubling_cap: int              = Field(default=6, ge=0,                          description="Maximum number of band doublings")
    penalty:           float            = Field(default=1.0, gt=0,                        description="Weight mu of the Dirichlet energy")
    pins:              dict[int, float] = Field(default_factory=dict,                     description="Interior site -> fixed height (on the delta grid)")
    tie_break:         TieBreak         = Field(default=TieBreak.SMALLEST_ABS,            description="Tie rule among equal-cost heights")

    @model_validator(mode='after')
    def _band_covers_grid(self) -> 'MinimizeOptions':
        if self.band_half_width is not None and self.band_half_width < self.grid_spacing:
            raise ValueError('band_half_width must be at least grid_spacing')
        return self

    def with_penalty(self, penalty: float) -> 'MinimizeOptions':
        return self.model_copy(update={'penalty': penalty})


class GroundState(BaseModel):
    """Exact grid minimizer of penalty * D - W with its energies."""
    model_config = ConfigDict(frozen=True)

    config:          HeightConfig
    breakdown:       EnergyBreakdown
    objective:       float          = Field(description="penalty * D - W recomputed from the configuration")
    dp_value:        float          = Field(description="Optimal value reported by the DP")
    penalty:         float
    grid_spacing:    float
    band_half_width: float          = Field(description="Final band half-width after adaptive doublings")
    band_hits:       int            = Field(default=0, description="Number of adaptive band doublings")
    seed:            Optional[int]  = None

    def rows(self) -> list[tuple[int, float]]:
        return [(int(x), float(h)) for x, h in zip(self.config.sites, self.config.heights)]

    def midpoint_deviation(self) -> float:
        """h(mid) minus the average of the boundary values."""
        heights = self.config.heights
        h0, h1 = self.config.boundary
        return float(heights[heights.size // 2]) - 0.5 * (h0 + h1)


class FrontierPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu:                   float
    dirichlet_per_length: float
    field_per_length:     float
    energy_per_length:    float = Field(description="(mu * D - W) / L")


class FrontierEstimate(BaseModel):
    """Lagrangian frontier of sup W/L over the Dirichlet ball."""
    model_config = ConfigDict(frozen=True)

    points:       list[FrontierPoint]
    W1_hat:       float
    extrapolated: bool = Field(default=False, description="No penalty pair brackets D/L = 1")
