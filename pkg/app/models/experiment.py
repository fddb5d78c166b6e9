import math
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_RESOLUTION = 2.0 ** -6


def is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


class ExperimentConfig(BaseModel):
    """Validated description of one experiment run (all subcommands share it)."""
    model_config = ConfigDict(extra='forbid', frozen=True)

    master_seed:        int             = Field(default=1, ge=0, lt=2 ** 64,                 description="Master seed; replicate seeds are mixed from it")
    system_sizes:       list[int]       = Field(default_factory=lambda: [32, 64, 128],        description="System sizes L, powers of two")
    replicates:         int             = Field(default=8, ge=1,                              description="Replicates per system size")
    resolution:         float           = Field(default=DEFAULT_RESOLUTION, gt=0,             description="Field resolution floor delta_min (a power of two)")
    grid_spacing:       float           = Field(default=0.125, gt=0,                          description="DP height grid spacing delta")
    band_half_width:    Optional[float] = Field(default=None, gt=0,                           description="Initial band half-width B; default 4*sqrt(L)")
    adaptive_band:      bool            = Field(default=True,                                 description="Double the band when the argmin touches its edge")
    band_doubling_cap:  int             = Field(default=6, ge=0,                              description="Maximum number of band doublings")
    mus:                list[float]     = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 4.0], description="Penalties for the Lagrangian frontier")
    p_values:           list[float]     = Field(default_factory=lambda: [2.0, 2.5, 3.0],      description="Exponents for per-scale p-Dirichlet energies")
    run_frontier:       bool            = Field(default=True,                                 description="Estimate W1_hat per replicate")
    run_ding_wirth:     bool            = Field(default=True,                                 description="Run the scale-by-scale lower-bound construction")
    run_two_scale:      bool            = Field(default=False,                                description="Run the two-scale competitor")
    two_scale_ratio:    int             = Field(default=4, ge=2,                              description="Coarse scale l = L / two_scale_ratio (power of two)")
    run_comparison:     bool            = Field(default=False,                                description="Run the comparison suite and the shear test with the sweep")
    comparison_trials:  int             = Field(default=100, ge=1,                            description="Trials for the comparison suite")
    shear_replicates:   int             = Field(default=500, ge=2,                            description="Replicates per sample of the shear-invariance KS test")
    run_modulus:        bool            = Field(default=True,                                 description="Record |h(y)-h(x)| samples per gap")
    run_counting:       bool            = Field(default=False,                                description="Write the lattice-point counting tables with the sweep")
    counting_max_n:     int             = Field(default=6, ge=1, le=8,                        description="Largest N for the ball-count table")
    counting_max_d:     float           = Field(default=16.0, ge=0, le=64,                    description="Largest D for the ball-count table")
    output_dir:         Path            = Field(default=Path('results'),                      description="Directory receiving every artifact")
    jobs:               Optional[int]   = Field(default=None, ge=1,                           description="Worker processes; default from settings")

    @field_validator('system_sizes')
    @classmethod
    def _sizes_are_dyadic(cls, sizes: list[int]) -> list[int]:
        if not sizes:
            raise ValueError('at least one system size is required')
        for size in sizes:
            if size < 2 or not is_power_of_two(size):
                raise ValueError(f'system size {size} is not a power of two >= 2')
        return sorted(set(sizes))

    @field_validator('resolution')
    @classmethod
    def _resolution_is_dyadic(cls, value: float) -> float:
        exponent = -math.log2(value)
        if exponent < 0 or abs(exponent - round(exponent)) > 1e-12:
            raise ValueError('resolution must be 2**-r for an integer r >= 0')
        return 2.0 ** -round(exponent)

    @field_validator('mus')
    @classmethod
    def _mus_positive_sorted(cls, mus: list[float]) -> list[float]:
        if not mus or any(mu <= 0 for mu in mus):
            raise ValueError('penalties must be positive')
        return sorted(mus)

    @field_validator('p_values')
    @classmethod
    def _p_at_least_one(cls, values: list[float]) -> list[float]:
        if any(p < 1 for p in values):
            raise ValueError('p-Dirichlet exponents must be >= 1')
        return values

    @field_validator('two_scale_ratio')
    @classmethod
    def _ratio_dyadic(cls, ratio: int) -> int:
        if not is_power_of_two(ratio):
            raise ValueError('two_scale_ratio must be a power of two')
        return ratio

    @model_validator(mode='after')
    def _grid_on_resolution(self) -> 'ExperimentConfig':
        steps = self.grid_spacing / self.resolution
        if steps < 1 - 1e-12 or abs(steps - round(steps)) > 1e-9:
            raise ValueError('grid_spacing must be a positive integer multiple of resolution')
        if self.band_half_width is not None and self.band_half_width < self.grid_spacing:
            raise ValueError('band_half_width must be at least grid_spacing')
        return self
