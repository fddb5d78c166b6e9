from pydantic import BaseModel, ConfigDict, Field

from app.models.ground_state import GroundState
from app.models.height import HeightConfig


class DWChoice(BaseModel):
    """One peak decision of the scale-by-scale construction"""
    model_config = ConfigDict(frozen=True)

    scale:        int   = Field(description="Dyadic scale l")
    peak:         int   = Field(description="Peak index x_hat; the peak sits at (2*x_hat - 1) * l")
    choice:       int   = Field(description="Peak height, 0 or l")
    triangle_sum: float = Field(description="Noise integrated over the upper-third triangle")


class DWLedger(BaseModel):
    """Record of one scale-by-scale lower-bound construction"""
    model_config = ConfigDict(frozen=True)

    system_size:     int
    seed:            int
    choices:         list[DWChoice]
    scale_dirichlet: dict[int, float] = Field(description="l -> D(h_l) / L")
    nesting_sup:     dict[int, float] = Field(description="l -> sup of the part of h below scale l")
    config:          HeightConfig
    field_energy:    float            = Field(description="W(h)")
    dirichlet:       float            = Field(description="D(h)")

    def choices_at(self, scale: int) -> list[DWChoice]:
        return [choice for choice in self.choices if choice.scale == scale]

    @property
    def dirichlet_ok(self) -> bool:
        return all(value <= 0.5 for value in self.scale_dirichlet.values())

    @property
    def nesting_ok(self) -> bool:
        return all(value <= 2.0 * scale / 3.0 for scale, value in self.nesting_sup.items())


class TwoScaleLedger(BaseModel):
    """Record of one two-scale superadditivity competitor"""
    model_config = ConfigDict(frozen=True)

    system_size:         int
    coarse_scale:        int
    seed:                int
    coarse_minimizer:    GroundState       = Field(description="Minimizer of the coarse energy on the L/l lattice")
    coarse_field_values: list[float]       = Field(description="Coarse potential along the coarse minimizer")
    binned:              list[int]         = Field(description="Integer bin of the coarse minimizer")
    rescaled:            HeightConfig      = Field(description="l * bin at multiples of l, affine in between")
    competitor:          GroundState       = Field(description="Minimizer with the rescaled values pinned")
    unconstrained:       GroundState       = Field(description="Unconstrained minimizer on the same realization")
    coarse_energy:       float             = Field(description="l * E_hat(coarse minimizer)")
    binned_energy:       float             = Field(description="l * E_hat(bin)")
    rescaled_energy:     float             = Field(description="E(rescaled profile)")
    binning_error:       float             = Field(description="l * (E_hat(bin) - E_hat(coarse minimizer))")
    scaling_error:       float             = Field(description="E(rescaled) - l * E_hat(bin)")
    small_scale_term:    float             = Field(description="E(competitor) - E(rescaled)")

    @property
    def competitor_energy(self) -> float:
        return self.competitor.objective

    @property
    def is_valid(self) -> bool:
        """The competitor never beats the unconstrained minimum on its own realization."""
        return self.competitor.objective >= self.unconstrained.objective - 1e-9 * max(1.0, abs(self.unconstrained.objective))
