from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField, field_validator
from sqlalchemy import JSON
from sqlmodel import Field, SQLModel

from app.models.height import FloatArray

RECORD_OK = 'ok'
RECORD_BAND_EXHAUSTED = 'band_exhausted'


class SweepRecordBase(SQLModel):
    """Observables of one (L, replicate) ground-state run"""
    run_hash:          str             = Field(nullable=False, index=True,                   description="Config hash of the sweep that produced the record")
    system_size:       int             = Field(nullable=False, index=True,                   description="System size L")
    replicate:         int             = Field(nullable=False,                               description="Replicate index")
    seed:              str             = Field(nullable=False,                               description="Replicate seed (unsigned 64-bit, decimal)")
    status:            str             = Field(nullable=False, default=RECORD_OK,            description="ok, or the failure that excluded the record")
    min_energy:        Optional[float] = Field(nullable=True,  default=None,                 description="min (D - W)")
    dirichlet:         Optional[float] = Field(nullable=True,  default=None,                 description="D(h_*)")
    field:             Optional[float] = Field(nullable=True,  default=None,                 description="W(h_*)")
    mass:              Optional[float] = Field(nullable=True,  default=None,                 description="M(h_*)")
    midpoint:          Optional[float] = Field(nullable=True,  default=None,                 description="h_*(L/2)")
    band_hits:         int             = Field(nullable=False, default=0,                    description="Adaptive band doublings of the main minimization")
    w1_hat:            Optional[float] = Field(nullable=True,  default=None,                 description="Frontier estimate of sup W/L over D/L <= 1")
    w1_extrapolated:   Optional[bool]  = Field(nullable=True,  default=None,                 description="Frontier did not bracket D/L = 1")
    dw_field:          Optional[float] = Field(nullable=True,  default=None,                 description="W(h_DW)")
    dw_dirichlet:      Optional[float] = Field(nullable=True,  default=None,                 description="D(h_DW)")
    two_scale_energy:  Optional[float] = Field(nullable=True,  default=None,                 description="E of the two-scale competitor")
    two_scale_binning: Optional[float] = Field(nullable=True,  default=None,                 description="Binning error of the two-scale competitor")
    two_scale_scaling: Optional[float] = Field(nullable=True,  default=None,                 description="Scaling error of the two-scale competitor")
    two_scale_small:   Optional[float] = Field(nullable=True,  default=None,                 description="Small-scale term of the two-scale competitor")


class SweepRecord(SweepRecordBase, table=True):
    """Table model for sweep records"""
    __tablename__ = 'sweep_records'
    id:           Optional[int]        = Field(default=None, primary_key=True)
    per_scale:    dict[str, Any]       = Field(default_factory=dict, sa_type=JSON,           description="p -> l -> D_p(h_l) / L")
    coarse_scale: dict[str, Any]       = Field(default_factory=dict, sa_type=JSON,           description="p -> l -> D_p(h_{>=l}) / L")
    modulus:      dict[str, Any]       = Field(default_factory=dict, sa_type=JSON,           description="gap -> |h_*(y) - h_*(x)| over disjoint windows")
    frontier:     list[Any]            = Field(default_factory=list, sa_type=JSON,           description="[mu, D/L, W/L, (mu D - W)/L] per penalty")
    heights:      list[Any]            = Field(default_factory=list, sa_type=JSON,           description="h_* at every site")
    runtime:      float                = Field(nullable=False, default=0.0,                  description="Wall-clock seconds (kept out of the CSV export)")

    @property
    def ok(self) -> bool:
        return self.status == RECORD_OK

    def per_scale_at(self, p: float) -> dict[int, float]:
        return {int(scale): value for scale, value in self.per_scale.get(repr(float(p)), {}).items()}

    def coarse_scale_at(self, p: float) -> dict[int, float]:
        return {int(scale): value for scale, value in self.coarse_scale.get(repr(float(p)), {}).items()}

    def frontier_energy(self, mu: float) -> Optional[float]:
        """(mu D - W) / L at a frontier penalty, if recorded."""
        for point in self.frontier:
            if point[0] == mu:
                return point[3]
        return None


class SweepResult(BaseModel):
    """Every record of one sweep, sorted by (L, replicate)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    run_hash:    str
    master_seed: int
    records:     list[SweepRecord] = PydanticField(default_factory=list)

    @property
    def ok_records(self) -> list[SweepRecord]:
        return [record for record in self.records if record.ok]

    @property
    def excluded(self) -> int:
        return sum(1 for record in self.records if not record.ok)

    @property
    def sizes(self) -> list[int]:
        return sorted({record.system_size for record in self.ok_records})

    def at_size(self, size: int) -> list[SweepRecord]:
        return [record for record in self.ok_records if record.system_size == size]


class SampleSet(BaseModel):
    """Labelled samples of one observable"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: FloatArray
    label:  str       = ''
    seeds:  list[str] = PydanticField(default_factory=list, description="Seed provenance of the samples")

    @field_validator('values')
    @classmethod
    def _non_empty_finite(cls, values):
        if values.size == 0:
            raise ValueError('a sample set cannot be empty')
        if not np.all(np.isfinite(values)):
            raise ValueError('samples must be finite')
        return values


class OrliczEstimate(BaseModel):
    """Empirical Orlicz norm: mean exp(|X / nu|^s) = e"""
    model_config = ConfigDict(frozen=True)

    s:            float                = PydanticField(ge=1)
    nu_hat:       float                = PydanticField(ge=0)
    n:            int
    bracket:      tuple[float, float]
    tolerance:    float
    bootstrap_se: Optional[float]      = None
    corrected:    Optional[float]      = PydanticField(default=None, description="Bootstrap bias-corrected nu: 2 nu_hat - mean of the resampled nu")
    label:        str                  = ''

    @property
    def value(self) -> float:
        """Bias-corrected nu when a bootstrap ran, else nu_hat."""
        return self.nu_hat if self.corrected is None else self.corrected
