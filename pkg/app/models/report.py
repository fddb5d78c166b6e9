from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.sweep import OrliczEstimate


class Regression(BaseModel):
    """Ordinary least squares y = slope * x + intercept"""
    model_config = ConfigDict(frozen=True)

    slope:     float
    intercept: float
    r_squared: float
    slope_se:  float
    n:         int

    @property
    def not_increasing(self) -> bool:
        """Slope not positive at the 2-standard-error level."""
        return self.slope <= 2.0 * self.slope_se


class TrendGate(BaseModel):
    model_config = ConfigDict(frozen=True)

    name:       str
    regression: Regression
    passes:     bool


class NormRelation(BaseModel):
    """||D(h_*)/L||_s against ||W1_hat||_{4s/3}^{4/3}"""
    model_config = ConfigDict(frozen=True)

    s:     float
    lhs:   float
    rhs:   float
    ratio: float


class FrontierConsistency(BaseModel):
    """Predicted companions of the Gaussian supremum next to the measured means"""
    model_config = ConfigDict(frozen=True)

    predicted_dirichlet: float = Field(description="(E W1_hat / 4) ** (4/3)")
    measured_dirichlet:  float = Field(description="mean D(h_*) / L")
    predicted_field:     float = Field(description="(1/4) ** (1/3) * (E W1_hat) ** (4/3)")
    measured_field:      float = Field(description="mean W(h_*) / L")


class TwoScaleSummary(BaseModel):
    """Two-scale competitor against the free minimum over the replicates of one size"""
    model_config = ConfigDict(frozen=True)

    records:      int
    valid:        int   = Field(description="Replicates with E(competitor) >= min E")
    worst_margin: float = Field(description="min over replicates of E(competitor) - min E")
    mean_energy:  float = Field(description="mean E(competitor)")
    binning:      float = Field(description="mean binning error")
    binning_se:   float
    scaling:      float = Field(description="mean scaling error")
    scaling_se:   float
    small:        float = Field(description="mean small-scale term")
    small_se:     float

    @property
    def all_valid(self) -> bool:
        return self.valid == self.records


class SizeSummary(BaseModel):
    """Aggregates over the replicates of one system size"""
    model_config = ConfigDict(frozen=True)

    L:                    int
    replicates:           int
    mean_min_energy:      float
    se_min_energy:        float
    c_L:                  float
    c_L_se:               float
    alpha1:               float
    alpha2:               float
    alpha3:               Optional[float]           = None
    dirichlet_per_length: float
    dirichlet_se:         float
    ratio_wd:             float                     = Field(description="mean W(h_*) / D(h_*)")
    ratio_wd_se:          float
    scale_ratio:          Optional[float]           = Field(default=None, description="mean min(2D - W) / mean min(D - W)")
    scale_ratio_se:       Optional[float]           = None
    dw_per_LlnL:          Optional[float]           = Field(default=None, description="mean W(h_DW) / (L ln L)")
    dw_se:                Optional[float]           = None
    flatness:             dict[int, float]          = Field(default_factory=dict, description="l -> mean D(h_{*,l}) / L")
    flatness_ratio:       Optional[float]           = Field(default=None, description="max / min of flatness over 2 <= l <= L/4")
    flatness_by_p:        dict[str, dict[int, float]] = Field(default_factory=dict, description="p -> l -> mean D_p(h_{*,l}) / L")
    coarse_regression:    Optional[Regression]      = Field(default=None, description="mean D(h_{*,>=l}) / L against ln(L/l)")
    jensen_ok:            Optional[bool]            = None
    norms:                dict[str, OrliczEstimate] = Field(default_factory=dict)
    norm_relation:        Optional[NormRelation]    = None
    frontier:             Optional[FrontierConsistency] = None
    frontier_extrapolated: int                      = Field(default=0, description="Replicates whose frontier did not bracket D/L = 1")
    two_scale:            Optional[TwoScaleSummary] = None


class SuperadditivityRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    L:        int
    l:        int
    defect:   float = Field(description="c_L ln L - c_l ln l - c_{L/l} ln(L/l)")
    scale:    float = Field(description="ln^{1/2}(L/l)")
    constant: float = Field(description="max(0, -defect / scale)")


class ModulusRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    L:          int
    gap:        int
    n:          int
    raw:        float = Field(description="Orlicz-2 norm of |h_*(y) - h_*(x)|")
    norm:       float = Field(description="raw, bias-corrected when bootstrapped")
    normalized: float = Field(description="norm / (gap * (1 + ln^{4/3}(L / gap)))")


class ScalingReport(BaseModel):
    """Aggregated estimators of one sweep; a pure function of its records"""
    model_config = ConfigDict(frozen=True)

    run_hash:                 str
    sizes:                    list[int]
    per_size:                 list[SizeSummary]
    dirichlet_regression:     Regression
    trends:                   list[TrendGate]          = Field(default_factory=list)
    superadditivity:          list[SuperadditivityRow] = Field(default_factory=list)
    superadditivity_constant: Optional[float]          = None
    modulus:                  list[ModulusRow]         = Field(default_factory=list)
    linearization:            dict[str, float]         = Field(default_factory=dict, description="eps^(4/3) ln L target -> median eta at the largest L")
    excluded:                 int                      = 0
    frontier_extrapolated:    int                      = 0
    two_scale_invalid:        int                      = Field(default=0, description="Replicates whose two-scale competitor undercut min E")

    def summary(self, size: int) -> SizeSummary:
        for row in self.per_size:
            if row.L == size:
                return row
        raise KeyError(size)


class ComparisonCounts(BaseModel):
    """Violation counts of the submodularity and order-preservation checks"""
    model_config = ConfigDict(frozen=True)

    L:                         int
    trials:                    int
    submodularity_violations:  int
    order_violations:          int   = Field(description="h_*(a0, a1) below h_*(0, 0) by more than delta")
    extended_order_violations: int   = Field(description="h_*(b) below h_*(b') by more than delta for b >= b'")
    worst_submodularity_gap:   float = Field(description="min over pairs of E(h) + E(g) - E(h max g) - E(h min g)")
    worst_order_gap:           float = Field(description="min over trials of min_x (upper - lower)")

    @property
    def clean(self) -> bool:
        return not (self.submodularity_violations or self.order_violations or self.extended_order_violations)


class EnvelopeRow(BaseModel):
    """Orlicz-3 norm of the envelope excursion X at one bin centre"""
    model_config = ConfigDict(frozen=True)

    center:   tuple[float, float]
    scale:    int
    estimate: OrliczEstimate


class ShearTest(BaseModel):
    """Two-sample KS comparison of the sheared and flat midpoint laws"""
    model_config = ConfigDict(frozen=True)

    L:             int
    replicates:    int
    boundary:      tuple[float, float]
    statistic:     float = Field(description="KS distance between the two empirical laws")
    pvalue:        float
    level:         float
    flat_mean:     float = Field(description="mean h_*(L/2) with zero boundary values")
    sheared_mean:  float = Field(description="mean h_*(L/2) - (h0 + h1) / 2 with boundary values (h0, h1)")

    @property
    def passes(self) -> bool:
        return self.pvalue >= self.level


class ComparisonRun(BaseModel):
    """Comparison suite per system size and the shear test of one sweep config"""
    model_config = ConfigDict(frozen=True)

    run_hash: str
    counts:   list[ComparisonCounts] = Field(default_factory=list)
    shear:    Optional[ShearTest]    = None

    @property
    def clean(self) -> bool:
        return all(counts.clean for counts in self.counts) and (self.shear is None or self.shear.passes)
