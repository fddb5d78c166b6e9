from pydantic import BaseModel, ConfigDict, Field


class BallCount(BaseModel):
    """Number of integer points y in Z^N with mean square below D"""
    model_config = ConfigDict(frozen=True)

    N: int   = Field(ge=1)
    D: float = Field(ge=0)
    Z: int   = Field(ge=0)


class BoundRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    N:     int
    D:     float
    Z:     int
    bound: float = Field(description="(C0 * (D + 1)) ** (N / 2)")
    ok:    bool


class BinCount(BaseModel):
    """Exact bin count next to its product-form upper bound"""
    model_config = ConfigDict(frozen=True)

    L:             int
    l:             int
    D_hat:         float
    count:         int
    product_bound: int
    box_radius:    int = Field(description="Bins enumerated with |h_bar(2 l x_hat)| <= 2 l * box_radius")
