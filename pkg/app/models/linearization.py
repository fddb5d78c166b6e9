import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import DomainError
from app.models.height import FloatArray


class LinearizationGap(BaseModel):
    """Relative defect between the area functional and its quadratic linearization"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eps:    float      = Field(gt=0)
    slopes: FloatArray = Field(description="Rescaled slopes eps^(2/3) * (h(x) - h(x-1))")
    eta:    float      = Field(ge=0, le=1, description="1 - sum(sqrt(1 + z^2) - 1) / (sum(z^2) / 2)")

    def eta_tilde(self, nu: float) -> float:
        """Share of sum(z^2) carried by slopes with |z| > nu."""
        squares = self.slopes * self.slopes
        total = math.fsum(squares)
        if total == 0.0:
            return 0.0
        return math.fsum(squares[np.abs(self.slopes) > nu]) / total

    def eta_bound(self, nu: float) -> float:
        """(nu^2 + eta_tilde(nu)) / (1 + nu^2); never below eta."""
        if nu <= 0:
            raise DomainError(f'threshold must be positive, got {nu}')
        return (nu * nu + self.eta_tilde(nu)) / (1.0 + nu * nu)
