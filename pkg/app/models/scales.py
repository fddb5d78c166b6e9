import numpy as np
from pydantic import BaseModel, ConfigDict

from app.models.height import HeightConfig


class ScaleDecomposition(BaseModel):
    """Dyadic components h_l, l = 1, 2, ..., L/2, of a zero-boundary configuration."""
    model_config = ConfigDict(frozen=True)

    base:       HeightConfig
    components: dict[int, HeightConfig]

    @property
    def scales(self) -> list[int]:
        return sorted(self.components)

    def reconstruct(self) -> np.ndarray:
        total = np.zeros_like(self.base.heights)
        for scale in self.scales:
            total = total + self.components[scale].heights
        return total

    def coarse_part(self, scale: int) -> np.ndarray:
        """h_{>=l} as the sum of the components at scales >= l."""
        total = np.zeros_like(self.base.heights)
        for other in self.scales:
            if other >= scale:
                total = total + self.components[other].heights
        return total
