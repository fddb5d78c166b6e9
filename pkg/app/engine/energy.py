"""Energy functionals on lattice height configurations.

Sums are accumulated with ``math.fsum`` so results do not depend on the
order numpy would reduce in.
"""

from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np

from app.engine.potential import Potential
from app.exceptions import DomainError
from app.models.height import EnergyBreakdown, GreenFunction, HeightConfig


def _check_span(h: HeightConfig, g: HeightConfig) -> None:
    if not h.same_span(g):
        raise DomainError('configurations live on different lattice intervals')


def dirichlet_p(h: HeightConfig, p: float) -> float:
    if p < 1:
        raise DomainError(f'p-Dirichlet energy needs p >= 1, got {p}')
    increments = np.abs(np.diff(h.heights))
    return 2.0 ** (-p / 2.0) * math.fsum(np.power(increments, p))


def dirichlet(h: HeightConfig) -> float:
    increments = np.diff(h.heights)
    return 0.5 * math.fsum(increments * increments)


def field_term(field: Potential, h: HeightConfig) -> float:
    """Sum of W(x, h(x)) over the interior columns of h."""
    columns = h.sites[1:-1]
    if columns.size == 0:
        return 0.0
    if columns[0] < 1 or columns[-1] > field.system_size - 1:
        raise DomainError(f'interior columns {columns[0]}..{columns[-1]} outside the field '
                          f'columns 1..{field.system_size - 1}')
    return math.fsum(field.batch(columns, h.interior))


def mass(h: HeightConfig) -> float:
    return math.fsum(np.abs(h.interior))


def total_energy(field: Potential, h: HeightConfig, p_values: Iterable[float] = ()) -> EnergyBreakdown:
    d = dirichlet(h)
    w = field_term(field, h)
    return EnergyBreakdown(
        dirichlet=d,
        p_dirichlet={float(p): dirichlet_p(h, p) for p in p_values},
        field=w,
        total=d - w,
        mass=mass(h),
    )


def dirichlet_form(h: HeightConfig, g: HeightConfig) -> float:
    _check_span(h, g)
    return math.fsum(np.diff(h.heights) * np.diff(g.heights))


def green_function(L: int, y: int) -> GreenFunction:
    """phi_y(x) = min{(L - y) x / L, y (L - x) / L} on {0, ..., L}."""
    if not 1 <= y <= L - 1:
        raise DomainError(f'Green function pole {y} must be an interior site of 0..{L}')
    x = np.arange(L + 1)
    values = np.minimum((L - y) * x, y * (L - x)) / L
    return GreenFunction(L=L, y=y, values=HeightConfig(heights=values))


def canonical_distance(h: HeightConfig, g: HeightConfig) -> float:
    """Standard deviation of (W(h) - W(g)) / L under the Brownian potential."""
    _check_span(h, g)
    return math.sqrt(mass(h - g)) / h.length


def poincare_gap(h: HeightConfig) -> tuple[float, float]:
    """(M(h) / L^2, sqrt(D(h) / L)); the first never exceeds the second."""
    if not h.has_zero_boundary:
        raise DomainError('the Poincare bound needs zero boundary values')
    L = h.length
    return mass(h) / L ** 2, math.sqrt(dirichlet(h) / L)
