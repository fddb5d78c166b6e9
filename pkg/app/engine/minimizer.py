"""Exact grid ground states of penalty * D - W by dynamic programming.

Interior heights are restricted to the delta grid inside a band around the
piecewise-linear interpolation of the boundary values and pins. The transition
min over the previous site is a distance transform with quadratic kernel, done
with the lower envelope of parabolas (Felzenszwalb-Huttenlocher) in O(K) per
site.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from app.engine.energy import total_energy
from app.engine.potential import Potential
from app.exceptions import BandExhaustedError, DomainError, InvariantError
from app.models.ground_state import FrontierEstimate, FrontierPoint, GroundState, MinimizeOptions, TieBreak
from app.models.height import HeightConfig
from app.utils.artifacts import write_csv, write_json

logger = logging.getLogger(__name__)

EDGE_MARGIN = 2
OBJECTIVE_RTOL = 1e-9


@njit(cache=True)
def _prefer(a, b, tie):
    """True when height index a wins a tie against b."""
    if tie == 1:
        if abs(a) != abs(b):
            return abs(a) < abs(b)
        return a < b
    if tie == 2:
        return a < b
    return a > b


@njit(cache=True)
def _distance_transform(cost, src_lo, dst_lo, weight, tie, out_value, out_arg):
    """out_value[i] = min_j cost[j] + weight * (dst_lo + i - src_lo - j)**2, argmin j in out_arg.

    A parabola that meets the envelope exactly at a breakpoint is kept as a
    zero-width piece, so every parabola tied at that point competes in the
    tie rule.
    """
    n = cost.size
    v = np.empty(n, np.int64)
    z = np.empty(n + 1)
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        fq = cost[q] + weight * q * q
        while True:
            p = v[k]
            s = (fq - (cost[p] + weight * p * p)) / (2.0 * weight * (q - p))
            if s >= z[k]:
                break
            k -= 1
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    size = k + 1

    k = 0
    shift = dst_lo - src_lo
    for i in range(out_value.size):
        t = float(shift + i)
        while z[k + 1] < t:
            k += 1
        best = v[k]
        d = t - best
        value = cost[best] + weight * d * d
        j = k + 1
        while j < size and z[j] == t:
            other = v[j]
            d = t - other
            alt = cost[other] + weight * d * d
            if alt < value or (alt == value and _prefer(src_lo + other, src_lo + best, tie)):
                best = other
                value = alt
            j += 1
        out_value[i] = value
        out_arg[i] = best


def _pick(indices: np.ndarray, tie: TieBreak) -> int:
    """Winner among tied height indices."""
    if tie == TieBreak.SMALLEST_ABS:
        order = np.lexsort((indices, np.abs(indices)))
        return int(indices[order[0]])
    if tie == TieBreak.LOWEST:
        return int(indices.min())
    return int(indices.max())


def default_half_width(L: int, spacing: float) -> float:
    """4 sqrt(L) rounded to the grid, at least one grid step."""
    return max(spacing, round(4.0 * math.sqrt(L) / spacing) * spacing)


def _grid_stride(field: Potential, spacing: float) -> int:
    steps = spacing / field.resolution
    stride = round(steps)
    if stride < 1 or abs(steps - stride) > 1e-9:
        raise DomainError(f'grid spacing {spacing} is not a positive multiple of the field '
                          f'resolution {field.resolution}')
    return stride


def _grid_index(value: float, spacing: float, what: str) -> int:
    ratio = value / spacing
    index = round(ratio)
    if abs(ratio - index) > 1e-9:
        raise DomainError(f'{what} {value} is not on the grid of spacing {spacing}')
    return int(index)


class _Problem:
    """One band-restricted DP instance on span [left, left + n]."""

    def __init__(self, field: Potential, span: tuple[int, int], h0: float, h1: float,
                 opts: MinimizeOptions, grid_cache: Optional[dict]):
        left, right = span
        n = right - left
        if n < 1:
            raise DomainError(f'span {span} is empty')
        if n > 1 and (left + 1 < 1 or right - 1 > field.system_size - 1):
            raise DomainError(f'span {span} leaves the field columns 1..{field.system_size - 1}')
        if not (math.isfinite(h0) and math.isfinite(h1)):
            raise DomainError('boundary values must be finite')
        self.field = field
        self.left, self.n = left, n
        self.h0, self.h1 = float(h0), float(h1)
        self.opts = opts
        self.spacing = opts.grid_spacing
        self.stride = _grid_stride(field, self.spacing)
        self.weight = opts.penalty * self.spacing ** 2 / 2.0
        self.grid_cache = grid_cache

        self.pins: dict[int, int] = {}
        for site, height in sorted(opts.pins.items()):
            local = site - left
            if not 0 < local < n:
                raise DomainError(f'pin at site {site} is not strictly inside span {span}')
            self.pins[local] = _grid_index(height, self.spacing, f'pin height at site {site}')

        anchors_x = [0, *self.pins, n]
        anchors_h = [self.h0, *(self.spacing * j for j in self.pins.values()), self.h1]
        self.centre = np.interp(np.arange(n + 1), anchors_x, anchors_h)

    def band(self, half_width: float) -> tuple[np.ndarray, np.ndarray]:
        lows = np.ceil((self.centre - half_width) / self.spacing - 1e-9).astype(np.int64)
        highs = np.floor((self.centre + half_width) / self.spacing + 1e-9).astype(np.int64)
        for local, index in self.pins.items():
            lows[local] = highs[local] = index
        return lows, highs

    def _site_values(self, local: int, lo: int, count: int) -> np.ndarray:
        x = self.left + local
        key = (x, lo * self.stride, count, self.stride)
        if self.grid_cache is not None and key in self.grid_cache:
            return self.grid_cache[key]
        values = self.field.grid(x, lo * self.stride, count, self.stride)
        if self.grid_cache is not None:
            self.grid_cache[key] = values
        return values

    def solve(self, lows: np.ndarray, highs: np.ndarray) -> tuple[np.ndarray, float]:
        """Optimal interior indices and the optimal value."""
        n, spacing, penalty = self.n, self.spacing, self.opts.penalty
        tie = int(self.opts.tie_break)
        if n == 1:
            return np.empty(0, dtype=np.int64), penalty / 2.0 * (self.h1 - self.h0) ** 2

        indices = np.arange(lows[1], highs[1] + 1)
        cost = penalty / 2.0 * (spacing * indices - self.h0) ** 2 - self._site_values(1, lows[1], indices.size)
        back: list[np.ndarray] = [np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)]
        for local in range(2, n):
            count = int(highs[local] - lows[local] + 1)
            out_value = np.empty(count)
            out_arg = np.empty(count, dtype=np.int64)
            _distance_transform(cost, int(lows[local - 1]), int(lows[local]), self.weight, tie, out_value, out_arg)
            cost = out_value - self._site_values(local, int(lows[local]), count)
            back.append(out_arg)

        indices = np.arange(lows[n - 1], highs[n - 1] + 1)
        final = cost + penalty / 2.0 * (self.h1 - spacing * indices) ** 2
        best = final.min()
        path = np.empty(n - 1, dtype=np.int64)
        path[n - 2] = _pick(indices[final == best], self.opts.tie_break)
        for local in range(n - 1, 1, -1):
            previous = back[local][path[local - 1] - lows[local]]
            path[local - 2] = lows[local - 1] + previous
        return path, float(best)

    def touches_edge(self, path: np.ndarray, lows: np.ndarray, highs: np.ndarray) -> bool:
        for local in range(1, self.n):
            if local in self.pins:
                continue
            j = path[local - 1]
            if j - lows[local] < EDGE_MARGIN or highs[local] - j < EDGE_MARGIN:
                return True
        return False


def minimize(field: Potential, span: tuple[int, int], h0: float, h1: float, opts: MinimizeOptions,
             p_values=(), grid_cache: Optional[dict] = None) -> GroundState:
    """Exact minimizer of penalty * D - W over the delta grid inside the (adaptive) band."""
    problem = _Problem(field, span, h0, h1, opts, grid_cache)
    half_width = opts.band_half_width or default_half_width(problem.n, opts.grid_spacing)
    hits = 0
    while True:
        lows, highs = problem.band(half_width)
        path, dp_value = problem.solve(lows, highs)
        if not opts.adaptive_band or not problem.touches_edge(path, lows, highs):
            break
        if hits >= opts.band_doubling_cap:
            raise BandExhaustedError(
                f'argmin still within {EDGE_MARGIN} grid steps of the band edge after {hits} doublings '
                f'(half-width {half_width})', doublings=hits, half_width=half_width)
        hits += 1
        half_width *= 2.0
        logger.debug('band doubled to half-width %s on span %s (penalty %s)', half_width, span, opts.penalty)

    heights = np.concatenate(([problem.h0], problem.spacing * path, [problem.h1]))
    config = HeightConfig(x_offset=span[0], heights=heights)
    breakdown = total_energy(field, config, p_values)
    objective = opts.penalty * breakdown.dirichlet - breakdown.field
    if abs(objective - dp_value) > OBJECTIVE_RTOL * max(1.0, abs(dp_value)):
        raise InvariantError(f'recomputed objective {objective} differs from the DP optimum {dp_value}')
    return GroundState(
        config=config,
        breakdown=breakdown,
        objective=objective,
        dp_value=dp_value,
        penalty=opts.penalty,
        grid_spacing=opts.grid_spacing,
        band_half_width=half_width,
        band_hits=hits,
        seed=getattr(field, 'master_seed', None),
    )


def _interpolate_at_unit(dirichlets: np.ndarray, fields: np.ndarray) -> tuple[float, bool]:
    """W/L at D/L = 1 along the monotone rearrangement of the frontier."""
    order = np.argsort(dirichlets, kind='stable')
    d = np.concatenate(([0.0], dirichlets[order]))
    w = np.maximum.accumulate(np.concatenate(([0.0], fields[order])))
    if d[-1] >= 1.0:
        bracketed = d.size > 2 and d[1] <= 1.0
        return float(np.interp(1.0, d, w)), not bracketed
    if d.size >= 3 and d[-1] > d[-2]:
        slope = (w[-1] - w[-2]) / (d[-1] - d[-2])
        return float(w[-1] + slope * (1.0 - d[-1])), True
    return float(w[-1]), True


def lagrangian_frontier(field: Potential, L: int, mus, opts: MinimizeOptions,
                        grid_cache: Optional[dict] = None) -> FrontierEstimate:
    mus = [float(mu) for mu in mus]
    if not mus or any(mu <= 0 for mu in mus):
        raise DomainError('frontier penalties must be positive')
    if any(b < a for a, b in zip(mus, mus[1:])):
        raise DomainError('frontier penalties must be sorted ascending')
    cache = {} if grid_cache is None else grid_cache
    points = []
    for mu in mus:
        state = minimize(field, (0, L), 0.0, 0.0, opts.with_penalty(mu), grid_cache=cache)
        points.append(FrontierPoint(
            mu=mu,
            dirichlet_per_length=state.breakdown.dirichlet / L,
            field_per_length=state.breakdown.field / L,
            energy_per_length=state.objective / L,
        ))
    dirichlets = np.array([point.dirichlet_per_length for point in points])
    fields = np.array([point.field_per_length for point in points])
    w1_hat, extrapolated = _interpolate_at_unit(dirichlets, fields)
    if extrapolated:
        logger.warning('frontier over penalties %s does not bracket D/L = 1; W1_hat %.4f is extrapolated',
                       mus, w1_hat)
    return FrontierEstimate(points=points, W1_hat=max(w1_hat, 0.0), extrapolated=extrapolated)


def envelope_minimizers(field: Potential, span: tuple[int, int], bin_center: tuple[float, float],
                        opts: MinimizeOptions) -> tuple[GroundState, GroundState, float]:
    """Corner minimizers of a boundary bin and the resulting bound on the midpoint excursion."""
    left, right = span
    if (right - left) % 2 or right - left < 2:
        raise DomainError(f'envelope span {span} must have even length 2l')
    scale = (right - left) // 2
    for centre in bin_center:
        if abs(centre / scale - round(centre / scale)) > 1e-9:
            raise DomainError(f'bin centre {centre} is not on the grid of spacing {scale}')
    c0, c1 = (float(centre) for centre in bin_center)
    lower = minimize(field, span, c0 - scale, c1 - scale, opts)
    upper = minimize(field, span, c0 + scale, c1 + scale, opts)
    average = 0.5 * (c0 + c1)
    upper_dev = float(upper.config.heights[scale]) - (average + scale)
    lower_dev = float(lower.config.heights[scale]) - (average - scale)
    excursion = (max(upper_dev, -lower_dev) + 2 * scale) / (2 * scale)
    return lower, upper, excursion


def dump_ground_state(state: GroundState, directory: Path, stem: str, meta: dict,
                      opts: Optional[MinimizeOptions] = None) -> tuple[Path, Path]:
    """`stem`.csv with (x, height) and `stem`.json with breakdown, options and seed."""
    directory = Path(directory)
    csv_path = write_csv(directory / f'{stem}.csv', meta, ('x', 'height'), state.rows())
    payload = {
        'breakdown': state.breakdown.model_dump(mode='json'),
        'objective': state.objective,
        'penalty': state.penalty,
        'band_hits': state.band_hits,
        'band_half_width': state.band_half_width,
        'grid_spacing': state.grid_spacing,
        'seed': state.seed,
        'options': opts.model_dump(mode='json') if opts is not None else None,
    }
    json_path = write_json(directory / f'{stem}.json', meta, payload)
    return csv_path, json_path
