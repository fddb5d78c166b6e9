"""Explicit competitors: the scale-by-scale triangle construction and the
two-scale superadditivity competitor."""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from app.engine.energy import dirichlet, field_term, total_energy
from app.engine.minimizer import minimize
from app.engine.potential import Potential
from app.exceptions import DomainError, InvariantError
from app.models.experiment import is_power_of_two
from app.models.ground_state import MinimizeOptions
from app.models.height import HeightConfig
from app.models.ledger import DWChoice, DWLedger, TwoScaleLedger
from app.utils.artifacts import write_csv, write_json

logger = logging.getLogger(__name__)


def _tent(L: int, scale: int, peak_heights: np.ndarray) -> np.ndarray:
    """Piecewise-linear profile: zero at multiples of 2l, peak_heights at the odd multiples of l."""
    nodes = np.zeros(L // scale + 1)
    nodes[1::2] = peak_heights
    x = np.arange(L + 1)
    return np.interp(x, x[::scale], nodes)


def ding_wirth(field: Potential, L: int | None = None) -> DWLedger:
    """Greedy scale-by-scale configuration: raise each bump to l iff the noise on its upper third is >= 0."""
    L = field.system_size if L is None else L
    if L < 4 or not is_power_of_two(L):
        raise DomainError(f'construction needs L a power of two >= 4, got {L}')
    if L > field.system_size:
        raise DomainError(f'L = {L} exceeds the field size {field.system_size}')

    coarse = np.zeros(L + 1)
    components: dict[int, np.ndarray] = {}
    choices: list[DWChoice] = []
    scale_dirichlet: dict[int, float] = {}

    scale = L // 2
    while scale >= 1:
        peaks = np.arange(1, L // (2 * scale) + 1)
        centres = (2 * peaks - 1) * scale
        reach = (scale - 1) // 3
        offsets = np.arange(-reach, reach + 1)
        columns = centres[:, None] + offsets[None, :]
        base = coarse[columns]
        upper = base + (scale - np.abs(offsets))[None, :]
        lower = base + 2.0 * scale / 3.0
        flat = columns.ravel()
        increments = (field.batch(flat, upper.ravel()) - field.batch(flat, lower.ravel())).reshape(columns.shape)
        sums = np.array([math.fsum(row) for row in increments])
        chosen = np.where(sums >= 0.0, scale, 0)

        part = _tent(L, scale, chosen)
        components[scale] = part
        coarse = coarse + part
        scale_dirichlet[scale] = dirichlet(HeightConfig(heights=part)) / L
        choices.extend(DWChoice(scale=scale, peak=int(k), choice=int(c), triangle_sum=float(s))
                       for k, c, s in zip(peaks, chosen, sums))
        logger.debug('scale %d: %d of %d bumps raised', scale, int(np.count_nonzero(chosen)), peaks.size)
        scale //= 2

    nesting_sup = {}
    for scale in components:
        below = sum((part for other, part in components.items() if other < scale), np.zeros(L + 1))
        nesting_sup[scale] = float(below.max())

    if any(value > 0.5 for value in scale_dirichlet.values()):
        raise InvariantError(f'per-scale Dirichlet energy above L/2: {scale_dirichlet}')
    if any(value > 2.0 * scale / 3.0 for scale, value in nesting_sup.items()):
        raise InvariantError(f'nesting bound violated: {nesting_sup}')

    config = HeightConfig(heights=coarse)
    return DWLedger(
        system_size=L,
        seed=getattr(field, 'master_seed', 0),
        choices=choices,
        scale_dirichlet=scale_dirichlet,
        nesting_sup=nesting_sup,
        config=config,
        field_energy=field_term(field, config),
        dirichlet=dirichlet(config),
    )


def dump_dw_choices(ledger: DWLedger, path: Path, meta: dict) -> Path:
    rows = [(c.scale, c.peak, c.choice, c.triangle_sum) for c in ledger.choices]
    return write_csv(path, meta, ('l', 'x_hat', 'choice', 'triangle_sum'), rows)


def dump_ledger(ledger: DWLedger | TwoScaleLedger, path: Path, meta: dict) -> Path:
    return write_json(path, meta, {'ledger': ledger.model_dump(mode='json')})


class CoarseField:
    """Block-averaged potential W_hat(x_hat, h_hat) = mean of W(x, l * h_hat) over the l columns of block x_hat.

    Heights are in units of l, so resolution is the fine resolution divided by l and
    coarse grid index t queries the fine grid index t.
    """

    def __init__(self, field: Potential, scale: int):
        self.fine = field
        self.scale = scale
        self.system_size = field.system_size // scale
        self.resolution = field.resolution / scale
        self.master_seed = getattr(field, 'master_seed', None)

    def _check(self, x_hat) -> None:
        x_hat = np.asarray(x_hat)
        if x_hat.size and (x_hat.min() < 1 or x_hat.max() > self.system_size - 1):
            raise DomainError(f'coarse columns must lie in 1..{self.system_size - 1}')

    def _columns(self, x_hat: int) -> range:
        return range(self.scale * (x_hat - 1) + 1, self.scale * x_hat + 1)

    def values(self, x_hat: int, ys) -> np.ndarray:
        self._check(x_hat)
        fine_heights = self.scale * np.asarray(ys, dtype=np.float64)
        total = np.zeros(fine_heights.shape)
        for x in self._columns(x_hat):
            total = total + self.fine.values(x, fine_heights)
        return total / self.scale

    def batch(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        self._check(xs)
        fine_heights = self.scale * np.asarray(ys, dtype=np.float64)
        total = np.zeros(np.broadcast(xs, fine_heights).shape)
        for offset in range(1, self.scale + 1):
            total = total + self.fine.batch(self.scale * (xs - 1) + offset, fine_heights)
        return total / self.scale

    def grid(self, x_hat: int, start: int, count: int, stride: int) -> np.ndarray:
        self._check(x_hat)
        total = np.zeros(count)
        for x in self._columns(x_hat):
            total = total + self.fine.grid(x, start, count, stride)
        return total / self.scale


def two_scale_competitor(field: Potential, L: int, scale: int, opts: MinimizeOptions) -> TwoScaleLedger:
    """Coarse minimizer on the L/l lattice, binned, rescaled and re-optimized below scale l."""
    if not (is_power_of_two(L) and is_power_of_two(scale) and 1 < scale < L):
        raise DomainError(f'two-scale construction needs powers of two with 1 < l < L, got L={L}, l={scale}')
    if L > field.system_size:
        raise DomainError(f'L = {L} exceeds the field size {field.system_size}')
    blocks = L // scale
    coarse_field = CoarseField(field, scale)
    coarse_opts = opts.model_copy(update={
        'grid_spacing': opts.grid_spacing / scale,
        'band_half_width': None if opts.band_half_width is None else opts.band_half_width / scale,
        'pins': {},
    })
    coarse_state = minimize(coarse_field, (0, blocks), 0.0, 0.0, coarse_opts)
    coarse_heights = coarse_state.config.heights
    binned = (np.ceil(coarse_heights - 0.5) + 0.0).astype(np.int64)
    binned[0] = binned[-1] = 0
    if np.any(np.abs(coarse_heights - binned) > 0.5 + 1e-12):
        raise InvariantError('coarse bin does not contain the coarse minimizer')

    interior = np.arange(1, blocks)
    coarse_values = coarse_field.batch(interior, coarse_heights[1:-1]) if blocks > 1 else np.empty(0)
    binned_config = HeightConfig(heights=binned.astype(np.float64))
    binned_breakdown = total_energy(coarse_field, binned_config)
    binned_hat = opts.penalty * binned_breakdown.dirichlet - binned_breakdown.field

    x = np.arange(L + 1)
    rescaled = HeightConfig(heights=np.interp(x, x[::scale], scale * binned.astype(np.float64)))
    rescaled_breakdown = total_energy(field, rescaled)
    rescaled_energy = opts.penalty * rescaled_breakdown.dirichlet - rescaled_breakdown.field

    pins = {int(scale * k): float(scale * binned[k]) for k in interior}
    competitor = minimize(field, (0, L), 0.0, 0.0, opts.model_copy(update={'pins': pins}))
    for site, height in pins.items():
        if competitor.config.heights[site] != height:
            raise InvariantError(f'pinned site {site} holds {competitor.config.heights[site]}, expected {height}')

    free_opts = opts.model_copy(update={'pins': {}})
    unconstrained = minimize(field, (0, L), 0.0, 0.0, free_opts)
    if competitor.objective < unconstrained.objective:
        # the competitor left the unconstrained band; widen it to cover the competitor
        reach = float(np.abs(competitor.config.heights).max()) + 2 * opts.grid_spacing
        logger.warning('competitor below the banded minimum at L=%d, l=%d; re-solving with half-width %.3f',
                       L, scale, reach)
        wide = free_opts.model_copy(update={'band_half_width': max(reach, unconstrained.band_half_width)})
        unconstrained = minimize(field, (0, L), 0.0, 0.0, wide)

    return TwoScaleLedger(
        system_size=L,
        coarse_scale=scale,
        seed=getattr(field, 'master_seed', 0),
        coarse_minimizer=coarse_state,
        coarse_field_values=[float(v) for v in coarse_values],
        binned=[int(b) for b in binned],
        rescaled=rescaled,
        competitor=competitor,
        unconstrained=unconstrained,
        coarse_energy=scale * coarse_state.objective,
        binned_energy=scale * binned_hat,
        rescaled_energy=rescaled_energy,
        binning_error=scale * (binned_hat - coarse_state.objective),
        scaling_error=rescaled_energy - scale * binned_hat,
        small_scale_term=competitor.objective - rescaled_energy,
    )
