"""Dyadic scale decomposition by piecewise-linear coarsening.

h_{>=l} interpolates h between the multiples of l, and h_l = h_{>=l} - h_{>=2l}.
Positions are relative to the left end of the configuration.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from app.engine.energy import dirichlet_p
from app.exceptions import DomainError, InvariantError
from app.models.experiment import is_power_of_two
from app.models.height import HeightConfig
from app.models.scales import ScaleDecomposition
from app.utils.artifacts import write_csv


def _check_scale(h: HeightConfig, scale: int) -> None:
    if not is_power_of_two(scale):
        raise DomainError(f'scale {scale} is not a power of two')
    if scale > h.length or h.length % scale:
        raise DomainError(f'scale {scale} does not divide L = {h.length}')


def coarsen(h: HeightConfig, scale: int) -> HeightConfig:
    _check_scale(h, scale)
    if scale == 1:
        return h
    x = np.arange(h.length + 1)
    nodes = x[::scale]
    return h.with_heights(np.interp(x, nodes, h.heights[::scale]))


def component(h: HeightConfig, scale: int) -> HeightConfig:
    _check_scale(h, scale)
    if 2 * scale > h.length:
        raise DomainError(f'component scale {scale} must be at most L/2 = {h.length // 2}')
    return coarsen(h, scale) - coarsen(h, 2 * scale)


def peak_values(h: HeightConfig, scale: int) -> np.ndarray:
    """h((2k-1)l) - (h(2(k-1)l) + h(2kl)) / 2 for k = 1..L/(2l)."""
    _check_scale(h, 2 * scale)
    heights = h.heights
    return heights[scale::2 * scale] - 0.5 * (heights[0:-1:2 * scale] + heights[2 * scale::2 * scale])


def decompose(h: HeightConfig) -> ScaleDecomposition:
    L = h.length
    if not is_power_of_two(L) or L < 2:
        raise DomainError(f'decomposition needs L a power of two, got {L}')
    if not h.has_zero_boundary:
        raise DomainError('decomposition needs zero boundary values')
    components = {}
    scale = 1
    while 2 * scale <= L:
        components[scale] = component(h, scale)
        scale *= 2
    return ScaleDecomposition(base=h, components=components)


def closed_form_energy(h: HeightConfig, scale: int, p: float) -> float:
    """D_p(h_l) from the peak values alone: 2l 2^{-p/2} sum |peak / l|^p."""
    if p < 1:
        raise DomainError(f'p-Dirichlet energy needs p >= 1, got {p}')
    peaks = np.abs(peak_values(h, scale)) / scale
    return 2 * scale * 2.0 ** (-p / 2.0) * math.fsum(np.power(peaks, p))


def per_scale_energy(dec: ScaleDecomposition, p: float, check: bool = True) -> dict[int, float]:
    """l -> D_p(h_l) / L, cross-checked against the closed form when `check` is set."""
    L = dec.base.length
    energies = {}
    for scale in dec.scales:
        direct = dirichlet_p(dec.components[scale], p)
        if check:
            closed = closed_form_energy(dec.base, scale, p)
            if abs(direct - closed) > 1e-9 * max(1.0, abs(direct)):
                raise InvariantError(f'closed form {closed} disagrees with {direct} at scale {scale}')
        energies[scale] = direct / L
    return energies


def coarse_energy(dec: ScaleDecomposition, p: float) -> dict[int, float]:
    """l -> D_p(h_{>=l}) / L."""
    L = dec.base.length
    return {scale: dirichlet_p(dec.base.with_heights(dec.coarse_part(scale)), p) / L
            for scale in dec.scales}


def bin_profile(h: HeightConfig, scale: int) -> HeightConfig:
    """Coarse bin on 2l-spaced nodes with values in 2l*Z and h in (bin - l, bin + l] there."""
    _check_scale(h, 2 * scale)
    width = 2 * scale
    nodes = h.heights[::width]
    binned = width * np.ceil((nodes - scale) / width) + 0.0
    x = np.arange(h.length + 1)
    return h.with_heights(np.interp(x, x[::width], binned))


def dump_decomposition(dec: ScaleDecomposition, path: Path, meta: dict) -> Path:
    """CSV with columns x, l, value (l = 0 holds the base configuration)."""
    rows = [(int(x), 0, float(v)) for x, v in zip(dec.base.sites, dec.base.heights)]
    for scale in dec.scales:
        part = dec.components[scale]
        rows.extend((int(x), scale, float(v)) for x, v in zip(part.sites, part.heights))
    return write_csv(path, meta, ('x', 'l', 'value'), rows)
