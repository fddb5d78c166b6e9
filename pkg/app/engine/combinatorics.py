"""Lattice-point counts behind the bin-counting estimate.

Z(N, D) = #{y in Z^N : sum y^2 < N D}. Counts are exact integers.
"""

from __future__ import annotations

import itertools
import logging
import math

import numpy as np

from app.exceptions import DomainError
from app.models.counting import BallCount, BinCount, BoundRow
from app.models.experiment import is_power_of_two

logger = logging.getLogger(__name__)

MAX_BALL_N = 8
MAX_BALL_D = 64.0
MAX_BIN_L = 16
MAX_BIN_RATIO = 8
MAX_ENUMERATION = 10 ** 8


def _square_budget(N: int, D: float) -> int:
    """Largest integer s with s < N * D, or -1 when none."""
    bound = N * D
    if bound <= 0:
        return -1
    return math.ceil(bound) - 1


def _shell_counts(N: int, budget: int) -> np.ndarray:
    """counts[s] = #{y in Z^N : sum y^2 = s} for s <= budget."""
    counts = np.zeros(budget + 1, dtype=np.int64)
    counts[0] = 1
    radius = math.isqrt(budget)
    single = np.zeros(budget + 1, dtype=np.int64)
    for y in range(-radius, radius + 1):
        single[y * y] += 1
    for _ in range(N):
        nxt = np.zeros(budget + 1, dtype=np.int64)
        for square in np.nonzero(single)[0]:
            nxt[square:] += single[square] * counts[:budget + 1 - square]
        counts = nxt
    return counts


def _ball_size(N: int, D: float) -> int:
    budget = _square_budget(N, D)
    if budget < 0:
        return 0
    return int(sum(_shell_counts(N, budget)))


def count_ball(N: int, D: float) -> BallCount:
    """Exact Z(N, D) by shell enumeration of the box [-r, r]^N, r = isqrt of the square budget."""
    if not 1 <= N <= MAX_BALL_N:
        raise DomainError(f'N = {N} outside 1..{MAX_BALL_N}')
    if not 0 <= D <= MAX_BALL_D:
        raise DomainError(f'D = {D} outside [0, {MAX_BALL_D}]')
    return BallCount(N=N, D=D, Z=_ball_size(N, D))


def enumerate_ball(N: int, D: float, axis_order: tuple[int, ...] | None = None) -> int:
    """Point-by-point enumeration with pruning on the partial sum of squares."""
    budget = _square_budget(N, D)
    if budget < 0:
        return 0
    radius = math.isqrt(budget)
    axes = tuple(range(N)) if axis_order is None else tuple(axis_order)
    if sorted(axes) != list(range(N)):
        raise DomainError(f'axis order {axis_order} is not a permutation of 0..{N - 1}')
    point = [0] * N

    def extend(depth: int, used: int) -> int:
        if depth == N:
            return 1
        total = 0
        reach = math.isqrt(budget - used)
        for y in range(-min(reach, radius), min(reach, radius) + 1):
            point[axes[depth]] = y
            total += extend(depth + 1, used + y * y)
        return total

    return extend(0, 0)


def bound_check(N: int, D: float, C0: float) -> bool:
    """Z(N, D) <= (C0 (D + 1)) ** (N / 2)."""
    return count_ball(N, D).Z <= (C0 * (D + 1.0)) ** (N / 2.0)


def _d_grid(max_d: float, step: float) -> list[float]:
    return [k * step for k in range(int(round(max_d / step)) + 1)]


def minimal_constant(max_n: int = 6, max_d: float = 16.0, step: float = 0.25) -> float:
    """Smallest C0 (up to relative 1e-12 slack) with the bound true on the (N, D) grid."""
    best = 0.0
    for N in range(1, max_n + 1):
        for D in _d_grid(max_d, step):
            Z = count_ball(N, D).Z
            if Z:
                best = max(best, Z ** (2.0 / N) / (D + 1.0))
    return best * (1.0 + 1e-12)


def bound_table(max_n: int = 6, max_d: float = 16.0, step: float = 1.0, C0: float | None = None) -> list[BoundRow]:
    C0 = minimal_constant(max_n, max_d) if C0 is None else C0
    rows = []
    for N in range(1, max_n + 1):
        for D in _d_grid(max_d, step):
            Z = count_ball(N, D).Z
            bound = (C0 * (D + 1.0)) ** (N / 2.0)
            rows.append(BoundRow(N=N, D=D, Z=Z, bound=bound, ok=Z <= bound))
    return rows


def log_growth_constant(max_n: int = 6, max_d: float = 16.0, step: float = 1.0) -> float:
    """Fitted C of ln Z(N, D) <= C N ln D over the grid points with D >= 2."""
    if max_d < 2:
        raise DomainError(f'the log-growth fit needs grid points with D >= 2, got max_d={max_d:g}')
    return max(math.log(count_ball(N, D).Z) / (N * math.log(D))
               for N in range(1, max_n + 1) for D in _d_grid(max_d, step) if D >= 2)


def _intermediate_scales(L: int, scale: int) -> list[int]:
    scales, rho = [], 2 * scale
    while rho <= L // 2:
        scales.append(rho)
        rho *= 2
    return scales


def _profile_peaks(profile: np.ndarray, rho: int, unit: int) -> np.ndarray:
    """Peak values of the component at scale rho of a profile sampled every `unit` sites."""
    step = rho // unit
    return profile[step::2 * step] - 0.5 * (profile[0:-1:2 * step] + profile[2 * step::2 * step])


def count_bins(L: int, scale: int, D_hat: float, box_radius: int | None = None) -> BinCount:
    """Profiles h_bar on 2l{0..L/2l} with values in 2l*Z, zero boundary, and
    max_rho (l/rho)^2 D(h_bar_rho)/L < D_hat; rho over 2l, ..., L/2."""
    if not (is_power_of_two(L) and is_power_of_two(scale)) or L > MAX_BIN_L or 2 * scale > L:
        raise DomainError(f'bin counting needs dyadic l <= L/2 with L <= {MAX_BIN_L}, got L={L}, l={scale}')
    if L // scale > MAX_BIN_RATIO:
        raise DomainError(f'L/l = {L // scale} exceeds {MAX_BIN_RATIO}')
    if D_hat < 0:
        raise DomainError('D_hat must be nonnegative')

    width = 2 * scale
    free = L // width - 1
    scales = _intermediate_scales(L, scale)
    if box_radius is None:
        # |h_bar| <= sum over scales of l * max|y_rho|
        reach = sum(scale * math.isqrt(max(_square_budget(L // (2 * rho), 2 * (rho / scale) ** 4 * D_hat), 0))
                    for rho in scales)
        box_radius = -(-reach // width)
    if (2 * box_radius + 1) ** free > MAX_ENUMERATION:
        raise DomainError(f'bin enumeration box of radius {box_radius} is too large')

    count = 0
    profile = np.zeros(free + 2)
    for ks in itertools.product(range(-box_radius, box_radius + 1), repeat=free):
        profile[1:-1] = width * np.asarray(ks, dtype=np.float64)
        worst = 0.0
        for rho in scales:
            peaks = _profile_peaks(profile, rho, width)
            energy = rho * float(np.sum((peaks / rho) ** 2)) / L
            worst = max(worst, (scale / rho) ** 2 * energy)
        if worst < D_hat:
            count += 1

    product = 1
    for rho in scales:
        product *= _ball_size(L // (2 * rho), 2 * (rho / scale) ** 4 * D_hat)
    logger.debug('count_bins L=%d l=%d D_hat=%s: %d of box radius %d, product bound %d',
                 L, scale, D_hat, count, box_radius, product)
    return BinCount(L=L, l=scale, D_hat=D_hat, count=count, product_bound=product, box_radius=box_radius)
