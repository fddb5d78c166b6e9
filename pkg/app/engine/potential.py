"""Semi-discrete white-noise potential: one two-sided Brownian motion per column.

Heights are measured in units of the resolution floor ``delta_min = 2**-r``.
Each side (positive / negative heights) of a column is built hierarchically:

* range doubling: W(1) ~ N(0, 1) and W(2**k) = W(2**(k-1)) + N(0, 2**(k-1));
* block k (k = 0 covers [0, 1], k >= 1 covers [2**(k-1), 2**k]) is refined by
  midpoint bridges, midpoint = mean of the endpoints + N(0, length / 4).

Every Gaussian is keyed on (seed, column, side, level, node) through Philox, so a
node value is a pure function of its ancestors and never of query order.
`PotentialField` fills per-column node caches lazily as the grid queries widen;
the uncached `evaluate` path returns the same bits.
"""

from __future__ import annotations

import logging
import math
import threading
from typing import Protocol

import numpy as np

from app.exceptions import DomainError
from app.models.experiment import DEFAULT_RESOLUTION
from app.utils.seeding import keyed_normal

logger = logging.getLogger(__name__)

_OUTER_TAG = 1 << 9
_SIDE_SHIFT = 8
MAX_LEVELS = 32


def _bridge_scale(length_units, resolution: float):
    return np.sqrt(length_units * resolution) / 2.0


def _outer_scale(m: int) -> float:
    return math.sqrt(2.0 ** (m - 1))


def _resolution_exponent(resolution: float) -> int:
    exponent = -math.log2(resolution)
    if exponent < 0 or abs(exponent - round(exponent)) > 1e-12:
        raise DomainError(f'resolution {resolution} is not 2**-r for an integer r >= 0')
    return int(round(exponent))


def _block_layout(t: np.ndarray, r: int):
    """Block index, offset inside the block and block length (resolution units) of t >= 0."""
    t = np.asarray(t, dtype=np.int64)
    k = np.frexp((np.maximum(t - 1, 0) >> r).astype(np.float64))[1].astype(np.int64)
    length = np.where(k == 0, np.int64(1) << r, np.int64(1) << np.maximum(k - 1 + r, 0))
    start = np.where(k == 0, 0, length)
    return k, t - start, length


def _outer_table(seed, x, side, kmax: int) -> np.ndarray:
    """W(2**m) for m = 0..kmax; rows broadcast over (seed, x, side)."""
    seed, x, side = np.broadcast_arrays(np.asarray(seed, dtype=np.uint64),
                                        np.asarray(x, dtype=np.int64),
                                        np.asarray(side, dtype=np.int64))
    table = np.empty(seed.shape + (kmax + 1,))
    acc = keyed_normal(seed, 0, x, 0 | (side << _SIDE_SHIFT) | _OUTER_TAG, 0)
    table[..., 0] = acc
    for m in range(1, kmax + 1):
        acc = acc + _outer_scale(m) * keyed_normal(seed, 0, x, m | (side << _SIDE_SHIFT) | _OUTER_TAG, 0)
        table[..., m] = acc
    return table


def _descend(seed, x, side, k, offset, length, left, right, resolution: float) -> np.ndarray:
    """Bridge descent to the node at `offset` in each block; arguments are flat arrays."""
    levels = np.log2(length).astype(np.int64)
    lo = np.zeros_like(offset)
    hi = length.copy()
    result = np.where(offset == 0, left, right)
    active = np.nonzero((offset != 0) & (offset != length))[0]
    a, b = left[active], right[active]
    lo, hi = lo[active], hi[active]
    level = 0
    while active.size:
        level += 1
        seed_a, x_a, side_a = seed[active], x[active], side[active]
        k_a, off_a, levels_a = k[active], offset[active], levels[active]
        mid = (lo + hi) // 2
        node = mid >> (levels_a - level)
        g = keyed_normal(seed_a, node, x_a, level | (side_a << _SIDE_SHIFT), k_a)
        value = 0.5 * (a + b) + _bridge_scale(hi - lo, resolution) * g

        hit = off_a == mid
        result[active[hit]] = value[hit]
        go_left = off_a < mid
        hi = np.where(go_left, mid, hi)
        b = np.where(go_left, value, b)
        lo = np.where(go_left, lo, mid)
        a = np.where(go_left, a, value)

        keep = ~hit
        active, a, b, lo, hi = active[keep], a[keep], b[keep], lo[keep], hi[keep]
    return result


class Potential(Protocol):
    """What the energies and the minimizer need from a column potential."""

    system_size: int
    resolution: float

    def values(self, x: int, ys) -> np.ndarray: ...

    def batch(self, xs, ys) -> np.ndarray: ...

    def grid(self, x: int, start: int, count: int, stride: int) -> np.ndarray: ...


def evaluate(seed, x, y, resolution: float = DEFAULT_RESOLUTION) -> np.ndarray:
    """Pure vectorized evaluation of W(x, y) for broadcastable (seed, x, y).

    No caching; this is the reference path every cached path must agree with bitwise.
    """
    r = _resolution_exponent(resolution)
    seed, x, y = np.broadcast_arrays(np.asarray(seed, dtype=np.uint64),
                                     np.asarray(x, dtype=np.int64),
                                     np.asarray(y, dtype=np.float64))
    shape = y.shape
    seed, x, y = seed.ravel(), x.ravel(), y.ravel()
    if not np.all(np.isfinite(y)):
        raise DomainError('heights must be finite')
    index = np.rint(y / resolution).astype(np.int64)
    side = (index < 0).astype(np.int64)
    t = np.abs(index)
    k, offset, length = _block_layout(t, r)
    if t.size and int(k.max()) - 1 + r >= MAX_LEVELS:
        raise DomainError(f'height {float(np.abs(y).max())} exceeds the representable range')

    kmax = int(k.max()) if t.size else 0
    outer = _outer_table(seed, x, side, kmax)
    rows = np.arange(t.size)
    left = np.where(k == 0, 0.0, outer[rows, np.maximum(k - 1, 0)])
    right = outer[rows, k]
    values = _descend(seed, x, side, k, offset, length, left, right, resolution)
    values[t == 0] = 0.0
    return values.reshape(shape)


class PotentialField:
    """Quenched disorder for one replicate: columns 1..L-1, evaluable at any real height."""

    def __init__(self, master_seed: int, system_size: int, resolution: float = DEFAULT_RESOLUTION):
        if system_size < 1:
            raise DomainError('system size must be positive')
        if not 0 <= master_seed < 2 ** 64:
            raise DomainError('master seed must be a 64-bit unsigned integer')
        self.master_seed = int(master_seed)
        self.system_size = int(system_size)
        self.resolution = float(resolution)
        self._r = _resolution_exponent(resolution)
        self._outer: dict[tuple[int, int], list[float]] = {}
        # (column, side, block, level) -> (first node index, node values)
        self._nodes: dict[tuple[int, int, int, int], tuple[int, np.ndarray]] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f'PotentialField(seed={self.master_seed}, L={self.system_size}, delta_min={self.resolution})'

    def _check_column(self, x: int) -> None:
        if not 1 <= x <= self.system_size - 1:
            raise DomainError(f'column {x} outside 1..{self.system_size - 1}')

    def _outer_values(self, x: int, side: int, kmax: int) -> list[float]:
        """Append-only cache of W(+-2**m), m = 0..kmax, for one column side."""
        with self._lock:
            cached = self._outer.setdefault((x, side), [])
            m = len(cached)
            if m <= kmax:
                key = 0 | (side << _SIDE_SHIFT) | _OUTER_TAG
                acc = cached[-1] if cached else None
                while m <= kmax:
                    g = float(keyed_normal(self.master_seed, 0, x, key | m, 0))
                    acc = g if acc is None else acc + _outer_scale(m) * g
                    cached.append(acc)
                    m += 1
            return cached[:kmax + 1]

    def value(self, x: int, y: float) -> float:
        self._check_column(x)
        if not math.isfinite(y):
            raise DomainError('height must be finite')
        return float(self.values(x, np.array([y]))[0])

    def increment(self, x: int, y_lo: float, y_hi: float) -> float:
        return self.value(x, y_hi) - self.value(x, y_lo)

    def values(self, x: int, ys) -> np.ndarray:
        """Vectorized values along one column (arbitrary heights)."""
        self._check_column(x)
        ys = np.asarray(ys, dtype=np.float64)
        if not np.all(np.isfinite(ys)):
            raise DomainError('heights must be finite')
        return evaluate(self.master_seed, x, ys, self.resolution)

    def batch(self, xs, ys) -> np.ndarray:
        """Values at scattered (column, height) pairs."""
        xs = np.asarray(xs, dtype=np.int64)
        if xs.size and (xs.min() < 1 or xs.max() > self.system_size - 1):
            raise DomainError(f'columns must lie in 1..{self.system_size - 1}')
        return evaluate(self.master_seed, xs, ys, self.resolution)

    def grid(self, x: int, start: int, count: int, stride: int) -> np.ndarray:
        """Values at heights resolution * (start + i * stride), i < count, by dense bridge windows."""
        self._check_column(x)
        if count <= 0:
            return np.empty(0)
        index = start + stride * np.arange(count, dtype=np.int64)
        out = np.empty(count)
        zero = index == 0
        out[zero] = 0.0
        for side, mask in ((0, index > 0), (1, index < 0)):
            if not mask.any():
                continue
            t = np.abs(index[mask])
            out[mask] = self._dense_side(x, side, t, math.gcd(stride, abs(start)))
        return out

    def _dense_side(self, x: int, side: int, t: np.ndarray, granularity: int) -> np.ndarray:
        r = self._r
        k, offset, length = _block_layout(t, r)
        if int(k.max()) - 1 + r >= MAX_LEVELS:
            raise DomainError('height exceeds the representable range')
        outer = self._outer_values(x, side, int(k.max()))
        out = np.empty(t.size)
        coarsening = (granularity & -granularity).bit_length() - 1
        for block in np.unique(k):
            mask = k == block
            left = 0.0 if block == 0 else outer[block - 1]
            out[mask] = self._dense_window(x, side, int(block), int(length[mask][0]),
                                           offset[mask], left, outer[block], coarsening)
        return out

    def _dense_window(self, x, side, block, length, offsets, left, right, coarsening) -> np.ndarray:
        """Top-down refinement restricted to the window spanned by `offsets`.

        Stops at the level whose spacing is 2**coarsening (all offsets are multiples of it).
        Each level keeps one contiguous run of node values per column side and block; a
        query outside the run refines the hull of the run and the query.
        """
        total_levels = int(math.log2(length))
        stop_level = max(total_levels - coarsening, 0)
        spacing = length >> stop_level
        want_lo = int(offsets.min()) // spacing
        want_hi = -(-int(offsets.max()) // spacing)

        first, values = 0, np.array([left, right])
        for level in range(1, stop_level + 1):
            shift = stop_level - level
            lo, hi = want_lo >> shift, -(-want_hi >> shift)
            key = (x, side, block, level)
            cached = self._nodes.get(key)
            if cached is not None:
                cached_first, cached_values = cached
                cached_last = cached_first + cached_values.size - 1
                if cached_first <= lo and hi <= cached_last:
                    first, values = cached_first, cached_values
                    continue
                lo, hi = min(lo, cached_first), max(hi, cached_last)
            values = self._refine(x, side, block, level, length, first, values, lo, hi)
            first = lo
            with self._lock:
                self._nodes[key] = (first, values)
        return values[offsets // spacing - first]

    def _refine(self, x, side, block, level, length, parent_first, parents, lo, hi) -> np.ndarray:
        """Nodes lo..hi of `level` from parent nodes starting at index `parent_first`."""
        nodes = np.arange(lo, hi + 1, dtype=np.int64)
        values = parents[(nodes >> 1) - parent_first]
        odd = (nodes & 1) == 1
        node = nodes[odd]
        below = parents[(node >> 1) - parent_first]
        above = parents[(node >> 1) + 1 - parent_first]
        g = keyed_normal(self.master_seed, node, x, level | (side << _SIDE_SHIFT), block)
        values[odd] = 0.5 * (below + above) + _bridge_scale(length >> (level - 1), self.resolution) * g
        return values

    @property
    def cached_nodes(self) -> int:
        """Bridge nodes held in the per-column caches."""
        return sum(values.size for _, values in self._nodes.values())
