import math

import numpy as np
import pytest
from scipy import stats

from app.engine.potential import PotentialField, evaluate
from app.exceptions import DomainError
from app.models.experiment import DEFAULT_RESOLUTION

N_SEEDS = 20_000
SEEDS = np.arange(1, N_SEEDS + 1, dtype=np.uint64) * np.uint64(7919)


def test_value_is_pinned_at_zero(field):
    assert field.value(3, 0.0) == 0.0
    assert field.value(3, 0.2 * DEFAULT_RESOLUTION) == 0.0


def test_value_is_pure_under_interleaved_queries(field):
    first = field.value(3, 1.25)
    field.values(3, np.linspace(-40.0, 40.0, 513))
    field.grid(3, -900, 300, 6)
    field.value(5, 1.25)
    assert field.value(3, 1.25) == first
    assert PotentialField(field.master_seed, field.system_size).value(3, 1.25) == first


def test_heights_round_to_the_resolution_grid(field):
    assert field.value(7, 2.5) == field.value(7, 2.5 + 0.3 * DEFAULT_RESOLUTION)


def test_increment(field):
    assert field.increment(4, 1.5, 1.5) == 0.0
    assert field.increment(4, 0.0, -2.75) == field.value(4, -2.75)


@pytest.mark.parametrize('start,count,stride', [
    (0, 40, 8),
    (-37, 20, 8),
    (5, 50, 3),
    (-640, 161, 8),
    (1000, 30, 1),
    (-24, 7, 16),
])
def test_grid_matches_pointwise_evaluation_bitwise(field, start, count, stride):
    heights = DEFAULT_RESOLUTION * (start + stride * np.arange(count))
    assert np.array_equal(field.grid(9, start, count, stride), field.values(9, heights))


def test_batch_matches_values(field):
    xs = np.array([1, 2, 2, 63, 30])
    ys = np.array([0.5, -3.0, 17.25, 1.0, -0.015625])
    expected = [field.value(int(x), float(y)) for x, y in zip(xs, ys)]
    assert np.array_equal(field.batch(xs, ys), expected)


def test_columns_are_distinct(field):
    ys = np.linspace(0.5, 8.0, 16)
    assert not np.array_equal(field.values(1, ys), field.values(2, ys))


@pytest.mark.parametrize('x', [0, 64, -1])
def test_column_out_of_range(field, x):
    with pytest.raises(DomainError):
        field.value(x, 1.0)


def test_non_finite_height(field):
    with pytest.raises(DomainError):
        field.value(3, math.inf)
    with pytest.raises(DomainError):
        field.values(3, [0.0, math.nan])


def test_invalid_construction():
    with pytest.raises(DomainError):
        PotentialField(-1, 8)
    with pytest.raises(DomainError):
        PotentialField(1, 0)
    with pytest.raises(DomainError):
        PotentialField(1, 8, resolution=0.1)


def _within_three_se(r: np.ndarray, s: np.ndarray) -> bool:
    return abs(np.corrcoef(r, s)[0, 1]) < 3.0 / math.sqrt(r.size)


@pytest.mark.slow
@pytest.mark.parametrize('y', [1.25, 3.0, -0.5])
def test_variance_equals_height(y):
    samples = evaluate(SEEDS, 3, y)
    variance = samples.var(ddof=1)
    se = abs(y) * math.sqrt(2.0 / (samples.size - 1))
    assert abs(variance - abs(y)) < 3 * se


@pytest.mark.slow
def test_increments_over_disjoint_intervals_are_uncorrelated():
    first = evaluate(SEEDS, 5, 1.0) - evaluate(SEEDS, 5, 0.0)
    second = evaluate(SEEDS, 5, 3.0) - evaluate(SEEDS, 5, 2.0)
    assert _within_three_se(first, second)


@pytest.mark.slow
def test_doubling_increment_is_independent_of_the_value():
    y = 0.75
    base = evaluate(SEEDS, 2, y)
    doubled = evaluate(SEEDS, 2, 2 * y)
    assert _within_three_se(doubled - base, base)


@pytest.mark.slow
def test_sides_are_independent():
    assert _within_three_se(evaluate(SEEDS, 6, 1.5), evaluate(SEEDS, 6, -1.5))


@pytest.mark.slow
def test_unit_height_is_standard_normal():
    samples = evaluate(SEEDS[:10_000], 11, 1.0)
    assert stats.kstest(samples, 'norm').pvalue > 0.01


def test_node_cache_is_reused_and_extended():
    field = PotentialField(4242, 16)
    assert field.cached_nodes == 0
    first = field.grid(5, 8, 40, 8)
    held = field.cached_nodes
    assert held > 0
    assert np.array_equal(field.grid(5, 8, 40, 8), first)
    assert field.cached_nodes == held
    assert np.array_equal(field.grid(5, 16, 10, 8), first[1:11])
    assert field.cached_nodes == held

    wider = field.grid(5, 8, 400, 8)
    assert field.cached_nodes > held
    assert np.array_equal(wider[:40], first)


@pytest.mark.parametrize('queries', [
    [(0, 40, 8), (300, 20, 8), (-37, 20, 8)],
    [(1000, 30, 1), (900, 60, 2), (-640, 161, 8)],
    [(-24, 7, 16), (-8, 40, 1), (0, 40, 8)],
])
def test_warm_cache_matches_a_fresh_field_bitwise(field, queries):
    for start, count, stride in queries:
        warm = field.grid(9, start, count, stride)
        fresh = PotentialField(field.master_seed, field.system_size).grid(9, start, count, stride)
        heights = DEFAULT_RESOLUTION * (start + stride * np.arange(count))
        assert np.array_equal(warm, fresh)
        assert np.array_equal(warm, evaluate(field.master_seed, 9, heights))
