import pytest

from app.engine.combinatorics import (
    bound_check,
    bound_table,
    count_ball,
    count_bins,
    enumerate_ball,
    log_growth_constant,
    minimal_constant,
)
from app.exceptions import DomainError


@pytest.mark.parametrize('N,D,Z', [
    (1, 0.0, 0),
    (3, 0.0, 0),
    (1, 2.0, 3),
    (1, 4.0, 3),
    (1, 4.5, 5),
    (2, 1.0, 5),
    (2, 2.5, 13),
    (3, 1.0, 19),
])
def test_known_counts(N, D, Z):
    assert count_ball(N, D).Z == Z


@pytest.mark.parametrize('N,D', [(2, 3.7), (3, 4.0), (4, 2.5), (5, 1.2)])
def test_enumeration_agrees_with_shell_counts(N, D):
    assert enumerate_ball(N, D) == count_ball(N, D).Z
    assert enumerate_ball(N, D, tuple(reversed(range(N)))) == count_ball(N, D).Z


def test_enumeration_axis_order_must_be_a_permutation():
    with pytest.raises(DomainError):
        enumerate_ball(3, 1.0, (0, 0, 1))


@pytest.mark.parametrize('N,D', [(0, 1.0), (9, 1.0), (2, -1.0), (2, 65.0)])
def test_ball_ranges(N, D):
    with pytest.raises(DomainError):
        count_ball(N, D)


def test_counts_grow_with_radius():
    counts = [count_ball(3, D / 4).Z for D in range(0, 33)]
    assert counts == sorted(counts)


def test_minimal_constant_is_tight():
    C0 = minimal_constant(max_n=4, max_d=8.0)
    rows = bound_table(max_n=4, max_d=8.0, C0=C0)
    assert all(row.ok for row in rows)
    assert len(rows) == 4 * 9
    assert not all(bound_check(N, D, 0.99 * C0) for N in range(1, 5) for D in (k / 4 for k in range(33)))


def test_bound_table_flags_failures():
    rows = bound_table(max_n=2, max_d=4.0, C0=0.5)
    assert not all(row.ok for row in rows)
    assert rows[0].N == 1 and rows[0].D == 0.0 and rows[0].ok


def test_log_growth_constant():
    assert 0.0 < log_growth_constant(max_n=3, max_d=8.0)


def test_bins_in_a_fixed_box():
    bins = count_bins(8, 1, 1e6, box_radius=2)
    assert bins.count == 125
    assert bins.box_radius == 2


def test_single_free_bin_by_hand():
    # one free node at height 2k: the only scale gives k**2 / 8 < D_hat
    bins = count_bins(4, 1, 1.0)
    assert bins.count == 5
    assert bins.product_bound == count_ball(1, 32.0).Z


@pytest.mark.parametrize('L,scale', [(4, 1), (8, 1), (8, 2), (16, 2), (16, 4)])
@pytest.mark.parametrize('D_hat', [0.25, 1.0])
def test_product_form_bounds_the_count(L, scale, D_hat):
    bins = count_bins(L, scale, D_hat)
    assert 1 <= bins.count <= bins.product_bound


def test_no_bins_below_zero_energy():
    bins = count_bins(8, 2, 0.0)
    assert bins.count == 0
    assert bins.product_bound == 0


def test_bin_counts_grow_with_the_threshold():
    assert count_bins(8, 1, 0.25).count <= count_bins(8, 1, 1.0).count


@pytest.mark.parametrize('L,scale,D_hat', [(32, 4, 1.0), (16, 1, 1.0), (8, 3, 1.0), (8, 8, 1.0), (8, 1, -1.0)])
def test_bin_ranges(L, scale, D_hat):
    with pytest.raises(DomainError):
        count_bins(L, scale, D_hat)


def test_log_growth_needs_levels_above_two():
    with pytest.raises(DomainError):
        log_growth_constant(max_n=2, max_d=1.5)
