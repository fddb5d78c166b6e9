import math

import numpy as np
import pytest

from app.engine.energy import (
    canonical_distance,
    dirichlet,
    dirichlet_form,
    dirichlet_p,
    field_term,
    green_function,
    mass,
    poincare_gap,
    total_energy,
)
from app.engine.potential import evaluate
from app.exceptions import DomainError
from app.models.height import HeightConfig


def _h(*values: float, x_offset: int = 0) -> HeightConfig:
    return HeightConfig(x_offset=x_offset, heights=np.array(values, dtype=float))


def test_dirichlet_by_hand():
    h = _h(0, 1, 3, 0)
    assert dirichlet(h) == 7.0
    assert dirichlet_p(h, 2.0) == 7.0
    assert dirichlet_p(h, 1.0) == pytest.approx(2 ** -0.5 * 6)
    assert mass(h) == 4.0


def test_p_below_one_is_rejected():
    with pytest.raises(DomainError):
        dirichlet_p(_h(0, 1, 0), 0.5)


def test_power_means_grow_with_p(random_config):
    h = random_config(64)
    L = h.length
    means = [(2 ** (p / 2) * dirichlet_p(h, p) / L) ** (1 / p) for p in (1.0, 1.5, 2.0, 3.0, 4.0)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(means, means[1:]))


@pytest.mark.parametrize('L', [4, 16, 64])
def test_green_function_closed_forms(L):
    for y in range(1, L):
        phi = green_function(L, y).values
        assert phi.has_zero_boundary
        assert phi.heights[y] == pytest.approx((L - y) * y / L)
        assert mass(phi) == pytest.approx((L - y) * y / 2, abs=1e-9)
        assert dirichlet(phi) == pytest.approx((L - y) * y / (2 * L), abs=1e-12)


def test_green_function_reproduces_values(random_config):
    h = random_config(16)
    for y in range(1, 16):
        assert dirichlet_form(h, green_function(16, y).values) == pytest.approx(h.heights[y], abs=1e-9)


@pytest.mark.parametrize('y', [0, 8])
def test_green_pole_must_be_interior(y):
    with pytest.raises(DomainError):
        green_function(8, y)


def test_dirichlet_form_needs_matching_spans():
    with pytest.raises(DomainError):
        dirichlet_form(_h(0, 1, 0), _h(0, 1, 0, x_offset=1))


def test_dirichlet_form_is_polarization(random_config):
    h, g = random_config(32), random_config(32)
    assert dirichlet_form(h, g) == pytest.approx(dirichlet(h + g) - dirichlet(h) - dirichlet(g))


def test_total_energy_breakdown(linear_field):
    h = _h(0, 1, 2, -1, 0)
    breakdown = total_energy(linear_field(4, 0.5), h, p_values=[2.0, 3.0])
    assert breakdown.dirichlet == 0.5 * (1 + 1 + 9 + 1)
    assert breakdown.field == 1.0
    assert breakdown.total == breakdown.dirichlet - breakdown.field
    assert breakdown.mass == 4.0
    assert breakdown.p_dirichlet[2.0] == breakdown.dirichlet


def test_field_term_on_a_sub_interval(linear_field):
    assert field_term(linear_field(8, 2.0), _h(1, 2, 3, x_offset=3)) == 4.0
    assert field_term(linear_field(8, 2.0), _h(1, 2)) == 0.0


def test_field_term_outside_columns(field):
    with pytest.raises(DomainError):
        field_term(field, HeightConfig.zeros(70))


def test_canonical_distance(random_config):
    h, g = random_config(32), random_config(32)
    assert canonical_distance(h, g) == pytest.approx(math.sqrt(mass(h - g)) / 32)
    assert canonical_distance(h, g) == canonical_distance(g, h)
    assert canonical_distance(h, h) == 0.0


def test_poincare_bound(random_config):
    for L in (4, 16, 256):
        scaled_mass, root_energy = poincare_gap(random_config(L))
        assert scaled_mass <= root_energy


def test_poincare_needs_zero_boundary():
    with pytest.raises(DomainError):
        poincare_gap(_h(1, 0, 0))


@pytest.mark.slow
def test_canonical_distance_matches_sampled_variance():
    h = _h(0, 1.5, -2.0, 0.75, 0)
    g = _h(0, -0.5, 1.0, 0.75, 0)
    seeds = np.arange(1, 20_001, dtype=np.uint64)
    difference = sum(evaluate(seeds, x, h.heights[x]) - evaluate(seeds, x, g.heights[x]) for x in range(1, 4))
    sampled = math.sqrt(difference.var(ddof=1)) / h.length
    assert sampled == pytest.approx(canonical_distance(h, g), rel=0.05)


@pytest.mark.parametrize('p', [1.0, 2.0, 2.5, 3.0])
@pytest.mark.parametrize('factor', [-2.5, 0.5, 3.0])
def test_p_dirichlet_is_homogeneous(random_config, p, factor):
    h = random_config(32)
    assert dirichlet_p(h.scaled(factor), p) == pytest.approx(abs(factor) ** p * dirichlet_p(h, p), rel=1e-12)
