import math

import numpy as np
import pytest

from app.engine.energy import dirichlet, dirichlet_form, dirichlet_p
from app.engine.multiscale import (
    bin_profile,
    closed_form_energy,
    coarse_energy,
    coarsen,
    component,
    decompose,
    dump_decomposition,
    peak_values,
    per_scale_energy,
)
from app.exceptions import DomainError
from app.models.height import HeightConfig
from app.utils.artifacts import read_csv


def test_small_decomposition_by_hand():
    h = HeightConfig(heights=[0, 1, 4, 1, 0])
    dec = decompose(h)
    assert dec.scales == [1, 2]
    assert dec.components[1].heights.tolist() == [0, -1, 0, -1, 0]
    assert dec.components[2].heights.tolist() == [0, 2, 4, 2, 0]
    assert peak_values(h, 1).tolist() == [-1, -1]
    assert peak_values(h, 2).tolist() == [4]
    assert closed_form_energy(h, 2, 2.0) == 8.0
    assert dirichlet_p(dec.components[2], 2.0) == 8.0


def test_decomposition_is_exact_at_large_size(random_config):
    h = random_config(1024)
    dec = decompose(h)
    assert np.allclose(dec.reconstruct(), h.heights, rtol=0, atol=1e-9)
    total = math.fsum(dirichlet(part) for part in dec.components.values())
    assert total == pytest.approx(dirichlet(h), rel=1e-9)


@pytest.mark.parametrize('p', [1.0, 2.0, 3.5])
def test_closed_form_matches_direct_energy(random_config, p):
    h = random_config(256)
    dec = decompose(h)
    for scale, part in dec.components.items():
        assert closed_form_energy(h, scale, p) == pytest.approx(dirichlet_p(part, p), rel=1e-9)


def test_components_vanish_on_their_coarse_nodes(random_config):
    h = random_config(64)
    for scale, part in decompose(h).components.items():
        assert np.allclose(part.heights[::2 * scale], 0.0, atol=1e-12)


def test_per_scale_energy_sums_to_the_total(random_config):
    h = random_config(128)
    dec = decompose(h)
    energies = per_scale_energy(dec, 2.0)
    assert sorted(energies) == dec.scales
    assert math.fsum(energies.values()) == pytest.approx(dirichlet(h) / 128, rel=1e-9)


def test_coarse_energy(random_config):
    h = random_config(64)
    dec = decompose(h)
    coarse = coarse_energy(dec, 2.0)
    assert coarse[1] == pytest.approx(dirichlet(h) / 64, rel=1e-9)
    assert coarse[32] == pytest.approx(dirichlet_p(dec.components[32], 2.0) / 64, rel=1e-9)
    assert all(coarse[a] >= coarse[b] * (1 - 1e-9) for a, b in zip(dec.scales, dec.scales[1:]))


def test_coarsen_keeps_node_values(random_config):
    h = random_config(32)
    coarse = coarsen(h, 4)
    assert np.array_equal(coarse.heights[::4], h.heights[::4])
    assert coarsen(h, 1) is h


@pytest.mark.parametrize('scale', [3, 64])
def test_scale_must_divide_the_length(random_config, scale):
    with pytest.raises(DomainError):
        coarsen(random_config(32), scale)


def test_component_scale_limit(random_config):
    with pytest.raises(DomainError):
        component(random_config(32), 32)


def test_decompose_requirements():
    with pytest.raises(DomainError):
        decompose(HeightConfig.zeros(12))
    with pytest.raises(DomainError):
        decompose(HeightConfig(heights=[0, 1, 1]))


@pytest.mark.parametrize('scale', [1, 2, 8])
def test_bin_profile(random_config, scale):
    h = random_config(64, spread=20.0)
    binned = bin_profile(h, scale)
    nodes = binned.heights[::2 * scale]
    assert binned.has_zero_boundary
    assert np.array_equal(nodes, 2 * scale * np.round(nodes / (2 * scale)))
    gap = h.heights[::2 * scale] - nodes
    assert np.all(gap > -scale) and np.all(gap <= scale)
    assert np.all(np.abs(coarsen(h, 2 * scale).heights - binned.heights) <= scale)
    rho = 2 * scale
    while 2 * rho <= 64:
        assert np.all(np.abs(peak_values(binned, rho) - peak_values(h, rho)) <= 2 * scale)
        rho *= 2


def test_bin_profile_upper_edge_belongs_to_the_lower_bin():
    h = HeightConfig(heights=[0, 0, 1, 0, 0])
    assert bin_profile(h, 1).heights.tolist() == [0, 0, 0, 0, 0]
    h = HeightConfig(heights=[0, 0, -1, 0, 0])
    assert bin_profile(h, 1).heights[2] == -2


def test_dump_decomposition(tmp_path, random_config):
    dec = decompose(random_config(16))
    path = dump_decomposition(dec, tmp_path / 'dec.csv', {'seed': 7})
    meta, rows = read_csv(path)
    assert meta == {'seed': '7'}
    assert len(rows) == 17 * (1 + len(dec.scales))
    assert {row['l'] for row in rows} == {'0', '1', '2', '4', '8'}


def test_uneven_configuration_by_hand():
    h = HeightConfig(heights=[0, 3, 1, -1, 0])
    dec = decompose(h)
    assert dirichlet(h) == 9.0
    assert dirichlet(dec.components[1]) == 8.5
    assert dirichlet(dec.components[2]) == 0.5
    assert per_scale_energy(dec, 2.0) == pytest.approx({1: 8.5 / 4, 2: 0.5 / 4})


def test_components_are_orthogonal(random_config):
    dec = decompose(random_config(64))
    for a in dec.scales:
        for b in dec.scales:
            if a != b:
                assert abs(dirichlet_form(dec.components[a], dec.components[b])) < 1e-9


@pytest.mark.parametrize('scale', [1, 2, 4, 8])
def test_coarsening_is_a_nested_projection(random_config, scale):
    h = random_config(32)
    coarse = coarsen(h, scale)
    assert np.allclose(coarsen(coarse, scale).heights, coarse.heights, rtol=0, atol=1e-12)
    assert np.allclose(coarsen(coarse, 2 * scale).heights, coarsen(h, 2 * scale).heights, rtol=0, atol=1e-12)
    assert np.allclose(coarsen(coarsen(h, 2 * scale), scale).heights, coarsen(h, 2 * scale).heights,
                       rtol=0, atol=1e-12)


def test_affine_configurations_have_no_components():
    h = HeightConfig(heights=0.3 + 1.7 * np.arange(33))
    for scale in (1, 2, 4, 8, 16):
        assert np.allclose(component(h, scale).heights, 0.0, atol=1e-12)
        assert np.allclose(peak_values(h, scale), 0.0, atol=1e-12)
