import json
import math

import numpy as np
import pytest

from app.engine.constructions import CoarseField, ding_wirth, dump_dw_choices, dump_ledger, two_scale_competitor
from app.engine.energy import field_term
from app.engine.multiscale import decompose, per_scale_energy
from app.engine.potential import PotentialField
from app.engine.stats import RunningMoments
from app.exceptions import DomainError
from app.models.ground_state import MinimizeOptions
from app.utils.artifacts import read_csv
from app.utils.seeding import replicate_seed


def test_flat_potential_raises_every_bump(zero_field):
    ledger = ding_wirth(zero_field(16))
    assert len(ledger.choices) == 15
    assert all(choice.choice == choice.scale for choice in ledger.choices)
    assert ledger.scale_dirichlet == {8: 0.5, 4: 0.5, 2: 0.5, 1: 0.5}
    assert ledger.dirichlet == 32.0
    assert ledger.field_energy == 0.0
    assert ledger.dirichlet_ok and ledger.nesting_ok


def test_choices_follow_the_sign_of_the_noise(linear_field):
    raised = ding_wirth(linear_field(16, 1.0))
    assert all(choice.triangle_sum > 0 for choice in raised.choices)
    assert raised.config.heights.max() > 0

    lowered = ding_wirth(linear_field(16, -1.0))
    assert all(choice.choice == 0 for choice in lowered.choices)
    assert not lowered.config.heights.any()


def test_choices_at_a_scale(zero_field):
    ledger = ding_wirth(zero_field(32))
    assert [choice.peak for choice in ledger.choices_at(4)] == [1, 2, 3, 4]


def test_ledger_on_a_random_field():
    field = PotentialField(4242, 128)
    ledger = ding_wirth(field)
    assert ledger.dirichlet_ok and ledger.nesting_ok
    assert ledger.field_energy == field_term(field, ledger.config)
    energies = per_scale_energy(decompose(ledger.config), 2.0)
    for scale, value in ledger.scale_dirichlet.items():
        assert energies[scale] == pytest.approx(value, abs=1e-12)
        raised = sum(1 for choice in ledger.choices_at(scale) if choice.choice)
        assert value == pytest.approx(raised * scale / 128)


def test_construction_on_a_prefix(field):
    ledger = ding_wirth(field, 16)
    assert ledger.system_size == 16
    assert ledger.config.length == 16


@pytest.mark.parametrize('L', [2, 12, 128])
def test_construction_sizes(field, L):
    with pytest.raises(DomainError):
        ding_wirth(field, L)


def test_dump_dw_choices(tmp_path, zero_field):
    ledger = ding_wirth(zero_field(8))
    meta, rows = read_csv(dump_dw_choices(ledger, tmp_path / 'choices.csv', {'L': 8}))
    assert len(rows) == 7
    assert rows[0] == {'l': '4', 'x_hat': '1', 'choice': '4', 'triangle_sum': '0.0'}


def test_dump_ledger(tmp_path, zero_field):
    path = dump_ledger(ding_wirth(zero_field(8)), tmp_path / 'ledger.json', {'L': 8})
    document = json.loads(path.read_text())
    assert document['meta'] == {'L': 8}
    assert document['ledger']['system_size'] == 8
    assert len(document['ledger']['config']['heights']) == 9


def test_coarse_field_averages_blocks(linear_field, field):
    coarse = CoarseField(linear_field(16, 0.5), 4)
    assert coarse.system_size == 4
    assert coarse.values(2, [1.0]).tolist() == [2.0]

    coarse = CoarseField(field, 4)
    assert coarse.resolution == field.resolution / 4
    heights = coarse.resolution * (-5 + 8 * np.arange(10))
    assert np.array_equal(coarse.grid(3, -5, 10, 8), coarse.values(3, heights))
    assert np.allclose(coarse.batch(np.full(10, 3), heights), coarse.values(3, heights))
    expected = sum(field.value(x, 4 * 0.75) for x in range(9, 13)) / 4
    assert coarse.values(3, [0.75])[0] == pytest.approx(expected)


def test_coarse_field_columns(field):
    with pytest.raises(DomainError):
        CoarseField(field, 4).values(16, [0.0])


def test_two_scale_without_disorder(zero_field):
    ledger = two_scale_competitor(zero_field(16), 16, 4, MinimizeOptions())
    assert ledger.binned == [0, 0, 0, 0, 0]
    assert ledger.competitor_energy == 0.0
    assert ledger.binning_error == ledger.scaling_error == ledger.small_scale_term == 0.0
    assert ledger.is_valid


@pytest.mark.parametrize('L,scale', [(64, 8), (64, 4), (32, 2)])
def test_two_scale_ledger_telescopes(field, L, scale):
    ledger = two_scale_competitor(field, L, scale, MinimizeOptions())
    total = math.fsum([ledger.coarse_energy, ledger.binning_error, ledger.scaling_error, ledger.small_scale_term])
    assert total == pytest.approx(ledger.competitor_energy, abs=1e-9)
    assert ledger.is_valid
    coarse = np.array(ledger.coarse_minimizer.config.heights)
    assert np.all(np.abs(coarse - np.array(ledger.binned)) <= 0.5)
    for k, b in enumerate(ledger.binned):
        assert ledger.competitor.config.heights[scale * k] == scale * b


@pytest.mark.parametrize('scale', [1, 64, 3])
def test_two_scale_validation(field, scale):
    with pytest.raises(DomainError):
        two_scale_competitor(field, 64, scale, MinimizeOptions())


@pytest.mark.slow
def test_invariants_over_many_fields():
    for seed in range(100):
        ledger = ding_wirth(PotentialField(seed, 256))
        assert ledger.dirichlet_ok and ledger.nesting_ok


@pytest.mark.slow
def test_dw_field_energy_grows_like_L_log_L():
    moments = []
    for L in (64, 256, 1024):
        values = [ding_wirth(PotentialField(replicate_seed(7, L, k), L)).field_energy / (L * math.log(L))
                  for k in range(100)]
        moments.append(RunningMoments(values))
    assert all(m.mean > 0 for m in moments)
    for small, large in zip(moments, moments[1:]):
        assert large.mean >= small.mean - 2.0 * math.hypot(small.se, large.se)
