"""Fast deterministic identity suite behind the `check` subcommand."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.engine.combinatorics import count_ball, enumerate_ball
from app.engine.constructions import ding_wirth
from app.engine.energy import dirichlet, dirichlet_form, dirichlet_p, green_function, mass
from app.engine.multiscale import closed_form_energy, decompose
from app.engine.potential import PotentialField
from app.engine.stats import comparison_suite
from app.exceptions import LabError
from app.models.height import HeightConfig
from app.utils.seeding import replicate_seed

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name:   str
    passed: bool
    detail: str = ''


def _random_config(rng: np.random.Generator, L: int) -> HeightConfig:
    heights = rng.normal(0.0, math.sqrt(L), L + 1)
    heights[0] = heights[-1] = 0.0
    return HeightConfig(heights=heights)


def green_identities(rng: np.random.Generator, sizes=(4, 16, 64), samples: int = 20) -> CheckResult:
    worst = 0.0
    for L in sizes:
        configs = [_random_config(rng, L) for _ in range(samples)]
        for y in range(1, L):
            phi = green_function(L, y).values
            if abs(mass(phi) - (L - y) * y / 2) > 1e-9 or abs(dirichlet(phi) - (L - y) * y / (2 * L)) > 1e-12:
                return CheckResult(name='green', passed=False, detail=f'closed forms fail at L={L}, y={y}')
            for h in configs:
                worst = max(worst, abs(dirichlet_form(h, phi) - h.heights[y]))
    return CheckResult(name='green', passed=worst <= 1e-9, detail=f'max |D(h, phi_y) - h(y)| = {worst:.3g}')


def decomposition_exactness(rng: np.random.Generator, L: int = 256, samples: int = 10) -> CheckResult:
    worst = 0.0
    for _ in range(samples):
        h = _random_config(rng, L)
        dec = decompose(h)
        worst = max(worst, float(np.max(np.abs(dec.reconstruct() - h.heights))))
        total = math.fsum(dirichlet(part) for part in dec.components.values())
        worst = max(worst, abs(total - dirichlet(h)) / dirichlet(h))
        for scale, part in dec.components.items():
            for p in (2.0, 2.5, 3.0):
                direct = dirichlet_p(part, p)
                worst = max(worst, abs(direct - closed_form_energy(h, scale, p)) / max(1.0, direct))
    return CheckResult(name='decomposition', passed=worst <= 1e-9, detail=f'worst relative defect {worst:.3g}')


def comparison(seed: int, L: int = 16, trials: int = 20) -> CheckResult:
    counts = comparison_suite([replicate_seed(seed, L, 0, stream=1)], L, trials)
    return CheckResult(name='comparison', passed=counts.clean,
                       detail=f'{counts.submodularity_violations} submodularity, {counts.order_violations} order, '
                              f'{counts.extended_order_violations} extended order violations in {trials} trials')


def ding_wirth_invariants(seed: int, L: int = 64, runs: int = 5) -> CheckResult:
    for replicate in range(runs):
        ledger = ding_wirth(PotentialField(replicate_seed(seed, L, replicate, stream=2), L))
        if not (ledger.dirichlet_ok and ledger.nesting_ok):
            return CheckResult(name='ding_wirth', passed=False, detail=f'replicate {replicate} breaks an invariant')
    return CheckResult(name='ding_wirth', passed=True, detail=f'{runs} constructions at L={L}')


def counting_oracle() -> CheckResult:
    expected = {(1, 0.0): 0, (1, 2.0): 3, (2, 1.0): 5}
    for (N, D), Z in expected.items():
        if count_ball(N, D).Z != Z:
            return CheckResult(name='counting', passed=False, detail=f'Z({N}, {D}) != {Z}')
    for N, D in ((3, 4.0), (4, 2.5)):
        if enumerate_ball(N, D, tuple(reversed(range(N)))) != count_ball(N, D).Z:
            return CheckResult(name='counting', passed=False, detail=f'enumeration disagrees at N={N}, D={D}')
    return CheckResult(name='counting', passed=True, detail='oracle values and enumeration agree')


def run_identity_suite(seed: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    checks: list[tuple[str, Callable[[], CheckResult]]] = [
        ('green', lambda: green_identities(rng)),
        ('decomposition', lambda: decomposition_exactness(rng)),
        ('comparison', lambda: comparison(seed)),
        ('ding_wirth', lambda: ding_wirth_invariants(seed)),
        ('counting', counting_oracle),
    ]
    results = []
    for name, check in checks:
        try:
            result = check()
        except LabError as exc:
            result = CheckResult(name=name, passed=False, detail=f'{type(exc).__name__}: {exc}')
        if not result.passed:
            logger.warning('check %s failed: %s', name, result.detail)
        results.append(result)
    return results
