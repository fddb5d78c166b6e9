"""Monte Carlo sweep over (L, replicate).

Every replicate is a pure function of (master seed, L, replicate index), so
records do not depend on the worker count or on the order they finish in.
"""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from sqlalchemy import delete
from sqlalchemy.engine import Engine
from sqlmodel import select

from app.config import config_hash, settings
from app.database import session_scope
from app.engine.constructions import ding_wirth, two_scale_competitor
from app.engine.minimizer import lagrangian_frontier, minimize
from app.engine.multiscale import coarse_energy, decompose, per_scale_energy
from app.engine.potential import PotentialField
from app.engine.stats import comparison_suite, shear_invariance
from app.exceptions import BandExhaustedError
from app.models.experiment import ExperimentConfig
from app.models.ground_state import MinimizeOptions
from app.models.report import ComparisonRun
from app.models.sweep import RECORD_BAND_EXHAUSTED, SweepRecord, SweepRecordBase, SweepResult
from app.utils.artifacts import write_csv
from app.utils.seeding import replicate_seed

logger = logging.getLogger(__name__)

_JSON_COLUMNS = ('per_scale', 'coarse_scale', 'modulus', 'frontier')

# replicate_seed streams; 0 drives the sweep records
COMPARISON_STREAM = 1
SHEAR_STREAM = 3


def minimize_options(config: ExperimentConfig) -> MinimizeOptions:
    return MinimizeOptions(
        grid_spacing=config.grid_spacing,
        band_half_width=config.band_half_width,
        adaptive_band=config.adaptive_band,
        band_doubling_cap=config.band_doubling_cap,
    )


def modulus_samples(heights, L: int) -> dict[str, list[float]]:
    """gap -> |h(x + gap) - h(x)| over the disjoint windows x = 0, gap, 2 gap, ..."""
    samples = {}
    gap = 1
    while gap <= L:
        samples[str(gap)] = [abs(float(heights[x + gap]) - float(heights[x])) for x in range(0, L - gap + 1, gap)]
        gap *= 2
    return samples


def _exponents(config: ExperimentConfig) -> list[float]:
    # p = 2 feeds the flatness table and the Jensen check
    return sorted({2.0, *(float(p) for p in config.p_values)})


def run_replicate(config: ExperimentConfig, L: int, replicate: int, run_hash: str) -> dict[str, Any]:
    """All configured observables of one replicate, as plain data."""
    seed = replicate_seed(config.master_seed, L, replicate)
    row: dict[str, Any] = dict(run_hash=run_hash, system_size=L, replicate=replicate, seed=str(seed))
    started = time.perf_counter()
    field = PotentialField(seed, L, config.resolution)
    opts = minimize_options(config)
    cache: dict = {}
    exponents = _exponents(config)
    try:
        state = minimize(field, (0, L), 0.0, 0.0, opts, p_values=exponents, grid_cache=cache)
        heights = state.config.heights
        row.update(
            min_energy=state.objective,
            dirichlet=state.breakdown.dirichlet,
            field=state.breakdown.field,
            mass=state.breakdown.mass,
            midpoint=float(heights[L // 2]),
            band_hits=state.band_hits,
            heights=heights.tolist(),
        )

        dec = decompose(state.config)
        row['per_scale'] = {repr(p): {str(scale): value for scale, value in per_scale_energy(dec, p).items()}
                            for p in exponents}
        row['coarse_scale'] = {repr(p): {str(scale): value for scale, value in coarse_energy(dec, p).items()}
                               for p in exponents}
        if config.run_modulus:
            row['modulus'] = modulus_samples(heights, L)

        if config.run_frontier:
            frontier = lagrangian_frontier(field, L, config.mus, opts, grid_cache=cache)
            row['frontier'] = [[point.mu, point.dirichlet_per_length, point.field_per_length,
                                point.energy_per_length] for point in frontier.points]
            row['w1_hat'] = frontier.W1_hat
            row['w1_extrapolated'] = frontier.extrapolated

        if config.run_ding_wirth and L >= 4:
            ledger = ding_wirth(field, L)
            row['dw_field'], row['dw_dirichlet'] = ledger.field_energy, ledger.dirichlet

        scale = L // config.two_scale_ratio
        if config.run_two_scale and scale >= 2:
            competitor = two_scale_competitor(field, L, scale, opts)
            row.update(
                two_scale_energy=competitor.competitor_energy,
                two_scale_binning=competitor.binning_error,
                two_scale_scaling=competitor.scaling_error,
                two_scale_small=competitor.small_scale_term,
            )
    except BandExhaustedError as exc:
        logger.warning('L=%d replicate %d (seed %d) excluded: %s', L, replicate, seed, exc)
        row = dict(run_hash=run_hash, system_size=L, replicate=replicate, seed=str(seed),
                   status=RECORD_BAND_EXHAUSTED)
    row['runtime'] = time.perf_counter() - started
    return row


def _run_task(task: tuple[ExperimentConfig, int, int, str]) -> dict[str, Any]:
    return run_replicate(*task)


def mc_sweep(config: ExperimentConfig, jobs: int | None = None) -> SweepResult:
    """Run every (L, replicate) of the plan, in-process for one job, else on a process pool."""
    run_hash = config_hash(config)
    tasks = [(config, L, replicate, run_hash) for L in config.system_sizes for replicate in range(config.replicates)]
    jobs = jobs or config.jobs or settings.JOBS
    logger.info('sweep %s: %d replicate(s) over L=%s with %d job(s)', run_hash, len(tasks), config.system_sizes, jobs)

    pending = Counter(L for _, L, _, _ in tasks)
    rows = []
    if jobs == 1:
        results = map(_run_task, tasks)
        for row in results:
            rows.append(row)
            _progress(pending, row['system_size'])
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            for row in pool.map(_run_task, tasks):
                rows.append(row)
                _progress(pending, row['system_size'])

    records = sorted((SweepRecord.model_validate(row) for row in rows), key=lambda r: (r.system_size, r.replicate))
    result = SweepResult(run_hash=run_hash, master_seed=config.master_seed, records=records)
    if result.excluded:
        logger.warning('%d of %d replicate(s) hit the band cap and are excluded', result.excluded, len(records))
    return result


def _progress(pending: Counter, L: int) -> None:
    pending[L] -= 1
    if not pending[L]:
        logger.info('L=%d done', L)


def save_result(result: SweepResult, engine: Engine) -> int:
    """Replace the stored records of this run hash with the result's records."""
    with session_scope(engine) as session:
        session.execute(delete(SweepRecord).where(SweepRecord.run_hash == result.run_hash))
        for record in result.records:
            session.add(SweepRecord.model_validate(record.model_dump(exclude={'id'})))
        session.commit()
    logger.info('stored %d record(s) of run %s', len(result.records), result.run_hash)
    return len(result.records)


def load_result(engine: Engine, config: ExperimentConfig) -> SweepResult:
    run_hash = config_hash(config)
    with session_scope(engine) as session:
        records = session.exec(
            select(SweepRecord)
            .where(SweepRecord.run_hash == run_hash)
            .order_by(SweepRecord.system_size, SweepRecord.replicate)
        ).all()
        records = [SweepRecord.model_validate(record.model_dump()) for record in records]
    return SweepResult(run_hash=run_hash, master_seed=config.master_seed, records=records)


def export_csv(result: SweepResult, path: Path | str, meta: dict[str, Any]) -> Path:
    """One row per record; list-valued observables as compact JSON, runtime left out."""
    scalars = [name for name in SweepRecordBase.model_fields]
    columns = [*scalars, *_JSON_COLUMNS]
    rows = []
    for record in result.records:
        row = [getattr(record, name) for name in scalars]
        row.extend(json.dumps(getattr(record, name), sort_keys=True, separators=(',', ':')) for name in _JSON_COLUMNS)
        rows.append(row)
    return write_csv(path, meta, columns, rows)


def shear_boundary(L: int, spacing: float) -> tuple[float, float]:
    """Boundary values (0, L * slope) with a slope near one that keeps the chord on the grid."""
    return 0.0, L * spacing * max(1, round(1.0 / spacing))


def run_comparisons(config: ExperimentConfig) -> ComparisonRun:
    """Comparison suite at every configured size and the shear test at the smallest one."""
    opts = minimize_options(config)
    counts = []
    for L in config.system_sizes:
        seeds = [replicate_seed(config.master_seed, L, replicate, stream=COMPARISON_STREAM)
                 for replicate in range(config.replicates)]
        counts.append(comparison_suite(seeds, L, config.comparison_trials, opts, config.resolution))
        logger.info('comparison suite at L=%d: %d trial(s)', L, config.comparison_trials)

    L = config.system_sizes[0]
    seeds = [replicate_seed(config.master_seed, L, replicate, stream=SHEAR_STREAM)
             for replicate in range(config.shear_replicates)]
    shear = shear_invariance(seeds, L, shear_boundary(L, opts.grid_spacing), opts, config.resolution)
    return ComparisonRun(run_hash=config_hash(config), counts=counts, shear=shear)
