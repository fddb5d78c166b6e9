"""Command-line entry point: ``gslab <command> [--config PATH] [--seed N] [--out DIR] [--jobs N] [--verbose]``.

Exit status is 0 on success, 1 for invalid configuration or input, 2 for any
other failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from pydantic import ValidationError

from app.config import config_hash, load_experiment_config, settings
from app.database import get_engine
from app.engine.checks import run_identity_suite
from app.engine.combinatorics import bound_table, count_ball, count_bins, log_growth_constant, minimal_constant
from app.engine.constructions import ding_wirth, dump_dw_choices, dump_ledger, two_scale_competitor
from app.engine.minimizer import dump_ground_state, minimize
from app.engine.multiscale import coarse_energy, decompose, dump_decomposition, per_scale_energy
from app.engine.potential import PotentialField
from app.engine.stats import envelope_stats, scaling_report
from app.engine.sweep import export_csv, load_result, mc_sweep, minimize_options, run_comparisons, save_result
from app.exceptions import ConfigError, InsufficientDataError, LabError
from app.models.experiment import ExperimentConfig, is_power_of_two
from app.utils.artifacts import artifact_meta, write_csv, write_curve, write_json
from app.utils.seeding import replicate_seed

logger = logging.getLogger('app')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

# tiny (L, l) instances of the bin count, and the D_hat values they are counted at
BIN_INSTANCES = ((4, 1), (8, 1), (8, 2), (16, 2), (16, 4))
BIN_THRESHOLDS = (0.25, 1.0)

ENVELOPE_STREAM = 4


def _size(config: ExperimentConfig, args: argparse.Namespace) -> int:
    size = getattr(args, 'size', None) or config.system_sizes[-1]
    if size < 4 or not is_power_of_two(size):
        raise ConfigError(f'system size {size} is not a power of two >= 4', field='size')
    return size


def _field(config: ExperimentConfig, L: int) -> tuple[int, PotentialField]:
    seed = replicate_seed(config.master_seed, L, 0)
    return seed, PotentialField(seed, L, config.resolution)


def cmd_simulate(config: ExperimentConfig, args: argparse.Namespace) -> int:
    L = _size(config, args)
    seed, field = _field(config, L)
    opts = minimize_options(config)
    p_values = sorted({2.0, *config.p_values})
    state = minimize(field, (0, L), 0.0, 0.0, opts, p_values=p_values)
    out = config.output_dir / 'simulate'
    meta = artifact_meta(config, seed, command='simulate', L=L)

    dump_ground_state(state, out, f'ground_state_L{L}', meta, opts)
    dec = decompose(state.config)
    dump_decomposition(dec, out / f'decomposition_L{L}.csv', meta)
    rows = []
    for p in p_values:
        coarse = coarse_energy(dec, p)
        rows.extend((p, scale, value, coarse[scale]) for scale, value in per_scale_energy(dec, p).items())
    write_csv(out / f'per_scale_L{L}.csv', meta, ('p', 'l', 'component', 'coarse'), rows)
    write_curve(out / f'heights_L{L}.dat', meta, state.config.sites, state.config.heights)

    print(f'L={L} seed={seed} E={state.objective:.6f} D={state.breakdown.dirichlet:.6f} '
          f'W={state.breakdown.field:.6f} band_hits={state.band_hits}')
    return 0


def cmd_sweep(config: ExperimentConfig, args: argparse.Namespace) -> int:
    result = mc_sweep(config, jobs=config.jobs)
    engine = get_engine(config.output_dir / settings.DB_NAME)
    save_result(result, engine)
    meta = artifact_meta(config, config.master_seed, command='sweep')
    export_csv(result, config.output_dir / 'sweep.csv', meta)
    print(f'run {result.run_hash}: {len(result.records)} record(s), {result.excluded} excluded after band-cap failures')

    status = 0
    if config.run_comparison:
        run = run_comparisons(config)
        write_json(config.output_dir / 'comparison.json', meta, {'comparison': run.model_dump(mode='json')})
        for counts in run.counts:
            print(f'comparison L={counts.L}: {counts.trials} trial(s), '
                  f'{counts.submodularity_violations} submodularity / {counts.order_violations} order / '
                  f'{counts.extended_order_violations} extended-order violation(s)')
        if run.shear is not None:
            shear = run.shear
            print(f'shear L={shear.L} n={shear.replicates} boundary={shear.boundary}: KS {shear.statistic:.4f} '
                  f"p={shear.pvalue:.3g} {'ok' if shear.passes else 'FAIL'}")
        if not run.clean:
            status = 2
    if config.run_counting and _counting_tables(config):
        status = 2
    return status


def cmd_report(config: ExperimentConfig, args: argparse.Namespace) -> int:
    engine = get_engine(config.output_dir / settings.DB_NAME)
    result = load_result(engine, config)
    if not result.records:
        raise InsufficientDataError(f'no stored records for run {result.run_hash}; run the sweep first')
    report = scaling_report(result)
    meta = artifact_meta(config, config.master_seed, command='report')
    out = config.output_dir / 'report'
    write_json(out / 'report.json', meta, {'report': report.model_dump(mode='json')})

    log_sizes = [math.log(row.L) for row in report.per_size]
    write_curve(out / 'dirichlet_vs_lnL.dat', meta, log_sizes, [row.dirichlet_per_length for row in report.per_size])
    write_curve(out / 'ratio_wd_vs_lnL.dat', meta, log_sizes, [row.ratio_wd for row in report.per_size])
    write_curve(out / 'c_L_vs_lnL.dat', meta, log_sizes, [row.c_L for row in report.per_size])
    for row in report.per_size:
        if row.flatness:
            write_curve(out / f'flatness_L{row.L}.dat', meta, list(row.flatness), list(row.flatness.values()))
        for p, table in row.flatness_by_p.items():
            if table and float(p) != 2.0:
                write_curve(out / f'flatness_p{p}_L{row.L}.dat', meta, list(table), list(table.values()))
    for L in report.sizes:
        table = [row for row in report.modulus if row.L == L]
        if table:
            write_curve(out / f'modulus_L{L}.dat', meta, [row.gap for row in table], [row.normalized for row in table])

    print(f"{'L':>6} {'n':>5} {'c_L':>10} {'D/L':>10} {'W/D':>8}")
    for row in report.per_size:
        print(f'{row.L:>6} {row.replicates:>5} {row.c_L:>10.5f} {row.dirichlet_per_length:>10.5f} {row.ratio_wd:>8.3f}')
    for gate in report.trends:
        print(f"trend {gate.name}: slope {gate.regression.slope:.4g} +- {gate.regression.slope_se:.2g} "
              f"{'ok' if gate.passes else 'FAIL'}")
    for row in report.per_size:
        if row.two_scale is not None:
            ts = row.two_scale
            print(f'two-scale L={row.L}: {ts.valid}/{ts.records} valid, worst margin {ts.worst_margin:.4g}, '
                  f'binning {ts.binning:.4g} scaling {ts.scaling:.4g} small {ts.small:.4g}')
    if report.frontier_extrapolated:
        print(f'{report.frontier_extrapolated} frontier estimate(s) extrapolated past D/L = 1')
    if report.excluded:
        print(f'{report.excluded} replicate(s) excluded after band-cap failures')
    return 0


def cmd_construct(config: ExperimentConfig, args: argparse.Namespace) -> int:
    L = _size(config, args)
    seed, field = _field(config, L)
    out = config.output_dir / 'construct'
    meta = artifact_meta(config, seed, command='construct', L=L)
    kinds = args.kind or [kind for kind, enabled in (('dw', config.run_ding_wirth),
                                                     ('two-scale', config.run_two_scale)) if enabled]
    status = 0
    if 'dw' in kinds:
        ledger = ding_wirth(field, L)
        dump_ledger(ledger, out / f'ding_wirth_L{L}.json', meta)
        dump_dw_choices(ledger, out / f'ding_wirth_choices_L{L}.csv', meta)
        print(f'ding-wirth L={L}: W={ledger.field_energy:.6f} D={ledger.dirichlet:.6f} '
              f'W/(L ln L)={ledger.field_energy / (L * math.log(L)):.6f}')
    if 'two-scale' in kinds:
        scale = L // config.two_scale_ratio
        ledger = two_scale_competitor(field, L, scale, minimize_options(config))
        dump_ledger(ledger, out / f'two_scale_L{L}_l{scale}.json', meta)
        print(f'two-scale L={L} l={scale}: E={ledger.competitor_energy:.6f} '
              f'min E={ledger.unconstrained.objective:.6f} valid={ledger.is_valid}')
        if not ledger.is_valid:
            status = 2
    if 'envelope' in kinds:
        scale = L // config.two_scale_ratio
        seeds = [replicate_seed(config.master_seed, 2 * scale, replicate, stream=ENVELOPE_STREAM)
                 for replicate in range(config.replicates)]
        centers = [(0.0, 0.0), (float(scale), 0.0), (float(scale), -float(scale))]
        rows = envelope_stats(seeds, scale, centers, minimize_options(config), config.resolution)
        write_json(out / f'envelope_L{L}_l{scale}.json', artifact_meta(config, command='construct', L=L, l=scale),
                   {'envelope': [row.model_dump(mode='json') for row in rows]})
        for row in rows:
            print(f'envelope l={scale} center={row.center}: |X|_psi3 = {row.estimate.value:.4f} (n={row.estimate.n})')
    return status


def _counting_tables(config: ExperimentConfig) -> int:
    """Ball and bin counting tables under output_dir/count; returns the number of bound failures."""
    out = config.output_dir / 'count'
    meta = artifact_meta(config, command='count')
    C0 = minimal_constant(config.counting_max_n, config.counting_max_d)
    growth = None
    if config.counting_max_d >= 2:
        growth = log_growth_constant(config.counting_max_n, config.counting_max_d)
    rows = bound_table(config.counting_max_n, config.counting_max_d, C0=C0)
    write_csv(out / 'ball_counts.csv', {**meta, 'C0': C0, 'log_growth': growth}, ('N', 'D', 'Z', 'bound', 'ok'),
              [(row.N, row.D, row.Z, row.bound, row.ok) for row in rows])
    bins = [count_bins(L, scale, D_hat) for L, scale in BIN_INSTANCES for D_hat in BIN_THRESHOLDS]
    write_csv(out / 'bin_counts.csv', meta, ('L', 'l', 'D_hat', 'count', 'product_bound', 'box_radius'),
              [(b.L, b.l, b.D_hat, b.count, b.product_bound, b.box_radius) for b in bins])

    print(f'C0* = {C0:.6f} over N <= {config.counting_max_n}, D <= {config.counting_max_d:g}')
    if growth is not None:
        print(f'ln Z <= C N ln D with C = {growth:.6f}')
    print(f"{'N':>3} {'D':>8} {'Z':>12} {'bound':>14} ok")
    for row in rows:
        print(f'{row.N:>3} {row.D:>8g} {row.Z:>12} {row.bound:>14.1f} {row.ok}')
    return sum(not row.ok for row in rows) + sum(b.count > b.product_bound for b in bins)


def cmd_count(config: ExperimentConfig, args: argparse.Namespace) -> int:
    if args.N is not None or args.D is not None:
        if args.N is None or args.D is None:
            raise ConfigError('--N and --D go together', field='N' if args.N is None else 'D')
        C0 = minimal_constant(config.counting_max_n, config.counting_max_d)
        row = count_ball(args.N, args.D)
        bound = (C0 * (row.D + 1.0)) ** (row.N / 2.0)
        print(f"{'N':>3} {'D':>8} {'Z':>12} {'bound':>14} ok")
        print(f'{row.N:>3} {row.D:>8g} {row.Z:>12} {bound:>14.1f} {row.Z <= bound}')
        return 0
    return 2 if _counting_tables(config) else 0


def cmd_check(config: ExperimentConfig, args: argparse.Namespace) -> int:
    results = run_identity_suite(config.master_seed)
    for result in results:
        print(f"{result.name:<14} {'pass' if result.passed else 'FAIL':<5} {result.detail}")
    return 0 if all(result.passed for result in results) else 2


COMMANDS = {
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'report': cmd_report,
    'construct': cmd_construct,
    'count': cmd_count,
    'check': cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the command from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, default=argparse.SUPPRESS, help='experiment config (key = value or JSON)')
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='override the master seed')
    common.add_argument('--out', type=Path, default=argparse.SUPPRESS, help='override the output directory')
    common.add_argument('--jobs', type=int, default=argparse.SUPPRESS, help='worker processes')
    common.add_argument('--verbose', action='store_true', default=argparse.SUPPRESS, help='debug logging')

    parser = argparse.ArgumentParser(prog='gslab', parents=[common],
                                     description='Ground states of min D - W with Brownian column potentials')
    commands = parser.add_subparsers(dest='command', required=True)
    simulate = commands.add_parser('simulate', parents=[common], help='one ground state and its decomposition')
    simulate.add_argument('--size', type=int, help='system size L (default: the largest configured)')
    commands.add_parser('sweep', parents=[common], help='Monte Carlo sweep into the run store and CSV')
    commands.add_parser('report', parents=[common], help='scaling report from the stored sweep')
    construct = commands.add_parser('construct', parents=[common], help='explicit competitor ledgers')
    construct.add_argument('--size', type=int, help='system size L (default: the largest configured)')
    construct.add_argument('--kind', action='append', choices=('dw', 'two-scale', 'envelope'),
                           help='construction to run (repeatable; default: the enabled ones)')
    count = commands.add_parser('count', parents=[common], help='lattice-point counting tables')
    count.add_argument('--N', type=int, help='single row: dimension')
    count.add_argument('--D', type=float, help='single row: energy level')
    commands.add_parser('check', parents=[common], help='deterministic identity suite')
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    verbose = getattr(args, 'verbose', False)
    logging.basicConfig(level=logging.DEBUG if verbose else settings.LOG_LEVEL, format=LOG_FORMAT)

    try:
        config = load_experiment_config(
            getattr(args, 'config', None),
            master_seed=getattr(args, 'seed', None),
            output_dir=getattr(args, 'out', None),
            jobs=getattr(args, 'jobs', None),
        )
        logger.info('%s with config %s (seed %d)', args.command, config_hash(config), config.master_seed)
        return COMMANDS[args.command](config, args)
    except (ConfigError, InsufficientDataError, ValidationError) as exc:
        logger.error('%s', exc)
        print(f'error: {exc}', file=sys.stderr)
        return 1
    except LabError as exc:
        logger.error('%s: %s', type(exc).__name__, exc)
        print(f'error: {exc}', file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
