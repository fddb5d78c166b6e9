"""Estimators over Monte Carlo samples.

Orlicz norms, Welford moments, the scaling report folded from sweep records,
the linearization gap, the deterministic comparison checks and the shear test.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence

import numpy as np
from scipy import optimize
from scipy import stats as scipy_stats
from scipy.special import logsumexp

from app.engine.energy import dirichlet, field_term, mass
from app.engine.minimizer import envelope_minimizers, minimize
from app.engine.potential import Potential, PotentialField
from app.exceptions import DomainError, InsufficientDataError
from app.models.experiment import DEFAULT_RESOLUTION
from app.models.ground_state import MinimizeOptions
from app.models.height import HeightConfig
from app.models.linearization import LinearizationGap
from app.models.report import (
    ComparisonCounts,
    EnvelopeRow,
    FrontierConsistency,
    ModulusRow,
    NormRelation,
    Regression,
    ScalingReport,
    ShearTest,
    SizeSummary,
    SuperadditivityRow,
    TrendGate,
    TwoScaleSummary,
)
from app.models.sweep import OrliczEstimate, SampleSet, SweepRecord, SweepResult
from app.utils.seeding import splitmix64

logger = logging.getLogger(__name__)

ORLICZ_RTOL = 1e-10
BOOTSTRAP_RESAMPLES = 200
MIN_REPORT_SIZES = 3
LINEARIZATION_TARGETS = (0.5, 0.1, 0.02)
TWO_SCALE_RTOL = 1e-9
SHEAR_LEVEL = 0.01


# -- Orlicz norms -------------------------------------------------------------

def _as_samples(samples) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    values = np.asarray(samples, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise DomainError('cannot estimate a norm from an empty sample')
    if not np.all(np.isfinite(values)):
        raise DomainError('samples must be finite')
    return SampleSet(values=values)


def _orlicz_excess(nu: float, magnitudes: np.ndarray, s: float, log_n: float) -> float:
    """ln mean exp(|X / nu|^s) - 1; strictly decreasing in nu."""
    return float(logsumexp((magnitudes / nu) ** s)) - log_n - 1.0


def _solve_orlicz(magnitudes: np.ndarray, s: float) -> tuple[float, tuple[float, float]]:
    top = float(magnitudes.max())
    if top == 0.0:
        return 0.0, (0.0, 0.0)
    n = magnitudes.size
    log_n = math.log(n)
    lo = top / math.log(10.0 * n) ** (1.0 / s)
    hi = top * n ** (1.0 / s)
    while _orlicz_excess(lo, magnitudes, s, log_n) < 0.0:
        lo /= 2.0
    while _orlicz_excess(hi, magnitudes, s, log_n) > 0.0:
        hi *= 2.0
    nu = optimize.bisect(_orlicz_excess, lo, hi, args=(magnitudes, s, log_n),
                         xtol=1e-15 * top, rtol=ORLICZ_RTOL)
    return float(nu), (lo, hi)


def orlicz_norm(samples: SampleSet | Sequence[float] | np.ndarray, s: float,
                bootstrap: int = 0, seed: int = 0) -> OrliczEstimate:
    """Empirical ||X||_s: the nu with mean exp(|X / nu|^s) = e.

    With `bootstrap` > 1 the standard error over that many resamples is attached,
    together with the bias-corrected estimate 2 nu_hat - mean(resampled nu), floored at 0.
    """
    if s < 1:
        raise DomainError(f'Orlicz exponent must be >= 1, got {s}')
    sample_set = _as_samples(samples)
    magnitudes = np.abs(sample_set.values)
    nu, bracket = _solve_orlicz(magnitudes, s)

    spread = corrected = None
    if bootstrap > 1:
        rng = np.random.default_rng(seed)
        n = magnitudes.size
        draws = np.array([_solve_orlicz(magnitudes[rng.integers(0, n, n)], s)[0] for _ in range(bootstrap)])
        spread = float(np.std(draws, ddof=1))
        corrected = max(2.0 * nu - float(draws.mean()), 0.0)
    return OrliczEstimate(s=s, nu_hat=nu, n=magnitudes.size, bracket=bracket, tolerance=ORLICZ_RTOL,
                          bootstrap_se=spread, corrected=corrected, label=sample_set.label)


# -- moments and regressions --------------------------------------------------

class RunningMoments:
    """Welford accumulator for mean, sample variance and standard error."""

    __slots__ = ('n', '_mean', '_m2')

    def __init__(self, values: Iterable[float] = ()):
        self.n = 0
        self._mean = 0.0
        self._m2 = 0.0
        self.extend(values)

    def push(self, value: float) -> None:
        self.n += 1
        delta = value - self._mean
        self._mean += delta / self.n
        self._m2 += delta * (value - self._mean)

    def extend(self, values: Iterable[float]) -> None:
        for value in values:
            self.push(float(value))

    @property
    def mean(self) -> float:
        if not self.n:
            raise InsufficientDataError('mean of no samples')
        return self._mean

    @property
    def variance(self) -> float:
        return self._m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def se(self) -> float:
        if not self.n:
            raise InsufficientDataError('standard error of no samples')
        return math.sqrt(self.variance / self.n)


def ratio_of_means(numerator: np.ndarray, denominator: np.ndarray) -> tuple[float, float]:
    """mean(a) / mean(b) and its delta-method standard error on paired samples."""
    a, b = RunningMoments(numerator), RunningMoments(denominator)
    if b.mean == 0.0:
        return math.nan, math.nan
    ratio = a.mean / b.mean
    n = a.n
    if n < 2:
        return ratio, 0.0
    covariance = float(np.cov(numerator, denominator, ddof=1)[0, 1])
    variance = (a.variance - 2.0 * ratio * covariance + ratio * ratio * b.variance) / (n * b.mean ** 2)
    return ratio, math.sqrt(max(variance, 0.0))


def regress(x: Sequence[float], y: Sequence[float]) -> Regression:
    """Ordinary least squares of y on x."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise InsufficientDataError(f'a regression needs at least 3 points, got {x.size}')
    fit = scipy_stats.linregress(x, y)
    return Regression(slope=float(fit.slope), intercept=float(fit.intercept), r_squared=float(fit.rvalue ** 2),
                      slope_se=float(fit.stderr), n=int(x.size))


def norm_relation(dirichlet_per_length, w1_hat, s: float = 1.0) -> NormRelation:
    """||D(h_*)/L||_s next to ||W1_hat||_{4s/3}^{4/3}."""
    lhs = orlicz_norm(dirichlet_per_length, s).nu_hat
    rhs = orlicz_norm(w1_hat, 4.0 * s / 3.0).nu_hat ** (4.0 / 3.0)
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 1.0 if lhs == 0 else math.inf
    return NormRelation(s=s, lhs=lhs, rhs=rhs, ratio=ratio)


# -- linearization ------------------------------------------------------------

def linearization_gap(h: HeightConfig, eps: float) -> LinearizationGap:
    """Gap between sum(sqrt(1 + z^2) - 1) and sum(z^2) / 2 for z = eps^(2/3) * increments of h."""
    if not eps > 0:
        raise DomainError(f'eps must be positive, got {eps}')
    slopes = eps ** (2.0 / 3.0) * np.diff(h.heights)
    squares = slopes * slopes
    quadratic = 0.5 * math.fsum(squares)
    if quadratic == 0.0:
        eta = 0.0
    else:
        # sqrt(1 + z^2) - 1 without cancellation
        area = math.fsum(squares / (np.sqrt(1.0 + squares) + 1.0))
        eta = min(max(1.0 - area / quadratic, 0.0), 1.0)
    return LinearizationGap(eps=eps, slopes=slopes, eta=eta)


def eps_for_target(L: int, target: float) -> float:
    """eps with eps^(4/3) ln L = target."""
    if L < 2 or target <= 0:
        raise DomainError(f'need L >= 2 and a positive target, got L={L}, target={target}')
    return (target / math.log(L)) ** 0.75


def linearization_medians(configs: Sequence[HeightConfig], L: int,
                          targets: Sequence[float] = LINEARIZATION_TARGETS) -> dict[float, float]:
    """target -> median eta over the configurations."""
    if not configs:
        raise InsufficientDataError('no configurations to linearize')
    return {target: float(np.median([linearization_gap(h, eps_for_target(L, target)).eta for h in configs]))
            for target in targets}


# -- comparison checks --------------------------------------------------------

def _energy(field: Potential, h: HeightConfig) -> float:
    return dirichlet(h) - field_term(field, h)


def submodularity_gap(field: Potential, h: HeightConfig, g: HeightConfig) -> float:
    """E(h) + E(g) - E(h max g) - E(h min g); nonnegative up to rounding."""
    if not h.same_span(g):
        raise DomainError('configurations live on different lattice intervals')
    upper = h.with_heights(np.maximum(h.heights, g.heights))
    lower = h.with_heights(np.minimum(h.heights, g.heights))
    return _energy(field, h) + _energy(field, g) - _energy(field, upper) - _energy(field, lower)


def _random_profile(rng: np.random.Generator, L: int, spread: float, resolution: float) -> HeightConfig:
    heights = np.round(rng.normal(0.0, spread, L + 1) / resolution) * resolution
    heights[0] = heights[-1] = 0.0
    return HeightConfig(heights=heights)


def comparison_suite(seeds: Sequence[int], L: int, trials: int, opts: MinimizeOptions | None = None,
                     resolution: float = DEFAULT_RESOLUTION) -> ComparisonCounts:
    """Count submodularity and order-preservation violations.

    Trial t uses the field of seeds[t % len(seeds)]. Order checks compare the
    minimizer for nonnegative boundary data against the zero-boundary one, and
    a pair of ordered boundary data against each other; both allow one grid step.
    """
    if trials < 1:
        raise DomainError('the comparison suite needs at least one trial')
    if not seeds:
        raise DomainError('the comparison suite needs at least one field seed')
    opts = opts or MinimizeOptions()
    delta = opts.grid_spacing
    rng = np.random.default_rng([int(seed) for seed in seeds])
    spread = math.sqrt(L)
    reach = int(spread / delta)

    fields = [PotentialField(int(seed), L, resolution) for seed in seeds]
    caches: list[dict] = [{} for _ in fields]
    baselines = [minimize(field, (0, L), 0.0, 0.0, opts, grid_cache=cache).config.heights
                 for field, cache in zip(fields, caches)]

    submodular = ordered = extended = 0
    worst_submodular = math.inf
    worst_order = math.inf
    for trial in range(trials):
        k = trial % len(fields)
        field, cache = fields[k], caches[k]

        h = _random_profile(rng, L, spread, resolution)
        g = _random_profile(rng, L, spread, resolution)
        gap = submodularity_gap(field, h, g)
        magnitude = 1.0 + dirichlet(h) + dirichlet(g) + mass(h) + mass(g)
        worst_submodular = min(worst_submodular, gap)
        if gap < -1e-9 * magnitude:
            submodular += 1

        a0, a1 = (delta * rng.integers(0, reach + 1, 2)).tolist()
        raised = minimize(field, (0, L), a0, a1, opts, grid_cache=cache).config.heights
        gap = float(np.min(raised - baselines[k]))
        worst_order = min(worst_order, gap)
        if gap < -delta:
            ordered += 1

        b = delta * rng.integers(-reach, reach + 1, 2)
        b_upper = b + delta * rng.integers(0, reach + 1, 2)
        low = minimize(field, (0, L), float(b[0]), float(b[1]), opts, grid_cache=cache).config.heights
        high = minimize(field, (0, L), float(b_upper[0]), float(b_upper[1]), opts, grid_cache=cache).config.heights
        gap = float(np.min(high - low))
        worst_order = min(worst_order, gap)
        if gap < -delta:
            extended += 1

    counts = ComparisonCounts(L=L, trials=trials, submodularity_violations=submodular,
                              order_violations=ordered, extended_order_violations=extended,
                              worst_submodularity_gap=worst_submodular, worst_order_gap=worst_order)
    if not counts.clean:
        logger.warning('comparison suite at L=%d: %d submodularity, %d order, %d extended order violations',
                       L, submodular, ordered, extended)
    return counts


def shear_invariance(seeds: Sequence[int], L: int, boundary: tuple[float, float],
                     opts: MinimizeOptions | None = None, resolution: float = DEFAULT_RESOLUTION,
                     level: float = SHEAR_LEVEL) -> ShearTest:
    """KS test of h_{h0,h1,*}(L/2) - (h0 + h1)/2 against h_{0,0,*}(L/2) over independent fields.

    Seed k drives the flat sample; splitmix64(k) drives the sheared one. The
    chord between the boundary values must hit the height grid at every site,
    so the shear maps the grid (and the band around the chord) onto itself.
    """
    if len(seeds) < 2:
        raise DomainError('the shear test needs at least two seeds')
    if L < 2 or L % 2:
        raise DomainError(f'the shear test needs an even L >= 2, got {L}')
    opts = opts or MinimizeOptions()
    h0, h1 = (float(value) for value in boundary)
    chord = (h0 + (h1 - h0) * np.arange(L + 1) / L) / opts.grid_spacing
    if np.any(np.abs(chord - np.rint(chord)) > 1e-9):
        raise DomainError(f'the chord from {h0} to {h1} leaves the grid of spacing {opts.grid_spacing}')

    flat, sheared = [], []
    for seed in seeds:
        state = minimize(PotentialField(int(seed), L, resolution), (0, L), 0.0, 0.0, opts)
        flat.append(state.midpoint_deviation())
        state = minimize(PotentialField(splitmix64(int(seed)), L, resolution), (0, L), h0, h1, opts)
        sheared.append(state.midpoint_deviation())
    test = scipy_stats.ks_2samp(flat, sheared)
    result = ShearTest(L=L, replicates=len(seeds), boundary=(h0, h1), statistic=float(test.statistic),
                       pvalue=float(test.pvalue), level=level, flat_mean=float(np.mean(flat)),
                       sheared_mean=float(np.mean(sheared)))
    if not result.passes:
        logger.warning('shear test at L=%d, boundary %s: KS p-value %.4g below %g',
                       L, boundary, result.pvalue, level)
    return result


# -- envelope -----------------------------------------------------------------

def envelope_stats(seeds: Sequence[int], scale: int, bin_centers: Sequence[tuple[float, float]],
                   opts: MinimizeOptions | None = None, resolution: float = DEFAULT_RESOLUTION,
                   bootstrap: int = 0) -> list[EnvelopeRow]:
    """Orlicz-3 norm of the envelope excursion per bin centre over independent fields."""
    if not seeds:
        raise DomainError('envelope statistics need at least one seed')
    opts = opts or MinimizeOptions()
    rows = []
    for center in bin_centers:
        excursions = [envelope_minimizers(PotentialField(int(seed), 2 * scale, resolution), (0, 2 * scale),
                                          center, opts)[2]
                      for seed in seeds]
        samples = SampleSet(values=excursions, label=f'envelope l={scale} center={center}')
        rows.append(EnvelopeRow(center=center, scale=scale, estimate=orlicz_norm(samples, 3.0, bootstrap=bootstrap)))
    return rows


# -- sweep aggregation --------------------------------------------------------

def modulus_stats(result: SweepResult, s: float = 2.0, bootstrap: int = 0) -> list[ModulusRow]:
    """Per (L, gap): Orlicz-s norm of |h_*(y) - h_*(x)| divided by gap (1 + ln^(4/3)(L / gap)).

    With `bootstrap` > 1 the normalized column uses the bias-corrected norm.
    """
    rows = []
    for L in result.sizes:
        records = result.at_size(L)
        gaps = sorted({int(gap) for record in records for gap in record.modulus})
        for gap in gaps:
            values = [float(v) for record in records for v in record.modulus.get(str(gap), [])]
            if not values:
                continue
            estimate = orlicz_norm(SampleSet(values=values, label=f'modulus L={L} gap={gap}'), s, bootstrap)
            normalized = estimate.value / (gap * (1.0 + math.log(L / gap) ** (4.0 / 3.0)))
            rows.append(ModulusRow(L=L, gap=gap, n=estimate.n, raw=estimate.nu_hat, norm=estimate.value,
                                   normalized=normalized))
    if not rows:
        raise InsufficientDataError('the sweep recorded no modulus samples')
    return rows


def _column(records: Sequence[SweepRecord], name: str) -> np.ndarray | None:
    values = [getattr(record, name) for record in records]
    if any(value is None for value in values):
        return None
    return np.asarray(values, dtype=np.float64)


def _jensen_holds(records: Sequence[SweepRecord]) -> bool | None:
    """(D(h_{>=l}) / L)^(p/2) <= D_p(h_{>=l}) / L record by record, for every recorded p >= 2."""
    checked = False
    for record in records:
        quadratic = record.coarse_scale_at(2.0)
        if not quadratic:
            return None
        for key in record.coarse_scale:
            p = float(key)
            if p < 2.0:
                continue
            for scale, value in record.coarse_scale_at(p).items():
                checked = True
                if quadratic[scale] ** (p / 2.0) > value * (1.0 + 1e-9) + 1e-12:
                    return False
    return True if checked else None


def _size_summary(L: int, records: Sequence[SweepRecord], bootstrap: int) -> SizeSummary:
    log_L = math.log(L)
    energies = _column(records, 'min_energy')
    dirichlets = _column(records, 'dirichlet')
    fields = _column(records, 'field')
    masses = _column(records, 'mass')
    midpoints = _column(records, 'midpoint')

    energy = RunningMoments(energies)
    per_length = RunningMoments(dirichlets / L)
    ratio_wd, ratio_wd_se = ratio_of_means(fields, dirichlets)
    summary = dict(
        L=L,
        replicates=len(records),
        mean_min_energy=energy.mean,
        se_min_energy=energy.se,
        c_L=-energy.mean / (L * log_L),
        c_L_se=energy.se / (L * log_L),
        alpha1=max(-energy.mean / (L * log_L), 0.0),
        alpha2=3.0 * per_length.mean / log_L,
        dirichlet_per_length=per_length.mean,
        dirichlet_se=per_length.se,
        ratio_wd=ratio_wd,
        ratio_wd_se=ratio_wd_se,
        jensen_ok=_jensen_holds(records),
    )

    norms = {
        'dirichlet_3/2': orlicz_norm(SampleSet(values=dirichlets / L, label='D/L'), 1.5, bootstrap),
        'mass_3': orlicz_norm(SampleSet(values=masses / L ** 2, label='M/L^2'), 3.0, bootstrap),
        'midpoint_3': orlicz_norm(SampleSet(values=midpoints / L, label='h(L/2)/L'), 3.0, bootstrap),
    }

    w1 = _column(records, 'w1_hat')
    if w1 is not None:
        mean_w1 = float(w1.mean())
        norms['w1_2'] = orlicz_norm(SampleSet(values=w1, label='W1_hat'), 2.0, bootstrap)
        summary['alpha3'] = (3.0 ** 0.75 / 4.0 * mean_w1 / log_L ** 0.75) ** (4.0 / 3.0)
        summary['norm_relation'] = norm_relation(dirichlets / L, w1, 1.0)
        summary['frontier'] = FrontierConsistency(
            predicted_dirichlet=(mean_w1 / 4.0) ** (4.0 / 3.0),
            measured_dirichlet=per_length.mean,
            predicted_field=0.25 ** (1.0 / 3.0) * mean_w1 ** (4.0 / 3.0),
            measured_field=float(fields.mean()) / L,
        )
    summary['norms'] = norms

    doubled = [record.frontier_energy(2.0) for record in records]
    single = [record.frontier_energy(1.0) for record in records]
    if None not in doubled and None not in single:
        ratio, spread = ratio_of_means(np.asarray(doubled), np.asarray(single))
        summary['scale_ratio'], summary['scale_ratio_se'] = ratio, spread

    dw = _column(records, 'dw_field')
    if dw is not None:
        moments = RunningMoments(dw / (L * log_L))
        summary['dw_per_LlnL'], summary['dw_se'] = moments.mean, moments.se

    if all(record.per_scale_at(2.0) for record in records):
        scales = sorted(records[0].per_scale_at(2.0))
        flatness = {scale: float(np.mean([record.per_scale_at(2.0)[scale] for record in records]))
                    for scale in scales}
        summary['flatness'] = flatness
        interior = [value for scale, value in flatness.items() if 2 <= scale <= L // 4]
        if interior and min(interior) > 0:
            summary['flatness_ratio'] = max(interior) / min(interior)

    flatness_by_p = {}
    for key in sorted(records[0].per_scale, key=float):
        p = float(key)
        if all(record.per_scale_at(p) for record in records):
            flatness_by_p[key] = {scale: float(np.mean([record.per_scale_at(p)[scale] for record in records]))
                                  for scale in sorted(records[0].per_scale_at(p))}
    summary['flatness_by_p'] = flatness_by_p

    if all(record.coarse_scale_at(2.0) for record in records):
        scales = sorted(records[0].coarse_scale_at(2.0))
        if len(scales) >= 3:
            means = [float(np.mean([record.coarse_scale_at(2.0)[scale] for record in records])) for scale in scales]
            summary['coarse_regression'] = regress([math.log(L / scale) for scale in scales], means)

    summary['frontier_extrapolated'] = sum(bool(record.w1_extrapolated) for record in records)
    competitor = _column(records, 'two_scale_energy')
    if competitor is not None:
        summary['two_scale'] = _two_scale_summary(records, competitor, energies)

    return SizeSummary(**summary)


def _two_scale_summary(records: Sequence[SweepRecord], competitor: np.ndarray,
                       minimum: np.ndarray) -> TwoScaleSummary:
    margins = competitor - minimum
    tolerance = TWO_SCALE_RTOL * np.maximum(1.0, np.abs(minimum))
    terms = {name: RunningMoments(_column(records, f'two_scale_{name}'))
             for name in ('binning', 'scaling', 'small')}
    return TwoScaleSummary(
        records=len(records),
        valid=int(np.count_nonzero(margins >= -tolerance)),
        worst_margin=float(margins.min()),
        mean_energy=float(competitor.mean()),
        binning=terms['binning'].mean, binning_se=terms['binning'].se,
        scaling=terms['scaling'].mean, scaling_se=terms['scaling'].se,
        small=terms['small'].mean, small_se=terms['small'].se,
    )


def _trend(name: str, sizes: Sequence[int], values: Sequence[float]) -> TrendGate | None:
    if len(sizes) < MIN_REPORT_SIZES:
        return None
    regression = regress([math.log(L) for L in sizes], values)
    return TrendGate(name=name, regression=regression, passes=regression.not_increasing)


def _superadditivity(per_size: dict[int, SizeSummary]) -> list[SuperadditivityRow]:
    rows = []
    for L in sorted(per_size):
        for scale in sorted(per_size):
            ratio = L // scale
            if scale < 2 or scale * scale > L or ratio * scale != L or ratio not in per_size:
                continue
            defect = (per_size[L].c_L * math.log(L) - per_size[scale].c_L * math.log(scale)
                      - per_size[ratio].c_L * math.log(ratio))
            spread = math.sqrt(math.log(ratio))
            rows.append(SuperadditivityRow(L=L, l=scale, defect=defect, scale=spread,
                                           constant=max(0.0, -defect / spread)))
    return rows


def scaling_report(result: SweepResult, bootstrap: int = BOOTSTRAP_RESAMPLES) -> ScalingReport:
    """Fold the sweep records into the scaling estimators."""
    sizes = result.sizes
    if len(sizes) < MIN_REPORT_SIZES:
        raise InsufficientDataError(f'a scaling report needs at least {MIN_REPORT_SIZES} system sizes, '
                                    f'got {len(sizes)}')
    if result.excluded:
        logger.warning('%d replicate(s) excluded from the report after band-cap failures', result.excluded)

    per_size = {L: _size_summary(L, result.at_size(L), bootstrap) for L in sizes}
    dirichlet_regression = regress([math.log(L) for L in sizes], [per_size[L].dirichlet_per_length for L in sizes])

    trends = [
        _trend('mass_3', sizes, [per_size[L].norms['mass_3'].value for L in sizes]),
        _trend('midpoint_3', sizes, [per_size[L].norms['midpoint_3'].value for L in sizes]),
    ]

    modulus: list[ModulusRow] = []
    if any(record.modulus for record in result.ok_records):
        modulus = modulus_stats(result, bootstrap=bootstrap)
        worst = {L: max(row.normalized for row in modulus if row.L == L) for L in sizes
                 if any(row.L == L for row in modulus)}
        trends.append(_trend('modulus', sorted(worst), [worst[L] for L in sorted(worst)]))

    dw_sizes = [L for L in sizes if per_size[L].dw_per_LlnL is not None]
    if len(dw_sizes) >= MIN_REPORT_SIZES:
        regression = regress([math.log(L) for L in dw_sizes], [per_size[L].dw_per_LlnL for L in dw_sizes])
        # the lower bound must not decay
        trends.append(TrendGate(name='dw_lower_bound', regression=regression,
                                passes=regression.slope >= -2.0 * regression.slope_se))

    superadditivity = _superadditivity(per_size)
    constant = max((row.constant for row in superadditivity), default=None)

    largest = sizes[-1]
    linearization: dict[str, float] = {}
    records = result.at_size(largest)
    if all(record.heights for record in records):
        configs = [HeightConfig(heights=record.heights) for record in records]
        linearization = {repr(target): eta for target, eta in linearization_medians(configs, largest).items()}

    two_scale_invalid = sum(row.two_scale.records - row.two_scale.valid
                            for row in per_size.values() if row.two_scale is not None)
    if two_scale_invalid:
        logger.warning('%d two-scale competitor(s) undercut the free minimum', two_scale_invalid)

    return ScalingReport(
        run_hash=result.run_hash,
        sizes=sizes,
        per_size=[per_size[L] for L in sizes],
        dirichlet_regression=dirichlet_regression,
        trends=[gate for gate in trends if gate is not None],
        superadditivity=superadditivity,
        superadditivity_constant=constant,
        modulus=modulus,
        linearization=linearization,
        excluded=result.excluded,
        frontier_extrapolated=sum(row.frontier_extrapolated for row in per_size.values()),
        two_scale_invalid=two_scale_invalid,
    )
