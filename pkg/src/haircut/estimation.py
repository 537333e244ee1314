"""Maximum-likelihood estimation of double-exponential jump-diffusion models.

Densities come from inverting the pdf transform.  Estimation is staged:

* 4p fixes the drift and volatility at the sample moments and fits the jumps;
* 5p also frees the volatility, warm-started from 4p;
* 6p frees everything, warm-started from 5p.

Each stage is a bounded Nelder-Mead search on the negative log-likelihood.
Because the best simplex vertex never worsens, warm starts make the stage
log-likelihoods nondecreasing.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy import optimize, stats

from .errors import DomainError, EstimationError, InputError, InversionError, ModelError
from .levy import DejdParams, Moments, cumulants
from .transform import InversionConfig, TransformKind, _invert_batch, stabilized_invert_many

log = logging.getLogger(__name__)

DAILY = 1.0 / 252.0
MIN_OBSERVATIONS = 250
DENSITY_FLOOR = 1e-300
MAX_FAILURE_RATE = 1e-3
LIKELIHOOD_CONFIG = InversionConfig(target_rel_error=1e-7)
MAX_EVALUATIONS = 2000
REL_OBJECTIVE_TOL = 1e-8

# box constraints, annualized, in DejdParams field order
BOUNDS = {
    "mu": (-5.0, 5.0),
    "sigma_a": (1e-4, 5.0),
    "lambda_up": (0.0, 500.0),
    "lambda_down": (0.0, 500.0),
    "eta_up": (1.0 + 1e-6, 2000.0),
    "eta_down": (1e-3, 2000.0),
}

Stage = Literal["4p", "5p", "6p"]
STAGE_FREE = {
    "4p": ("lambda_up", "lambda_down", "eta_up", "eta_down"),
    "5p": ("sigma_a", "lambda_up", "lambda_down", "eta_up", "eta_down"),
    "6p": DejdParams.FIELDS,
}


# -- data ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReturnSeries:
    """Log returns, optionally dated by the closing date of each period."""

    returns: np.ndarray
    dates: tuple[date, ...] | None = None
    dt: float = DAILY

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float).ravel()
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        if not np.all(np.isfinite(r)):
            i = int(np.flatnonzero(~np.isfinite(r))[0])
            raise InputError(f"return {i} is not finite")
        if not self.dt > 0:
            raise InputError(f"dt must be positive, got {self.dt!r}")
        if self.dates is not None:
            dates = tuple(self.dates)
            object.__setattr__(self, "dates", dates)
            if len(dates) != r.size:
                raise InputError(f"{len(dates)} dates for {r.size} returns")
            for i in range(1, len(dates)):
                if not dates[i] > dates[i - 1]:
                    raise InputError(f"dates must be strictly increasing: {dates[i]} follows {dates[i - 1]}")

    def __len__(self) -> int:
        return self.returns.size

    @classmethod
    def from_prices(cls, prices: Sequence[float], dates: Sequence[date] | None = None, dt: float = DAILY) -> "ReturnSeries":
        p = np.asarray(prices, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise InputError("need at least two prices")
        if not np.all(np.isfinite(p) & (p > 0)):
            i = int(np.flatnonzero(~(np.isfinite(p) & (p > 0)))[0])
            raise InputError(f"price {i} must be positive and finite, got {p[i]!r}")
        return cls(np.diff(np.log(p)), None if dates is None else tuple(dates)[1:], dt)

    def window(self, start: date, end: date) -> "ReturnSeries":
        """Returns dated in [start, end)."""
        if self.dates is None:
            raise InputError("windowing needs dated returns")
        d = np.array(self.dates, dtype="datetime64[D]")
        sel = (d >= np.datetime64(start)) & (d < np.datetime64(end))
        return ReturnSeries(self.returns[sel], tuple(np.asarray(self.dates, dtype=object)[sel]), self.dt)


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[date, ...]
    prices: np.ndarray

    def returns(self, dt: float = DAILY) -> ReturnSeries:
        return ReturnSeries.from_prices(self.prices, self.dates, dt)


def read_price_csv(path: str | Path) -> PriceSeries:
    """Read a ``date,price`` CSV with ISO dates and positive prices.

    Errors name the file and the 1-based line number.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    dates: list[date] = []
    prices: list[float] = []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "price"]:
            raise InputError(f"{path} line 1: header must be 'date,price'")
        for row in reader:
            line = reader.line_num
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise InputError(f"{path} line {line}: expected 2 fields, got {len(row)}")
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise InputError(f"{path} line {line}: bad date {row[0]!r}") from exc
            try:
                p = float(row[1])
            except ValueError as exc:
                raise InputError(f"{path} line {line}: bad price {row[1]!r}") from exc
            if not (math.isfinite(p) and p > 0):
                raise InputError(f"{path} line {line}: price must be positive, got {row[1]!r}")
            if dates and not d > dates[-1]:
                raise InputError(f"{path} line {line}: date {d} does not follow {dates[-1]} (dates must increase)")
            dates.append(d)
            prices.append(p)
    if len(prices) < 2:
        raise InputError(f"{path}: need at least two price rows")
    return PriceSeries(tuple(dates), np.asarray(prices))


# -- sample statistics --------------------------------------------------------


@dataclass(frozen=True)
class SampleStats:
    n: int
    mean: float
    stdev: float
    skewness: float
    kurtosis: float
    mean_annual: float
    stdev_annual: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def sample_stats(series: ReturnSeries) -> SampleStats:
    """Moment estimates; skewness and (non-excess) kurtosis are population moments."""
    x = series.returns
    if x.size < 4:
        raise InputError(f"need at least 4 returns, got {x.size}")
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise InputError("returns have zero variance; skewness and kurtosis are undefined")
    mean = float(np.mean(x))
    return SampleStats(
        n=int(x.size),
        mean=mean,
        stdev=sd,
        skewness=float(stats.skew(x)),
        kurtosis=float(stats.kurtosis(x, fisher=False)),
        mean_annual=mean / series.dt,
        stdev_annual=sd / math.sqrt(series.dt),
    )


# -- likelihood ---------------------------------------------------------------


def _densities(model, dt, x, config):
    """pdf at every x with one shift constant chosen on the extreme and median points."""
    probe = np.unique([x.min(), float(np.median(x)), x.max()])
    _, c_used, _ = stabilized_invert_many(TransformKind.PDF, model, dt, probe, config)
    batch = _invert_batch(TransformKind.PDF, model, dt, x, config, shift_C=float(c_used.max()))
    return batch.values


def _densities_one_by_one(model, dt, x, config):
    out = np.empty(x.size)
    failures = 0
    for i, xi in enumerate(x):
        try:
            out[i] = stabilized_invert_many(TransformKind.PDF, model, dt, [xi], config)[0][0]
        except InversionError:
            out[i] = DENSITY_FLOOR
            failures += 1
    return out, failures


def log_likelihood(
    params: DejdParams,
    series: ReturnSeries,
    config: InversionConfig = LIKELIHOOD_CONFIG,
    max_failure_rate: float = MAX_FAILURE_RATE,
) -> float:
    """Sum of log densities of the returns over one period ``series.dt``.

    Densities are floored at 1e-300.  Observations whose inversion fails are
    counted; more than ``max_failure_rate`` of them raises EstimationError.
    """
    model = params.to_model()
    x = series.returns
    if x.size == 0:
        raise InputError("empty return series")
    try:
        dens = _densities(model, series.dt, x, config)
        failures = 0
    except InversionError:
        dens, failures = _densities_one_by_one(model, series.dt, x, config)
        if failures:
            log.warning("pdf inversion failed for %d of %d observations", failures, x.size)
        if failures > max_failure_rate * x.size:
            raise EstimationError(f"pdf inversion failed for {failures} of {x.size} observations")
    return float(np.sum(np.log(np.maximum(dens, DENSITY_FLOOR))))


# -- staged estimation --------------------------------------------------------


@dataclass(frozen=True)
class EstimationResult:
    params: DejdParams
    log_likelihood: float
    stage: Stage
    converged: bool
    iterations: int
    evaluations: int
    sample_stats: SampleStats
    message: str = ""

    def model_moments(self, dt: float = DAILY) -> Moments:
        return cumulants(self.params.to_model(), dt)

    def to_dict(self, dt: float = DAILY) -> dict:
        mm = self.model_moments(dt)
        return {
            "stage": self.stage,
            "params": dict(zip(DejdParams.FIELDS, self.params.as_tuple())),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "message": self.message,
            "model_moments": {"skewness": mm.skewness, "kurtosis": mm.kurtosis},
            "sample_stats": self.sample_stats.to_dict(),
        }


def _clip_into_bounds(params: DejdParams, free: Sequence[str]) -> DejdParams:
    values = {f: getattr(params, f) for f in DejdParams.FIELDS}
    for f in free:
        lo, hi = BOUNDS[f]
        values[f] = min(max(values[f], lo), hi)
    return DejdParams(**values)


def fit_stage(
    series: ReturnSeries,
    stage: Stage,
    start: DejdParams,
    config: InversionConfig = LIKELIHOOD_CONFIG,
    max_evaluations: int = MAX_EVALUATIONS,
    stats_: SampleStats | None = None,
) -> EstimationResult:
    """Maximize the likelihood over the stage's free parameters from ``start``."""
    free = STAGE_FREE[stage]
    start = _clip_into_bounds(start, free)
    fixed = {f: getattr(start, f) for f in DejdParams.FIELDS}

    def build(theta) -> DejdParams:
        vals = dict(fixed)
        vals.update(zip(free, (float(v) for v in theta)))
        return DejdParams(**vals)

    def objective(theta) -> float:
        try:
            return -log_likelihood(build(theta), series, config)
        except (ModelError, DomainError, InversionError, EstimationError):
            return math.inf

    x0 = np.array([fixed[f] for f in free])
    f0 = objective(x0)
    if not math.isfinite(f0):
        raise EstimationError(f"{stage}: log-likelihood is not finite at the starting point {start}")
    res = optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        bounds=[BOUNDS[f] for f in free],
        options={
            "maxfev": max_evaluations,
            "maxiter": max_evaluations,
            "fatol": REL_OBJECTIVE_TOL * max(abs(f0), 1.0),
            "xatol": math.inf,  # stop on the objective change alone
        },
    )
    best, f_best = (res.x, float(res.fun)) if res.fun <= f0 else (x0, f0)
    return EstimationResult(
        params=build(best),
        log_likelihood=-f_best,
        stage=stage,
        converged=bool(res.success),
        iterations=int(res.nit),
        evaluations=int(res.nfev),
        sample_stats=stats_ or sample_stats(series),
        message=str(res.message),
    )


def initial_params(stats_: SampleStats) -> DejdParams:
    """Sample drift and volatility with ten jumps a year each way, mean size half a daily stdev."""
    eta = max(1.0 / (2.0 * stats_.stdev), 1.0 + 1e-3)
    return DejdParams(stats_.mean_annual, stats_.stdev_annual, 10.0, 10.0, eta, eta)


def _check_length(series: ReturnSeries, min_obs: int) -> None:
    if len(series) < min_obs:
        raise InputError(f"need at least {min_obs} returns for estimation, got {len(series)}")


def estimate_staged(
    series: ReturnSeries,
    config: InversionConfig = LIKELIHOOD_CONFIG,
    max_evaluations: int = MAX_EVALUATIONS,
    min_obs: int = MIN_OBSERVATIONS,
) -> tuple[EstimationResult, EstimationResult, EstimationResult]:
    """The 4p, 5p and 6p fits, each warm-started from the previous one."""
    _check_length(series, min_obs)
    st = sample_stats(series)
    r4 = fit_stage(series, "4p", initial_params(st), config, max_evaluations, st)
    r5 = fit_stage(series, "5p", r4.params, config, max_evaluations, st)
    r6 = fit_stage(series, "6p", r5.params, config, max_evaluations, st)
    for r in (r4, r5, r6):
        if not r.converged:
            log.warning("stage %s did not converge: %s", r.stage, r.message)
    return r4, r5, r6


# -- rolling estimation -------------------------------------------------------


@dataclass(frozen=True)
class RollingWindow:
    as_of: date
    window_start: date
    result: EstimationResult


@dataclass
class RollingResult:
    windows: list[RollingWindow] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def quarter_starts(first: date, last: date) -> list[date]:
    """First days of the calendar quarters in [first, last]."""
    q_month = 3 * ((first.month - 1) // 3) + 1
    d = date(first.year, q_month, 1)
    if d < first:
        d = _add_months(d, 3)
    out = []
    while d <= last:
        out.append(d)
        d = _add_months(d, 3)
    return out


def _add_months(d: date, months: int) -> date:
    m = d.month - 1 + months
    return date(d.year + m // 12, m % 12 + 1, 1)


def _years_before(d: date, years: int) -> date:
    try:
        return d.replace(year=d.year - years)
    except ValueError:  # 29 February
        return d.replace(year=d.year - years, day=28)


def _years_after(d: date, years: int) -> date:
    return _years_before(d, -years)


def rolling_estimate(
    prices: PriceSeries,
    window_years: int = 5,
    start: date | None = None,
    end: date | None = None,
    dt: float = DAILY,
    config: InversionConfig = LIKELIHOOD_CONFIG,
    max_evaluations: int = MAX_EVALUATIONS,
    min_obs: int = MIN_OBSERVATIONS,
) -> RollingResult:
    """A 6p fit at every quarter start on the trailing ``window_years`` of returns.

    The first usable window runs the full staged procedure; later windows
    warm-start the 6p search from the previous window's estimate.  Windows
    that are too short or degenerate are skipped with a notice.
    """
    if window_years < 1:
        raise InputError(f"window_years must be >= 1, got {window_years!r}")
    series = prices.returns(dt)
    # by default the first window is the first quarter start with a full window behind it
    lo = start or _years_after(prices.dates[0], window_years)
    hi = end or prices.dates[-1]
    out = RollingResult()
    previous: DejdParams | None = None
    for as_of in quarter_starts(lo, hi):
        begin = _years_before(as_of, window_years)
        if begin < prices.dates[0]:
            out.skipped.append(f"{as_of}: window starting {begin} precedes the data")
            continue
        win = series.window(begin, as_of)
        try:
            _check_length(win, min_obs)
            st = sample_stats(win)
            if previous is None:
                result = estimate_staged(win, config, max_evaluations, min_obs)[2]
            else:
                result = fit_stage(win, "6p", previous, config, max_evaluations, st)
        except (InputError, EstimationError) as exc:
            out.skipped.append(f"{as_of}: skipped ({exc})")
            log.info("rolling window %s skipped: %s", as_of, exc)
            continue
        previous = result.params
        out.windows.append(RollingWindow(as_of, begin, result))
    return out
