"""Haircuts that meet credit-risk criteria.

Every solver searches the smallest haircut satisfying a monotone
criterion.  Continuous objectives are first located with Brent's method and
then confirmed by a short bisection, so the returned value always satisfies
the criterion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Literal, Union

from scipy.optimize import brentq

from .errors import DomainError, InputError, UnattainableTargetError
from .levy import JumpDiffusionModel
from .loss import LossSetup, expected_loss, loss_tail_prob, put_moneyness
from .transform import InversionConfig, TransformKind, stabilized_invert

H_MAX = 1.0 - 1e-9
H_TOL = 1e-9


def _in_unit(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class FirstLossPD:
    p: float

    def __post_init__(self):
        _in_unit("p", self.p)


@dataclass(frozen=True)
class ExpectedLoss:
    L0: float

    def __post_init__(self):
        _in_unit("L0", self.L0)


@dataclass(frozen=True)
class ValueAtRisk:
    q: float

    def __post_init__(self):
        _in_unit("q", self.q)


@dataclass(frozen=True)
class ExpectedShortfall:
    q: float

    def __post_init__(self):
        _in_unit("q", self.q)


@dataclass(frozen=True)
class EconomicCapital:
    C0: float
    measure: Literal["VAR", "ES"] = "VAR"
    q: float = 0.999

    def __post_init__(self):
        _in_unit("C0", self.C0)
        _in_unit("q", self.q)
        if self.measure not in ("VAR", "ES"):
            raise DomainError(f"measure must be 'VAR' or 'ES', got {self.measure!r}")


HaircutCriterion = Union[FirstLossPD, ExpectedLoss, ValueAtRisk, ExpectedShortfall, EconomicCapital]


def smallest_satisfying(
    ok: Callable[[float], bool],
    lo: float = 0.0,
    hi: float = H_MAX,
    tol: float = H_TOL,
    what: str = "criterion",
) -> float:
    """Smallest h in [lo, hi] with ok(h), assuming ok is monotone (False then True)."""
    if ok(lo):
        return lo
    if not ok(hi):
        raise UnattainableTargetError(f"{what} not met even at haircut {hi!r}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def smallest_below(
    f: Callable[[float], float],
    target: float,
    lo: float = 0.0,
    hi: float = H_MAX,
    tol: float = H_TOL,
    what: str = "criterion",
    log_scale: bool = True,
) -> float:
    """Smallest h in [lo, hi] with f(h) <= target for a nonincreasing f.

    Brent's method finds the crossing (on log f when ``log_scale``), then
    bisection on a few-tol bracket around it returns a satisfying point.
    Falls back to plain bisection if the bracket check disagrees, e.g. when
    f is noisy at the 1e-9 level.
    """
    ok = lambda h: f(h) <= target  # noqa: E731
    if log_scale:
        log_target = math.log(target)
        y = lambda h: math.log(max(f(h), 1e-300)) - log_target  # noqa: E731
    else:
        y = lambda h: f(h) - target  # noqa: E731
    y_lo = y(lo)
    if y_lo <= 0:
        return lo
    if y(hi) > 0:
        raise UnattainableTargetError(f"{what} not met even at haircut {hi!r}")
    root = brentq(y, lo, hi, xtol=tol / 4, rtol=1e-15)
    a, b = max(lo, root - tol), min(hi, root + tol)
    if not ok(a) and ok(b):
        return smallest_satisfying(ok, a, b, tol / 2, what)
    return smallest_satisfying(ok, lo, hi, tol, what)


def haircut_first_loss(
    model: JumpDiffusionModel,
    setup: LossSetup,
    p_target: float,
    config: InversionConfig | None = None,
    bracket: tuple[float, float] = (0.0, H_MAX),
) -> float:
    """Smallest h with Pr(L > 0) <= p_target."""
    _in_unit("p_target", p_target)
    return smallest_below(
        lambda h: loss_tail_prob(model, setup, h, 0.0, config),
        p_target,
        *bracket,
        what=f"first-loss probability {p_target:g}",
    )


def value_at_risk(model: JumpDiffusionModel, setup: LossSetup, q: float, config: InversionConfig | None = None) -> float:
    """q-quantile of the price decline y = 1 - B_u/B_0 (liquidity discount ignored)."""
    _in_unit("q", q)
    return haircut_first_loss(model, setup.with_discount(0.0), 1.0 - q, config)


def expected_shortfall(model: JumpDiffusionModel, setup: LossSetup, q: float, config: InversionConfig | None = None) -> float:
    """E[y | y > VaR_q] = VaR_q + E[(y - VaR_q)^+] / (1 - q)."""
    var = value_at_risk(model, setup, q, config)
    k = -math.log(1.0 - var)
    excess = stabilized_invert(TransformKind.PUT, model, setup.horizon, k, config).value
    return var + excess / (1.0 - q)


def haircut_expected_loss(
    model: JumpDiffusionModel,
    setup: LossSetup,
    L0: float,
    config: InversionConfig | None = None,
    bracket: tuple[float, float] = (0.0, H_MAX),
) -> float:
    """Smallest h with E[L | h] <= L0."""
    _in_unit("L0", L0)
    return smallest_below(
        lambda h: expected_loss(model, setup, h, config),
        L0,
        *bracket,
        what=f"expected loss {L0:g}",
    )


def loss_quantile(
    model: JumpDiffusionModel,
    setup: LossSetup,
    h: float,
    q: float,
    config: InversionConfig | None = None,
) -> float:
    """q-quantile of L given h, by bisection on the loss level b."""
    _in_unit("q", q)
    tail = 1.0 - q
    return smallest_below(
        lambda b: loss_tail_prob(model, setup, h, b, config),
        tail,
        0.0,
        1.0 - h,
        what="loss quantile",
    )


def _loss_tail_measures(model, setup, h, q, h_star, config):
    """(VaR_q, ES_q, E[L]) of the loss at haircut h.

    Uses the translation property P_{b|h} = P_{0|h+b}: the loss quantile is
    (h* - h)^+ where h* is the first-loss haircut at tail probability 1 - q.
    """
    g = setup.g
    el = expected_loss(model, setup, h, config)
    var = max(0.0, h_star - h)
    if var > 0:
        k = put_moneyness(h + var, g)
        tail_put = (1.0 - g) * stabilized_invert(TransformKind.PUT, model, setup.horizon, k, config).value
        es = var + tail_put / (1.0 - q)
    else:
        es = el / (1.0 - q)
    return var, es, el


def economic_capital(model, setup, h, measure: str = "VAR", q: float = 0.999, config=None, h_star=None) -> float:
    """VaR_q(L|h) - E[L|h] or ES_q(L|h) - E[L|h]."""
    if h_star is None:
        h_star = haircut_first_loss(model, setup, 1.0 - q, config)
    var, es, el = _loss_tail_measures(model, setup, h, q, h_star, config)
    return (var if measure == "VAR" else es) - el


def haircut_economic_capital(
    model: JumpDiffusionModel,
    setup: LossSetup,
    C0: float,
    measure: str = "VAR",
    q: float = 0.999,
    config: InversionConfig | None = None,
    bracket: tuple[float, float] = (0.0, H_MAX),
) -> float:
    """Smallest h whose economic capital (VaR or ES minus EL) is at most C0."""
    if not C0 > 0:
        raise DomainError(f"C0 must be > 0, got {C0!r}")
    _in_unit("q", q)
    measure = measure.upper()
    if measure not in ("VAR", "ES"):
        raise DomainError(f"measure must be 'VAR' or 'ES', got {measure!r}")
    h_star = haircut_first_loss(model, setup, 1.0 - q, config)
    return smallest_below(
        lambda h: economic_capital(model, setup, h, measure, q, config, h_star),
        C0,
        *bracket,
        what=f"economic capital {C0:g}",
        log_scale=False,
    )


def solve_haircut(
    model: JumpDiffusionModel,
    setup: LossSetup,
    criterion: HaircutCriterion,
    config: InversionConfig | None = None,
) -> float:
    if isinstance(criterion, FirstLossPD):
        return haircut_first_loss(model, setup, criterion.p, config)
    if isinstance(criterion, ExpectedLoss):
        return haircut_expected_loss(model, setup, criterion.L0, config)
    if isinstance(criterion, ValueAtRisk):
        return value_at_risk(model, setup, criterion.q, config)
    if isinstance(criterion, ExpectedShortfall):
        return expected_shortfall(model, setup, criterion.q, config)
    if isinstance(criterion, EconomicCapital):
        return haircut_economic_capital(model, setup, criterion.C0, criterion.measure, criterion.q, config)
    raise TypeError(f"unknown criterion {criterion!r}")


# -- rating targets -------------------------------------------------------------

RateKind = Literal["EL", "PD"]


@dataclass(frozen=True)
class RatingTarget:
    rating: str
    rate: float
    kind: RateKind


@dataclass(frozen=True)
class RatingTargetTable:
    entries: tuple[RatingTarget, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        prev = 0.0
        for e in self.entries:
            if not 0.0 < e.rate < 1.0:
                raise InputError(f"rating {e.rating}: rate {e.rate!r} outside (0, 1)")
            if e.kind not in ("EL", "PD"):
                raise InputError(f"rating {e.rating}: kind must be EL or PD, got {e.kind!r}")
            if e.rate <= prev:
                raise InputError(f"rating {e.rating}: rates must strictly increase down the scale")
            prev = e.rate

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def head(self, n: int) -> "RatingTargetTable":
        return RatingTargetTable(self.entries[:n])

    def select(self, *ratings: str) -> "RatingTargetTable":
        by_name = {e.rating: e for e in self.entries}
        missing = [r for r in ratings if r not in by_name]
        if missing:
            raise InputError(f"unknown ratings {missing}")
        return RatingTargetTable(tuple(by_name[r] for r in ratings))

    @property
    def ratings(self) -> list[str]:
        return [e.rating for e in self.entries]


BUILTIN_TABLES = ("moodys_ig", "sp_ig")


def _parse_table(lines, source: str) -> RatingTargetTable:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["rating", "rate", "kind"]:
        raise InputError(f"{source}: header must be 'rating,rate,kind'")
    entries = []
    for lineno, row in enumerate(reader, start=2):
        if not row or row[0].startswith("#"):
            continue
        if len(row) != 3:
            raise InputError(f"{source} line {lineno}: expected 3 fields, got {len(row)}")
        try:
            rate = float(row[1])
        except ValueError as exc:
            raise InputError(f"{source} line {lineno}: bad rate {row[1]!r}") from exc
        entries.append(RatingTarget(row[0].strip(), rate, row[2].strip().upper()))
    return RatingTargetTable(tuple(entries))


def load_rating_table(name_or_path: str | Path) -> RatingTargetTable:
    """Load a packaged table (``moodys_ig``, ``sp_ig``) or a CSV file."""
    if str(name_or_path) in BUILTIN_TABLES:
        text = resources.files("haircut").joinpath("data").joinpath(f"{name_or_path}.csv").read_text(encoding="utf-8")
        return _parse_table(text.splitlines(), str(name_or_path))
    path = Path(name_or_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read rating table {path}: {exc}") from exc
    return _parse_table(text.splitlines(), str(path))


def haircut_table(
    model: JumpDiffusionModel,
    setup: LossSetup,
    targets: RatingTargetTable,
    kind: RateKind | None = None,
    config: InversionConfig | None = None,
) -> list[tuple[str, float]]:
    """One haircut per rating; EL rates use h_EL, PD rates use h_p."""
    rows = []
    for entry in targets:
        use = kind or entry.kind
        if use == "EL":
            h = haircut_expected_loss(model, setup, entry.rate, config)
        else:
            h = haircut_first_loss(model, setup, entry.rate, config)
        rows.append((entry.rating, h))
    return rows
