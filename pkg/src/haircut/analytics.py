"""Haircut sensitivities, liquidity add-ons and data-driven VaR/ES haircuts."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, ModelError
from .levy import DejdParams
from .loss import LossSetup
from .solver import RatingTarget, RatingTargetTable, haircut_expected_loss, haircut_first_loss, haircut_table
from .transform import InversionConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParameterShift:
    """Additive shift of one parameter, in that parameter's own units."""

    target: str
    delta: float

    def __post_init__(self):
        if self.target not in DejdParams.FIELDS:
            raise InputError(f"unknown shift target {self.target!r}; expected one of {DejdParams.FIELDS}")
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def label(self) -> str:
        return f"{self.target}{self.delta:+g}"

    def apply(self, params: DejdParams) -> DejdParams:
        try:
            return params.shifted(**{self.target: self.delta})
        except ModelError as exc:
            raise ModelError(exc.field, f"shift {self.label} gives an invalid model: {exc}") from exc


# the one-at-a-time bumps of a standard sensitivity report
STANDARD_SHIFTS = (
    ParameterShift("mu", 0.01),
    ParameterShift("sigma_a", 0.01),
    ParameterShift("lambda_up", -1.0),
    ParameterShift("lambda_down", 1.0),
    ParameterShift("eta_up", 10.0),
    ParameterShift("eta_down", -10.0),
)


def read_shifts_csv(path: str | Path) -> list[ParameterShift]:
    """Read ``parameter,delta`` rows."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != ["parameter", "delta"]:
        raise InputError(f"{path} line 1: header must be 'parameter,delta'")
    shifts = []
    for row in reader:
        if not row or row[0].startswith("#"):
            continue
        line = reader.line_num
        if len(row) != 2:
            raise InputError(f"{path} line {line}: expected 2 fields, got {len(row)}")
        try:
            delta = float(row[1])
        except ValueError as exc:
            raise InputError(f"{path} line {line}: bad delta {row[1]!r}") from exc
        try:
            shifts.append(ParameterShift(row[0].strip(), delta))
        except InputError as exc:
            raise InputError(f"{path} line {line}: {exc}") from exc
    return shifts


@dataclass(frozen=True)
class SensitivityTable:
    ratings: tuple[str, ...]
    base: tuple[float, ...]
    shifts: tuple[ParameterShift, ...]
    deltas_pct: np.ndarray  # (shift, rating), percentage points

    def rows(self):
        for shift, row in zip(self.shifts, self.deltas_pct):
            yield shift.label, row


def sensitivity_table(
    params: DejdParams,
    setup: LossSetup,
    targets: RatingTargetTable,
    shifts: Sequence[ParameterShift] = STANDARD_SHIFTS,
    config: InversionConfig | None = None,
) -> SensitivityTable:
    """Haircut under each shifted model minus the base haircut, in percentage points.

    All ratings use the expected-loss criterion.
    """
    shifted = [s.apply(params) for s in shifts]  # validate every shift before any solving
    base = [h for _, h in haircut_table(params.to_model(), setup, targets, "EL", config)]
    deltas = np.empty((len(shifts), len(targets)))
    for i, p in enumerate(shifted):
        hs = [h for _, h in haircut_table(p.to_model(), setup, targets, "EL", config)]
        deltas[i] = 100.0 * (np.asarray(hs) - np.asarray(base))
    return SensitivityTable(tuple(targets.ratings), tuple(base), tuple(shifts), deltas)


def _haircut_for(model, setup, target: RatingTarget, config):
    if target.kind == "EL":
        return haircut_expected_loss(model, setup, target.rate, config)
    return haircut_first_loss(model, setup, target.rate, config)


def liquidity_haircut_delta(
    params: DejdParams,
    setup: LossSetup,
    target: RatingTarget,
    g_values: Sequence[float],
    config: InversionConfig | None = None,
) -> list[float]:
    """Haircut at each liquidity discount g minus the haircut at g = 0 (fractions)."""
    for g in g_values:
        if not 0.0 <= g < 1.0:
            raise InputError(f"liquidity discount must lie in [0, 1), got {g!r}")
    model = params.to_model()
    base = _haircut_for(model, setup.with_discount(0.0), target, config)
    return [
        0.0 if g == 0 else _haircut_for(model, setup.with_discount(g), target, config) - base for g in g_values
    ]


@dataclass(frozen=True)
class EmpiricalHaircuts:
    var: float
    es: float
    n_windows: int
    horizon_days: int
    q_var: float
    q_es: float
    diagnostics: tuple[str, ...] = field(default_factory=tuple)


def empirical_var_es(
    prices: Sequence[float],
    horizon_days: int = 10,
    q_var: float = 0.99,
    q_es: float = 0.975,
    min_obs: int = 250,
) -> EmpiricalHaircuts:
    """Raw haircuts from overlapping ``horizon_days`` price declines.

    Declines are y_i = 1 - P[i+h]/P[i].  VaR is the linearly interpolated
    ``q_var`` quantile of y.  ES is the mean of the y beyond the ``q_es``
    quantile.  Both are floored at 0, with a diagnostic when the floor binds.
    """
    p = np.asarray(prices, dtype=float)
    if horizon_days < 1:
        raise InputError(f"horizon must be >= 1 day, got {horizon_days!r}")
    for name, q in (("q_var", q_var), ("q_es", q_es)):
        if not 0.0 < q < 1.0:
            raise InputError(f"{name} must lie in (0, 1), got {q!r}")
    if p.size < horizon_days + min_obs:
        raise InputError(f"need at least {horizon_days + min_obs} prices, got {p.size}")
    if not np.all(np.isfinite(p) & (p > 0)):
        raise InputError("prices must be positive and finite")
    y = 1.0 - p[horizon_days:] / p[:-horizon_days]
    notes = ["declines use overlapping windows, so they are autocorrelated"]
    var = float(np.quantile(y, q_var, method="linear"))
    cut = float(np.quantile(y, q_es, method="linear"))
    tail = y[y > cut]
    es = float(tail.mean()) if tail.size else cut
    if var < 0:
        notes.append(f"VaR {var:.6g} is negative (no material declines); floored at 0")
        var = 0.0
    if es < 0:
        notes.append(f"ES {es:.6g} is negative; floored at 0")
        es = 0.0
    return EmpiricalHaircuts(var, es, int(y.size), horizon_days, q_var, q_es, tuple(notes))
