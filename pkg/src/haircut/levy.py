"""Jump-diffusion model of collateral log returns.

The log return over a horizon ``t`` (in years) is

    X_t = mu*t + sigma_a*W_t + sum_{j<=N_t} Y_j

with ``N_t`` Poisson of intensity ``lam`` and jump sizes drawn from a
mixed-exponential law: with probability ``p_up`` an up jump from the ``up``
mixture, otherwise a down jump from the ``down`` mixture.  Singleton
mixtures give the double-exponential (Kou) model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DomainError, InputError, ModelError

POLE_TOLERANCE = 1e-10
WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TimeConvention:
    trading_days_per_year: int = 252

    def __post_init__(self):
        if int(self.trading_days_per_year) != self.trading_days_per_year or self.trading_days_per_year <= 0:
            raise ModelError("trading_days_per_year", "must be a positive integer")

    def years(self, days: float) -> float:
        return days / self.trading_days_per_year


@dataclass(frozen=True)
class JumpMixture:
    """Mixture of exponentials: weights (summing to one) and positive rates."""

    weights: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in np.atleast_1d(self.weights)))
        object.__setattr__(self, "rates", tuple(float(r) for r in np.atleast_1d(self.rates)))

    @classmethod
    def single(cls, rate: float) -> "JumpMixture":
        return cls((1.0,), (rate,))

    def check(self, name: str) -> None:
        if len(self.weights) == 0 or len(self.weights) != len(self.rates):
            raise ModelError(f"{name}.weights", "weights and rates must have equal, nonzero length")
        for r in self.rates:
            if not (r > 0 and math.isfinite(r)):
                raise ModelError(f"{name}.rates", f"nonpositive or non-finite rate {r!r}")
        if not all(math.isfinite(w) for w in self.weights):
            raise ModelError(f"{name}.weights", "non-finite weight")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ModelError(f"{name}.weights", f"weights sum to {total!r}, not 1")

    def moment(self, n: int) -> float:
        """E[Z^n] for Z drawn from this mixture (Z >= 0)."""
        fact = math.factorial(n)
        return math.fsum(w * fact / r**n for w, r in zip(self.weights, self.rates))

    @property
    def min_rate(self) -> float:
        return min(self.rates)


@dataclass(frozen=True)
class JumpDiffusionModel:
    """Mixed-exponential jump-diffusion with annualized parameters.

    ``q_down`` is always ``1 - p_up``; it is never stored.
    """

    mu: float
    sigma_a: float
    lam: float
    p_up: float
    up: JumpMixture
    down: JumpMixture

    def __post_init__(self):
        for name in ("mu", "sigma_a", "lam", "p_up"):
            object.__setattr__(self, name, float(getattr(self, name)))
        validate(self)

    @classmethod
    def diffusion(cls, mu: float, sigma_a: float) -> "JumpDiffusionModel":
        """Pure lognormal model (no jumps)."""
        return cls(mu, sigma_a, 0.0, 0.0, JumpMixture.single(2.0), JumpMixture.single(1.0))

    @property
    def q_down(self) -> float:
        return 1.0 - self.p_up

    @property
    def has_up_jumps(self) -> bool:
        return self.lam > 0 and self.p_up > 0

    @property
    def has_down_jumps(self) -> bool:
        return self.lam > 0 and self.p_up < 1

    @property
    def up_bound(self) -> float:
        """Smallest up rate carrying mass; inf when there are no up jumps."""
        return self.up.min_rate if self.has_up_jumps else math.inf

    @property
    def down_bound(self) -> float:
        return self.down.min_rate if self.has_down_jumps else math.inf

    @property
    def is_dejd(self) -> bool:
        return len(self.up.rates) == 1 and len(self.down.rates) == 1

    def jump_moment(self, n: int) -> float:
        """E[Y^n] of a single jump."""
        return self.p_up * self.up.moment(n) + self.q_down * (-1) ** n * self.down.moment(n)

    def kernel_arrays(self):
        """Flat arrays consumed by the series kernels.

        G(x) = 0.5*var*x^2 + mu*x - lam + sum a_l*eta_l/(eta_l - x) + sum b_j*theta_j/(theta_j + x)
        """
        up_a = self.lam * self.p_up * np.asarray(self.up.weights)
        dn_b = self.lam * self.q_down * np.asarray(self.down.weights)
        return (
            self.mu,
            self.sigma_a**2,
            self.lam,
            up_a,
            np.asarray(self.up.rates, dtype=float),
            dn_b,
            np.asarray(self.down.rates, dtype=float),
        )

    def replace(self, **changes) -> "JumpDiffusionModel":
        values = dict(mu=self.mu, sigma_a=self.sigma_a, lam=self.lam, p_up=self.p_up, up=self.up, down=self.down)
        values.update(changes)
        return JumpDiffusionModel(**values)


def validate(model: JumpDiffusionModel) -> JumpDiffusionModel:
    """Check every model invariant; raise ModelError naming the first violation."""
    if not math.isfinite(model.mu):
        raise ModelError("mu", "must be finite")
    if not (model.sigma_a > 0 and math.isfinite(model.sigma_a)):
        raise ModelError("sigma_a", f"must be > 0, got {model.sigma_a!r}")
    if not (model.lam >= 0 and math.isfinite(model.lam)):
        raise ModelError("lam", f"must be >= 0, got {model.lam!r}")
    if not 0.0 <= model.p_up <= 1.0:
        raise ModelError("p_up", f"must lie in [0, 1], got {model.p_up!r}")
    model.up.check("up")
    model.down.check("down")
    if model.up.min_rate <= 1.0:
        raise ModelError("up.rates", f"min up rate {model.up.min_rate!r} <= 1 (expected price would be infinite)")
    return model


@dataclass(frozen=True)
class DejdParams:
    """Double-exponential parameters in the (lambda_up, lambda_down) layout."""

    mu: float
    sigma_a: float
    lambda_up: float
    lambda_down: float
    eta_up: float
    eta_down: float

    def __post_init__(self):
        for name in ("mu", "sigma_a", "lambda_up", "lambda_down", "eta_up", "eta_down"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.lambda_up < 0:
            raise ModelError("lambda_up", "must be >= 0")
        if self.lambda_down < 0:
            raise ModelError("lambda_down", "must be >= 0")
        if not self.eta_up > 1:
            raise ModelError("eta_up", f"must be > 1, got {self.eta_up!r}")
        if not self.eta_down > 0:
            raise ModelError("eta_down", f"must be > 0, got {self.eta_down!r}")
        if not self.sigma_a > 0:
            raise ModelError("sigma_a", f"must be > 0, got {self.sigma_a!r}")

    FIELDS = ("mu", "sigma_a", "lambda_up", "lambda_down", "eta_up", "eta_down")

    def to_model(self) -> JumpDiffusionModel:
        lam = self.lambda_up + self.lambda_down
        p_up = self.lambda_up / lam if lam > 0 else 0.0
        return JumpDiffusionModel(
            self.mu, self.sigma_a, lam, p_up, JumpMixture.single(self.eta_up), JumpMixture.single(self.eta_down)
        )

    @classmethod
    def from_model(cls, model: JumpDiffusionModel) -> "DejdParams":
        if not model.is_dejd:
            raise ModelError("up", "model has mixture jumps; only singleton mixtures map to DejdParams")
        return cls(
            model.mu,
            model.sigma_a,
            model.lam * model.p_up,
            model.lam * model.q_down,
            model.up.rates[0],
            model.down.rates[0],
        )

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in self.FIELDS)

    def shifted(self, **deltas: float) -> "DejdParams":
        values = {f: getattr(self, f) + deltas.get(f, 0.0) for f in self.FIELDS}
        return DejdParams(**values)


def levy_exponent(model: JumpDiffusionModel, x):
    """Levy exponent G(x), so that E[exp(x X_t)] = exp(t G(x)).

    Accepts complex scalars or arrays.  Raises DomainError when ``x`` is
    within ``POLE_TOLERANCE`` of a jump-rate pole.
    """
    x = np.asarray(x, dtype=complex)
    mu, var, lam, up_a, up_r, dn_b, dn_r = model.kernel_arrays()
    g = 0.5 * var * x * x + mu * x
    if lam > 0:
        jump = np.zeros_like(x) - lam
        for a, r in zip(up_a, up_r):
            if a != 0:
                gap = r - x
                if np.any(np.abs(gap) < POLE_TOLERANCE):
                    raise DomainError(f"argument within {POLE_TOLERANCE} of up-jump pole at {r}")
                jump = jump + a * r / gap
        for b, r in zip(dn_b, dn_r):
            if b != 0:
                gap = r + x
                if np.any(np.abs(gap) < POLE_TOLERANCE):
                    raise DomainError(f"argument within {POLE_TOLERANCE} of down-jump pole at {-r}")
                jump = jump + b * r / gap
        g = g + jump
    return g[()] if g.ndim == 0 else g


def levy_exponent_real(model: JumpDiffusionModel, x):
    """G and G' on the real axis, vectorized, without pole checks."""
    x = np.asarray(x, dtype=float)
    mu, var, lam, up_a, up_r, dn_b, dn_r = model.kernel_arrays()
    g = 0.5 * var * x * x + mu * x - lam
    dg = var * x + mu
    for a, r in zip(up_a, up_r):
        g = g + a * r / (r - x)
        dg = dg + a * r / (r - x) ** 2
    for b, r in zip(dn_b, dn_r):
        g = g + b * r / (r + x)
        dg = dg - b * r / (r + x) ** 2
    return g, dg


class Moments(NamedTuple):
    mean: float
    variance: float
    skewness: float
    kurtosis: float


def cumulants(model: JumpDiffusionModel, t: float) -> Moments:
    """Mean, variance, skewness and kurtosis (not excess) of X_t."""
    if not t > 0:
        raise DomainError(f"horizon must be positive, got {t!r}")
    k1 = t * (model.mu + model.lam * model.jump_moment(1))
    k2 = t * (model.sigma_a**2 + model.lam * model.jump_moment(2))
    k3 = t * model.lam * model.jump_moment(3)
    k4 = t * model.lam * model.jump_moment(4)
    return Moments(k1, k2, k3 / k2**1.5, 3.0 + k4 / k2**2)


def annual_mean(model: JumpDiffusionModel) -> float:
    """G'(0): expected log return per year."""
    return model.mu + model.lam * model.jump_moment(1)


# -- serialization -----------------------------------------------------------

_DEJD_KEYS = ("mu", "sigma", "lambda_up", "lambda_down", "eta_up", "eta_down")
_MEM_KEYS = ("mu", "sigma", "lambda", "p_up", "up_weights", "up_rates", "down_weights", "down_rates")


def model_to_dict(model: JumpDiffusionModel | DejdParams) -> dict:
    if isinstance(model, JumpDiffusionModel) and model.is_dejd:
        model = DejdParams.from_model(model)
    if isinstance(model, DejdParams):
        return dict(zip(_DEJD_KEYS, model.as_tuple()))
    return {
        "mu": model.mu,
        "sigma": model.sigma_a,
        "lambda": model.lam,
        "p_up": model.p_up,
        "up_weights": list(model.up.weights),
        "up_rates": list(model.up.rates),
        "down_weights": list(model.down.weights),
        "down_rates": list(model.down.rates),
    }


def model_from_dict(doc: dict) -> JumpDiffusionModel:
    """Build a model from the flat JSON layout (DEJD or MEM keys)."""
    try:
        if "up_weights" in doc or "up_rates" in doc:
            missing = [k for k in _MEM_KEYS if k not in doc]
            if missing:
                raise InputError(f"model document missing keys {missing}")
            return JumpDiffusionModel(
                doc["mu"],
                doc["sigma"],
                doc["lambda"],
                doc["p_up"],
                JumpMixture(doc["up_weights"], doc["up_rates"]),
                JumpMixture(doc["down_weights"], doc["down_rates"]),
            )
        missing = [k for k in _DEJD_KEYS if k not in doc]
        if missing:
            raise InputError(f"model document missing keys {missing}")
        return DejdParams(*(doc[k] for k in _DEJD_KEYS)).to_model()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (InputError, ModelError)):
            raise
        raise InputError(f"bad model document: {exc}") from exc


def load_model(path: str | Path) -> JumpDiffusionModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"model file {path} must hold a JSON object")
    return model_from_dict(doc)


# parameter sets used throughout examples and tests
SPX_4P = DejdParams(0.0021, 0.2625, 19.97, 29.85, 103.83, 105.74)
SPX_5P = DejdParams(0.0021, 0.1512, 36.78, 39.80, 70.27, 59.52)
SPX_6P = DejdParams(0.1984, 0.1512, 37.53, 40.24, 71.51, 60.56)
CORP_A_5_10Y = DejdParams(0.0729, 0.0525, 13.82, 31.90, 212.6, 225.6)
