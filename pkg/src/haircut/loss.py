"""Margin-period loss: tail probabilities and expected loss per unit of B0.

Loss on a haircut-``h`` position liquidated at discount ``g`` after the
margin period of risk:

    L = (1 - g) * ((1 - h)/(1 - g) - B_u/B_0)^+
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ModelError
from .levy import JumpDiffusionModel, TimeConvention
from .transform import InversionConfig, TransformKind, stabilized_invert, stabilized_invert_many


@dataclass(frozen=True)
class LossSetup:
    mpr_days: int = 10
    liquidity_discount: float = 0.0
    time_convention: TimeConvention = field(default_factory=TimeConvention)

    def __post_init__(self):
        if int(self.mpr_days) != self.mpr_days or self.mpr_days < 1:
            raise ModelError("mpr_days", f"must be an integer >= 1, got {self.mpr_days!r}")
        if not 0.0 <= self.liquidity_discount < 1.0:
            raise ModelError("liquidity_discount", f"must lie in [0, 1), got {self.liquidity_discount!r}")

    @property
    def horizon(self) -> float:
        """Margin period of risk in years."""
        return self.time_convention.years(self.mpr_days)

    @property
    def g(self) -> float:
        return self.liquidity_discount

    def with_discount(self, g: float) -> "LossSetup":
        return LossSetup(self.mpr_days, g, self.time_convention)

    def with_mpr(self, days: int) -> "LossSetup":
        return LossSetup(days, self.liquidity_discount, self.time_convention)


def _check_haircut(h: float) -> None:
    if not 0.0 <= h < 1.0:
        raise DomainError(f"haircut must lie in [0, 1), got {h!r}")


def loss_tail_prob(
    model: JumpDiffusionModel,
    setup: LossSetup,
    h: float,
    b: float = 0.0,
    config: InversionConfig | None = None,
) -> float:
    """Pr(L >= b) for haircut ``h``: the cdf of X_u at log((1-h-b)/(1-g))."""
    _check_haircut(h)
    if b < 0:
        raise DomainError(f"loss level must be >= 0, got {b!r}")
    room = 1.0 - h - b
    if room <= 0:
        return 0.0
    x0 = math.log(room / (1.0 - setup.g))
    return stabilized_invert(TransformKind.CDF, model, setup.horizon, x0, config).value


def loss_tail_probs(model, setup: LossSetup, h: float, bs, config: InversionConfig | None = None) -> np.ndarray:
    """Vectorized :func:`loss_tail_prob` over loss levels."""
    _check_haircut(h)
    bs = np.atleast_1d(np.asarray(bs, dtype=float))
    if np.any(bs < 0):
        raise DomainError("loss levels must be >= 0")
    out = np.zeros(bs.shape)
    room = 1.0 - h - bs
    live = room > 0
    if np.any(live):
        x0 = np.log(room[live] / (1.0 - setup.g))
        out[live] = stabilized_invert_many(TransformKind.CDF, model, setup.horizon, x0, config)[0]
    return out


def put_moneyness(h: float, g: float) -> float:
    """Log-moneyness k of the strike K = (1-h)/(1-g) = e^{-k}."""
    return -math.log((1.0 - h) / (1.0 - g))


def expected_loss(
    model: JumpDiffusionModel,
    setup: LossSetup,
    h: float,
    config: InversionConfig | None = None,
) -> float:
    """E[L | h] = (1-g) * undiscounted put struck at (1-h)/(1-g)."""
    _check_haircut(h)
    k = put_moneyness(h, setup.g)
    return (1.0 - setup.g) * stabilized_invert(TransformKind.PUT, model, setup.horizon, k, config).value


# -- Monte Carlo oracle -------------------------------------------------------

_CHUNK = 1 << 20


def _mixture_draws(rng: np.random.Generator, weights, rates, n: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ModelError("weights", "simulation needs nonnegative mixture weights")
    rates = np.asarray(rates, dtype=float)
    comp = rng.choice(rates.size, size=n, p=weights / weights.sum()) if rates.size > 1 else np.zeros(n, dtype=int)
    # inverse cdf of the exponential
    return -np.log1p(-rng.random(n)) / rates[comp]


def simulate_returns(model: JumpDiffusionModel, t: float, n_paths: int, seed: int) -> np.ndarray:
    """Draw X_t = mu t + sigma_a sqrt(t) Z + compound Poisson jumps.

    Paths are produced in fixed-size chunks, each with its own child of
    ``SeedSequence(seed)``, so results depend only on (seed, n_paths).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not t > 0:
        raise DomainError("horizon must be positive")
    out = np.empty(n_paths)
    n_chunks = -(-n_paths // _CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for c, child in enumerate(children):
        rng = np.random.default_rng(child)
        lo = c * _CHUNK
        n = min(_CHUNK, n_paths - lo)
        x = model.mu * t + model.sigma_a * math.sqrt(t) * rng.standard_normal(n)
        if model.lam > 0:
            counts = rng.poisson(model.lam * t, size=n)
            total = int(counts.sum())
            if total:
                owner = np.repeat(np.arange(n), counts)
                up = rng.random(total) < model.p_up
                jumps = np.empty(total)
                n_up = int(up.sum())
                jumps[up] = _mixture_draws(rng, model.up.weights, model.up.rates, n_up)
                jumps[~up] = -_mixture_draws(rng, model.down.weights, model.down.rates, total - n_up)
                x += np.bincount(owner, weights=jumps, minlength=n)
        out[lo : lo + n] = x
    return out
