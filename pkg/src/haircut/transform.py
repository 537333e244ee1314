"""Two-sided Laplace transforms of X_t and their numerical inversion.

The inversion is the Fourier-series (trapezoidal Bromwich) scheme with a
shift constant ``C`` and ``N`` terms:

    f_A(x) = e^{sx} L(s) / (2(|x|+C))
             + e^{sx}/(|x|+C) * sum_{k=1..N} (-1)^k Re[ exp(-i k pi C sgn(x) / (x + C sgn(x)))
                                                    * L(s + i k pi / (x + C sgn(x))) ]

with the truncation error bounded by an upper incomplete gamma function
of order 1/2.  Values are per unit of initial collateral value.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from . import kernels
from .errors import DomainError, InversionError
from .levy import JumpDiffusionModel, levy_exponent, levy_exponent_real

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
# distance-from-pole floor for the abscissa is ALIAS_DECAY / C: keeps the
# nearest aliased copy below exp(-2 * ALIAS_DECAY)
ALIAS_DECAY = 16.0
CLAMP_WARN = 1e-6
MAX_DOUBLINGS = 6
SADDLE_STEPS = 20


class TransformKind(enum.Enum):
    PDF = kernels.PDF
    CDF = kernels.CDF
    PUT = kernels.PUT

    def roac(self, model: JumpDiffusionModel) -> tuple[float, float]:
        """Strip of absolute convergence for Re(s)."""
        eta, theta = model.up_bound, model.down_bound
        if self is TransformKind.PDF:
            return -eta, theta
        if self is TransformKind.CDF:
            return 0.0, theta
        return -theta - 1.0, -1.0


@dataclass(frozen=True)
class InversionConfig:
    """Error-control knobs.

    ``abscissa=None`` lets the inverter choose the contour per argument.
    ``abs_tol`` is an absolute floor on the truncation target, used when the
    leading term itself is negligibly small.
    """

    abscissa: float | None = None
    shift_C: float = 1.0
    target_rel_error: float = 1e-9
    max_N: int = 2**15
    abs_tol: float = 1e-15

    def __post_init__(self):
        if not self.shift_C > 0:
            raise ValueError(f"shift_C must be > 0, got {self.shift_C!r}")
        if not 0 < self.target_rel_error < 1:
            raise ValueError(f"target_rel_error must lie in (0, 1), got {self.target_rel_error!r}")
        if self.max_N < 16:
            raise ValueError(f"max_N must be >= 16, got {self.max_N!r}")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be >= 0")

    def with_shift(self, shift_C: float) -> "InversionConfig":
        return InversionConfig(self.abscissa, shift_C, self.target_rel_error, self.max_N, self.abs_tol)


DEFAULT_CONFIG = InversionConfig()


@dataclass(frozen=True)
class InversionResult:
    value: float
    abscissa: float
    shift_C: float
    N: int
    bound: float
    complement: bool = False

    def __float__(self) -> float:
        return self.value


def transform(kind: TransformKind, model: JumpDiffusionModel, t: float, s: complex) -> complex:
    """Two-sided Laplace transform of the pdf, cdf or put (B0 = 1) at ``s``."""
    if not t > 0:
        raise DomainError(f"horizon must be positive, got {t!r}")
    lo, hi = kind.roac(model)
    s = complex(s)
    if not lo < s.real < hi:
        raise DomainError(f"Re(s)={s.real} outside the {kind.name} strip ({lo}, {hi})")
    if kind is TransformKind.PDF:
        return complex(np.exp(t * levy_exponent(model, -s)))
    if kind is TransformKind.CDF:
        return complex(np.exp(t * levy_exponent(model, -s)) / s)
    return complex(np.exp(t * levy_exponent(model, s + 1.0)) / (s * (s + 1.0)))


def upper_incomplete_gamma_half(z: float) -> float:
    """Gamma(1/2, z) = sqrt(pi) * erfc(sqrt(z))."""
    if z < 0:
        raise DomainError(f"z must be >= 0, got {z!r}")
    return math.sqrt(math.pi) * math.erfc(math.sqrt(z))


def _log_gamma_half(z):
    # log(sqrt(pi) * erfc(sqrt(z))), stable far into the tail
    return 0.5 * math.log(math.pi) + math.log(2.0) + log_ndtr(-np.sqrt(2.0 * np.asarray(z, dtype=float)))


def relative_truncation_bound(model: JumpDiffusionModel, t: float, arg, shift_C: float, N: int):
    """Truncation bound divided by zeta(sigma) * exp(sigma * arg).

    Depends only on the diffusion variance, C, N and the argument, so it is
    the same for all three transform kinds.
    """
    rho = 0.5 * model.sigma_a**2 * t
    T = np.abs(arg) + shift_C
    z = rho * (np.pi * N / T) ** 2
    return np.exp(_log_gamma_half(z)) / (2.0 * np.pi * math.sqrt(rho))


# -- contour placement --------------------------------------------------------


def _branches(kind: TransformKind, model: JumpDiffusionModel, t: float, args: np.ndarray):
    """Pick the half-plane per argument.

    Returns (complement mask, pole, direction, far distance) arrays. The
    complement branch inverts the same Laplacian on the other side of its
    pole at 0, which yields F(x) - 1 for the cdf and the call price for the
    put; both are mapped back after summation.
    """
    n = args.shape[0]
    eta, theta = model.up_bound, model.down_bound
    if kind is TransformKind.CDF:
        centre = t * levy_exponent_real(model, 0.0)[1]
        comp = args > centre
        pole = np.zeros(n)
        direction = np.where(comp, -1.0, 1.0)
        far = np.where(comp, eta, theta)
    else:
        log_forward = t * levy_exponent_real(model, 1.0)[0]
        comp = args < -log_forward
        pole = np.where(comp, 0.0, -1.0)
        direction = np.where(comp, 1.0, -1.0)
        far = np.where(comp, eta - 1.0, theta)
    return comp, pole, direction, far


def _phi_slope(kind, model, t, args, sigma):
    if kind is TransformKind.CDF:
        dg = levy_exponent_real(model, -sigma)[1]
        return args - t * dg - 1.0 / sigma
    dg = levy_exponent_real(model, sigma + 1.0)[1]
    return args + t * dg - 1.0 / sigma - 1.0 / (sigma + 1.0)


def choose_abscissa(kind: TransformKind, model: JumpDiffusionModel, t: float, args, shift_C: float):
    """Contour abscissa per argument and the complement-branch mask.

    The pdf uses s = 0.  For the cdf and put the abscissa minimizes the
    leading-term magnitude e^{s x}|L(s)| (a saddle point), restricted to a
    band that stays at least min(16/C, half the strip) from the pole and
    within three quarters of the strip width from the far edge.
    """
    args = np.atleast_1d(np.asarray(args, dtype=float))
    if kind is TransformKind.PDF:
        return np.zeros_like(args), np.zeros(args.shape, dtype=bool)
    comp, pole, direction, far = _branches(kind, model, t, args)
    scale = 50.0 / (model.sigma_a * math.sqrt(t))
    near = np.where(np.isfinite(far), np.minimum(ALIAS_DECAY / shift_C, 0.5 * far), ALIAS_DECAY / shift_C)
    top = np.where(np.isfinite(far), 0.75 * far, np.maximum(near, scale))
    lo, hi = near.copy(), top.copy()

    def slope(d):
        return direction * _phi_slope(kind, model, t, args, pole + direction * d)

    s_lo, s_hi = slope(lo), slope(hi)
    # the abscissa only tunes efficiency; ~1e-6 of the band is plenty
    for _ in range(SADDLE_STEPS):
        mid = 0.5 * (lo + hi)
        up = slope(mid) > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    dist = np.where(s_lo >= 0, near, np.where(s_hi <= 0, top, 0.5 * (lo + hi)))
    return pole + direction * dist, comp


# -- core ---------------------------------------------------------------------


def _log_lead_and_zeta(kind, model, t, sigmas):
    if kind is TransformKind.PUT:
        g = levy_exponent_real(model, sigmas + 1.0)[0]
        log_l = t * g - np.log(np.abs(sigmas * (sigmas + 1.0)))
        log_zeta = t * g - 2.0 * np.log(np.minimum(np.abs(sigmas), np.abs(sigmas + 1.0)))
        return log_l, log_zeta
    g = levy_exponent_real(model, -sigmas)[0]
    if kind is TransformKind.CDF:
        log_l = t * g - np.log(np.abs(sigmas))
        return log_l, log_l
    return t * g, t * g


def _log_bounds(model, t, args, sigmas, log_zeta, shift_C, N):
    rho = 0.5 * model.sigma_a**2 * t
    T = np.abs(args) + shift_C
    z = rho * (np.pi * np.asarray(N, dtype=float) / T) ** 2
    return log_zeta + sigmas * args - math.log(2.0 * math.pi * math.sqrt(rho)) + _log_gamma_half(z)


def _check_abscissa(kind, model, sigma):
    lo, hi = kind.roac(model)
    if not lo < sigma < hi:
        raise DomainError(f"abscissa {sigma} outside the {kind.name} strip ({lo}, {hi})")


@dataclass
class _Batch:
    values: np.ndarray
    raw: np.ndarray
    sigmas: np.ndarray
    ns: np.ndarray
    log_bound: np.ndarray
    log_lead: np.ndarray
    complement: np.ndarray
    shift_C: float


def _invert_batch(kind, model, t, args, config, shift_C=None, N=None) -> _Batch:
    if not t > 0:
        raise DomainError(f"horizon must be positive, got {t!r}")
    args = np.atleast_1d(np.asarray(args, dtype=float))
    C = config.shift_C if shift_C is None else shift_C
    if config.abscissa is None:
        sigmas, comp = choose_abscissa(kind, model, t, args, C)
    else:
        _check_abscissa(kind, model, config.abscissa)
        sigmas = np.full(args.shape, float(config.abscissa))
        comp = np.zeros(args.shape, dtype=bool)

    log_l, log_zeta = _log_lead_and_zeta(kind, model, t, sigmas)
    log_lead = sigmas * args + log_l - np.log(2.0 * (np.abs(args) + C))
    if N is not None:
        ns = np.full(args.shape, int(N), dtype=np.int64)
        log_bound = _log_bounds(model, t, args, sigmas, log_zeta, C, ns)
    else:
        target = np.maximum(math.log(config.target_rel_error) + log_lead, math.log(max(config.abs_tol, 1e-300)))
        ns = np.zeros(args.shape, dtype=np.int64)
        log_bound = np.full(args.shape, np.inf)
        n = 16
        while n <= config.max_N and np.any(ns == 0):
            lb = _log_bounds(model, t, args, sigmas, log_zeta, C, n)
            fresh = (ns == 0) & (lb <= target)
            ns[fresh] = n
            log_bound[fresh] = lb[fresh]
            n *= 2
        if np.any(ns == 0):
            bad = args[ns == 0][0]
            raise InversionError(
                f"{kind.name} inversion at {bad:.6g}: truncation target not met with N <= {config.max_N} (C={C})"
            )

    raw = kernels.series(kind.value, args, sigmas, C, ns, t, *model.kernel_arrays())
    values = raw.copy()
    if kind is TransformKind.CDF:
        values[comp] += 1.0
    elif kind is TransformKind.PUT:
        forward = math.exp(t * levy_exponent_real(model, 1.0)[0])
        values[comp] += np.exp(-args[comp]) - forward
    return _Batch(values, raw, sigmas, ns, log_bound, log_lead, comp, C)


def _clamp(kind, args, values):
    if kind is TransformKind.CDF:
        lo, hi = np.zeros_like(values), np.ones_like(values)
    elif kind is TransformKind.PUT:
        lo, hi = np.zeros_like(values), np.exp(-args)
    else:
        return values
    out = np.clip(values, lo, hi)
    moved = np.abs(out - values)
    if np.any(moved > CLAMP_WARN):
        i = int(np.argmax(moved))
        log.warning("%s inversion clamped by %.3g at argument %.6g", kind.name, moved[i], args[i])
    return out


def invert(
    kind: TransformKind,
    model: JumpDiffusionModel,
    t: float,
    arg: float,
    config: InversionConfig | None = None,
    *,
    N: int | None = None,
) -> InversionResult:
    """Single inversion at a fixed shift constant.

    ``N=None`` picks the smallest power of two meeting the relative
    truncation target; an explicit ``N`` is used as given.
    """
    config = config or DEFAULT_CONFIG
    b = _invert_batch(kind, model, t, [arg], config, N=N)
    value = float(_clamp(kind, np.atleast_1d(float(arg)), b.values)[0])
    return InversionResult(value, float(b.sigmas[0]), b.shift_C, int(b.ns[0]), float(np.exp(b.log_bound[0])), bool(b.complement[0]))


def invert_raw(kind, model, t, arg, config=None, *, N=None) -> float:
    """Unclamped single inversion; used to check the truncation bound."""
    config = config or DEFAULT_CONFIG
    return float(_invert_batch(kind, model, t, [arg], config, N=N).values[0])


def truncation_bound(
    kind: TransformKind,
    model: JumpDiffusionModel,
    t: float,
    arg: float,
    config: InversionConfig | None,
    N: int,
    *,
    relative: bool = False,
) -> float:
    """Upper bound on the truncation error of ``invert(..., N=N)``.

    With ``relative=True`` the bound is divided by zeta(sigma) e^{sigma arg}.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    config = config or DEFAULT_CONFIG
    if relative:
        return float(relative_truncation_bound(model, t, arg, config.shift_C, N))
    args = np.atleast_1d(float(arg))
    if config.abscissa is None:
        sigmas, _ = choose_abscissa(kind, model, t, args, config.shift_C)
    else:
        _check_abscissa(kind, model, config.abscissa)
        sigmas = np.full(1, float(config.abscissa))
    _, log_zeta = _log_lead_and_zeta(kind, model, t, sigmas)
    return float(np.exp(_log_bounds(model, t, args, sigmas, log_zeta, config.shift_C, N))[0])


def _subset(b: _Batch, mask) -> _Batch:
    return _Batch(
        b.values[mask], b.raw[mask], b.sigmas[mask], b.ns[mask], b.log_bound[mask], b.log_lead[mask],
        b.complement[mask], b.shift_C,
    )


def _agree(a: _Batch, b: _Batch, rel: float, abs_tol: float) -> np.ndarray:
    lead = np.exp(np.maximum(a.log_lead, b.log_lead))
    noise = 64.0 * _EPS * np.sqrt(np.maximum(a.ns, b.ns)) * lead + abs_tol
    diff = np.abs(a.values - b.values)
    return diff <= rel * np.maximum(np.abs(a.values), np.abs(b.values)) + noise


def stabilized_invert_many(kind, model, t, args, config=None):
    """Vectorized shift-constant stabilization.

    Returns (values, shift constants used, N used).  Each argument starts at
    ``config.shift_C`` and C is doubled until two successive results agree
    to ``target_rel_error``, at most six doublings.
    """
    config = config or DEFAULT_CONFIG
    args = np.atleast_1d(np.asarray(args, dtype=float))
    values = np.empty(args.shape)
    c_used = np.empty(args.shape)
    n_used = np.empty(args.shape, dtype=np.int64)
    pending = np.arange(args.size)
    C = config.shift_C
    prev = _invert_batch(kind, model, t, args, config, shift_C=C)
    for doubling in range(1, MAX_DOUBLINGS + 1):
        C *= 2.0
        cur = _invert_batch(kind, model, t, args[pending], config, shift_C=C)
        ok = _agree(prev, cur, config.target_rel_error, config.abs_tol)
        done = pending[ok]
        values[done] = cur.values[ok]
        c_used[done] = C
        n_used[done] = cur.ns[ok]
        if ok.all():
            break
        if doubling == MAX_DOUBLINGS:
            j = int(np.flatnonzero(~ok)[0])
            raise InversionError(
                f"{kind.name} inversion at {args[pending[j]]:.6g} did not stabilize after {MAX_DOUBLINGS} "
                f"doublings of C: {prev.values[j]!r} (C={C / 2:g}) vs {cur.values[j]!r} (C={C:g})"
            )
        pending = pending[~ok]
        prev = _subset(cur, ~ok)
    return _clamp(kind, args, values), c_used, n_used


def stabilized_invert(
    kind: TransformKind,
    model: JumpDiffusionModel,
    t: float,
    arg: float,
    base_config: InversionConfig | None = None,
) -> InversionResult:
    config = base_config or DEFAULT_CONFIG
    values, c_used, n_used = stabilized_invert_many(kind, model, t, [arg], config)
    final = config.with_shift(float(c_used[0]))
    sigma, comp = choose_abscissa(kind, model, t, [arg], final.shift_C) if config.abscissa is None else (
        np.array([config.abscissa]), np.array([False]))
    bound = truncation_bound(kind, model, t, arg, final, int(n_used[0]))
    return InversionResult(float(values[0]), float(sigma[0]), final.shift_C, int(n_used[0]), bound, bool(comp[0]))
