"""Inner series of the two-sided Laplace inversion.

Two interchangeable back ends evaluate the same truncated series: a numba
``@njit`` loop and a vectorized numpy version.  Set ``HAIRCUT_DISABLE_NUMBA=1``
to force the numpy path (numba is also skipped if it fails to import).

Kind codes: 0 = pdf, 1 = cdf, 2 = undiscounted put in log-moneyness.
"""

from __future__ import annotations

import os

import numpy as np

PDF, CDF, PUT = 0, 1, 2

_FLAG = os.environ.get("HAIRCUT_DISABLE_NUMBA", "").strip().lower()
NUMBA_REQUESTED = _FLAG not in {"1", "true", "yes", "on"}

try:
    if not NUMBA_REQUESTED:
        raise ImportError("numba disabled by HAIRCUT_DISABLE_NUMBA")
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

HAVE_NUMBA = njit is not None

# numpy path: cap on the (rows x terms) block held in memory at once
_BLOCK_ELEMENTS = 1 << 21


def _levy_np(x, mu, var, lam, up_a, up_r, dn_b, dn_r):
    g = 0.5 * var * x * x + mu * x - lam
    for a, r in zip(up_a, up_r):
        if a != 0.0:
            g = g + a * r / (r - x)
    for b, r in zip(dn_b, dn_r):
        if b != 0.0:
            g = g + b * r / (r + x)
    return g


def series_numpy(kind, args, sigmas, shift_c, ns, t, mu, var, lam, up_a, up_r, dn_b, dn_r):
    """Vectorized evaluation of the truncated inversion series."""
    args = np.asarray(args, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    ns = np.asarray(ns, dtype=np.int64)
    out = np.empty(args.shape[0])
    for n in np.unique(ns):
        idx = np.flatnonzero(ns == n)
        rows = max(1, _BLOCK_ELEMENTS // (int(n) + 1))
        k = np.arange(n + 1, dtype=float)
        signs = np.where(k % 2 == 0, 1.0, -1.0)
        signs[0] = 0.5
        for start in range(0, idx.size, rows):
            sel = idx[start : start + rows]
            x = args[sel][:, None]
            s0 = sigmas[sel][:, None]
            sg = np.where(x >= 0.0, 1.0, -1.0)
            den = x + shift_c * sg
            s = s0 + 1j * (np.pi / den) * k
            phase = 1j * k * (-np.pi * shift_c * sg / den)
            if kind == PDF:
                expo = t * _levy_np(-s, mu, var, lam, up_a, up_r, dn_b, dn_r)
                div = 1.0
            elif kind == CDF:
                expo = t * _levy_np(-s, mu, var, lam, up_a, up_r, dn_b, dn_r)
                div = s
            else:
                expo = t * _levy_np(s + 1.0, mu, var, lam, up_a, up_r, dn_b, dn_r)
                div = s * (s + 1.0)
            terms = (np.exp(expo + s0 * x + phase) / div).real
            out[sel] = (terms * signs).sum(axis=1) / (np.abs(args[sel]) + shift_c)
    return out


# fast-math without the no-inf/no-nan assumptions: terms may underflow to 0
_FASTMATH = {"nsz", "arcp", "contract", "afn", "reassoc"}

if HAVE_NUMBA:

    @njit(cache=True, fastmath=_FASTMATH)
    def _levy_nb(xr, xi, mu, var, lam, up_a, up_r, dn_b, dn_r):
        """G(xr + i xi) as (real, imag), written out in real arithmetic."""
        gr = 0.5 * var * (xr * xr - xi * xi) + mu * xr - lam
        gi = var * xr * xi + mu * xi
        for i in range(up_a.shape[0]):
            if up_a[i] != 0.0:
                # a r / (r - x)
                dr = up_r[i] - xr
                c = up_a[i] * up_r[i] / (dr * dr + xi * xi)
                gr += c * dr
                gi += c * xi
        for j in range(dn_b.shape[0]):
            if dn_b[j] != 0.0:
                # b r / (r + x)
                dr = dn_r[j] + xr
                c = dn_b[j] * dn_r[j] / (dr * dr + xi * xi)
                gr += c * dr
                gi -= c * xi
        return gr, gi

    @njit(cache=True, fastmath=_FASTMATH)
    def _series_nb(kind, args, sigmas, shift_c, ns, t, mu, var, lam, up_a, up_r, dn_b, dn_r):
        out = np.empty(args.shape[0])
        for i in range(args.shape[0]):
            x = args[i]
            s0 = sigmas[i]
            sg = 1.0 if x >= 0.0 else -1.0
            den = x + shift_c * sg
            step = np.pi / den
            phase = -np.pi * shift_c * sg / den
            acc = 0.0
            for k in range(ns[i] + 1):
                w = k * step  # s = s0 + i w
                if kind == 2:
                    gr, gi = _levy_nb(s0 + 1.0, w, mu, var, lam, up_a, up_r, dn_b, dn_r)
                else:
                    gr, gi = _levy_nb(-s0, -w, mu, var, lam, up_a, up_r, dn_b, dn_r)
                mag = np.exp(t * gr + s0 * x)
                ang = t * gi + k * phase
                cr = np.cos(ang)
                ci = np.sin(ang)
                if kind == 0:
                    term = mag * cr
                else:
                    # divide (cr + i ci) by s, or by s (s + 1) for the put
                    if kind == 1:
                        dr, di = s0, w
                    else:
                        dr = s0 * (s0 + 1.0) - w * w
                        di = w * (2.0 * s0 + 1.0)
                    term = mag * (cr * dr + ci * di) / (dr * dr + di * di)
                if k == 0:
                    acc += 0.5 * term
                elif k % 2 == 1:
                    acc -= term
                else:
                    acc += term
            out[i] = acc / (abs(x) + shift_c)
        return out

    def series_numba(kind, args, sigmas, shift_c, ns, t, mu, var, lam, up_a, up_r, dn_b, dn_r):
        return _series_nb(
            int(kind),
            np.ascontiguousarray(args, dtype=np.float64),
            np.ascontiguousarray(sigmas, dtype=np.float64),
            float(shift_c),
            np.ascontiguousarray(ns, dtype=np.int64),
            float(t),
            float(mu),
            float(var),
            float(lam),
            np.ascontiguousarray(up_a, dtype=np.float64),
            np.ascontiguousarray(up_r, dtype=np.float64),
            np.ascontiguousarray(dn_b, dtype=np.float64),
            np.ascontiguousarray(dn_r, dtype=np.float64),
        )

    series = series_numba
else:  # pragma: no cover
    series_numba = None
    series = series_numpy


def backend() -> str:
    return "numba" if series is series_numba else "numpy"
