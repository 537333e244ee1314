import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haircut import (
    CORP_A_5_10Y,
    SPX_6P,
    DomainError,
    InversionConfig,
    InversionError,
    TransformKind,
    invert,
    simulate_returns,
    stabilized_invert,
    transform,
    truncation_bound,
    upper_incomplete_gamma_half,
)
from haircut.transform import (
    _log_lead_and_zeta,
    choose_abscissa,
    invert_raw,
    relative_truncation_bound,
    stabilized_invert_many,
)

from conftest import DAY, TEN_DAYS, gaussian_cdf, lognormal_params

PDF, CDF, PUT = TransformKind.PDF, TransformKind.CDF, TransformKind.PUT


@pytest.mark.parametrize("z", [0.0, 1e-8, 0.3, 1.0, 7.5, 40.0, 300.0])
def test_gamma_half_matches_mpmath(z):
    ref = float(mpmath.gammainc(0.5, z))
    assert upper_incomplete_gamma_half(z) == pytest.approx(ref, rel=1e-13, abs=1e-300)


def test_gamma_half_rejects_negative():
    with pytest.raises(DomainError):
        upper_incomplete_gamma_half(-1.0)


def test_transform_strip_is_enforced(spx6):
    with pytest.raises(DomainError):
        transform(CDF, spx6, DAY, 0.0)
    with pytest.raises(DomainError):
        transform(PUT, spx6, DAY, -1.0)
    assert transform(PDF, spx6, DAY, 0.0) == pytest.approx(1.0)


def test_transform_of_gaussian_pdf_is_the_mgf():
    m = lognormal_params(0.2).to_model()
    s = 0.7 + 0.4j
    expect = np.exp(-m.mu * s + 0.5 * 0.04 * s * s)
    assert transform(PDF, m, 1.0, s) == pytest.approx(expect)


# -- closed forms -------------------------------------------------------------------


def _bs_put(k, sd):
    # undiscounted put on a unit-forward lognormal with strike exp(-k)
    strike = math.exp(-k)
    d1 = (k + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    return strike * gaussian_cdf(-d2, 0, 1) - gaussian_cdf(-d1, 0, 1)


@pytest.mark.parametrize("t", [1.0, TEN_DAYS])
def test_lognormal_closed_forms(t):
    sigma = 0.2
    m = lognormal_params(sigma).to_model()
    sd = sigma * math.sqrt(t)
    mean = m.mu * t
    grid = np.linspace(mean - 4 * sd, mean + 4 * sd, 100)
    cdf = stabilized_invert_many(CDF, m, t, grid)[0]
    pdf = stabilized_invert_many(PDF, m, t, grid)[0]
    ref_cdf = np.array([gaussian_cdf(x, mean, sd) for x in grid])
    ref_pdf = np.exp(-0.5 * ((grid - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    np.testing.assert_allclose(cdf, ref_cdf, rtol=1e-6)
    np.testing.assert_allclose(pdf, ref_pdf, rtol=1e-6)
    ks = -grid  # strikes across the same range of log moneyness
    put = stabilized_invert_many(PUT, m, t, ks)[0]
    ref_put = np.array([_bs_put(k, sd) for k in ks])
    np.testing.assert_allclose(put, ref_put, rtol=1e-6)


def test_put_with_plain_drift_is_not_black_scholes():
    # mu = 0 log-return drift is not a martingale; the exact put is an average of (K - e^x)^+
    from scipy import integrate

    sd = 0.2
    m = lognormal_params(sd).to_model().replace(mu=0.0)
    exact = integrate.quad(lambda x: max(1 - math.exp(x), 0) * math.exp(-0.5 * (x / sd) ** 2), -3, 0)[0]
    exact /= sd * math.sqrt(2 * math.pi)
    assert stabilized_invert(PUT, m, 1.0, 0.0).value == pytest.approx(exact, rel=1e-8)


# -- truncation bound ---------------------------------------------------------------


def _battery(seed, n):
    rng = np.random.default_rng(seed)
    models = [SPX_6P.to_model(), CORP_A_5_10Y.to_model(), lognormal_params(0.25).to_model()]
    for _ in range(n):
        kind = list(TransformKind)[rng.integers(3)]
        model = models[rng.integers(3)]
        t = [DAY, TEN_DAYS, 0.5][rng.integers(3)]
        sd = math.sqrt(model.sigma_a**2 * t)
        arg = float(rng.uniform(-6, 4) * max(sd, 0.01))
        N = int(2 ** rng.integers(4, 9))
        yield kind, model, t, arg, N


def test_truncation_bound_holds_on_a_random_battery():
    config = InversionConfig(shift_C=1.0)
    for kind, model, t, arg, N in _battery(11, 150):
        diff = abs(invert_raw(kind, model, t, arg, config, N=N) - invert_raw(kind, model, t, arg, config, N=4 * N))
        assert diff <= truncation_bound(kind, model, t, arg, config, N) + 1e-12, (kind, t, arg, N)


def test_relative_bound_is_shared_by_all_kinds(spx6):
    for arg in (-0.2, -0.01, 0.05):
        for N in (32, 128):
            rel = relative_truncation_bound(spx6, TEN_DAYS, arg, 1.0, N)
            for kind in TransformKind:
                sig, _ = choose_abscissa(kind, spx6, TEN_DAYS, [arg], 1.0)
                log_zeta = _log_lead_and_zeta(kind, spx6, TEN_DAYS, sig)[1][0]
                absolute = truncation_bound(kind, spx6, TEN_DAYS, arg, None, N)
                assert absolute / math.exp(log_zeta + sig[0] * arg) == pytest.approx(rel, rel=1e-12)
                assert truncation_bound(kind, spx6, TEN_DAYS, arg, None, N, relative=True) == rel


def test_bound_decreases_in_N(corp):
    b = [truncation_bound(CDF, corp, TEN_DAYS, -0.05, None, n) for n in (16, 32, 64, 128)]
    assert all(x > y for x, y in zip(b, b[1:]))


def test_automatic_N_meets_target(corp):
    cfg = InversionConfig(target_rel_error=1e-10)
    r = invert(CDF, corp, TEN_DAYS, -0.05, cfg)
    assert r.N >= 16 and (r.N & (r.N - 1)) == 0
    assert r.bound <= 1e-10 * max(r.value, 1e-5) or r.bound < 1e-15


def test_unreachable_target_raises(corp):
    with pytest.raises(InversionError):
        invert(PDF, corp, TEN_DAYS, 0.0, InversionConfig(target_rel_error=1e-14, max_N=16))


def test_fixed_abscissa_outside_strip_raises(spx6):
    with pytest.raises(DomainError):
        invert(CDF, spx6, DAY, -0.01, InversionConfig(abscissa=-100.0))


def test_user_abscissa_inside_strip_agrees(spx6):
    auto = stabilized_invert(CDF, spx6, TEN_DAYS, -0.08).value
    fixed = stabilized_invert(CDF, spx6, TEN_DAYS, -0.08, InversionConfig(abscissa=20.0)).value
    assert fixed == pytest.approx(auto, rel=1e-7)


# -- properties ---------------------------------------------------------------------


def test_cdf_monotone_with_limits(spx6):
    x = np.linspace(-0.5, 0.5, 201)
    cdf = stabilized_invert_many(CDF, spx6, TEN_DAYS, x)[0]
    assert np.all(np.diff(cdf) >= -1e-12)
    assert cdf[0] < 1e-6 and cdf[-1] > 1 - 1e-6
    assert np.all((cdf >= 0) & (cdf <= 1))


def test_pdf_integrates_to_one_and_cdf_is_its_integral(spx6):
    from scipy.integrate import simpson

    x = np.linspace(-0.6, 0.6, 4001)
    pdf = stabilized_invert_many(PDF, spx6, TEN_DAYS, x)[0]
    assert simpson(pdf, x=x) == pytest.approx(1.0, abs=1e-6)
    x = np.linspace(-0.05, 0.02, 2001)
    pdf = stabilized_invert_many(PDF, spx6, TEN_DAYS, x)[0]
    cdf = stabilized_invert_many(CDF, spx6, TEN_DAYS, np.array([-0.05, 0.02]))[0]
    assert simpson(pdf, x=x) == pytest.approx(cdf[1] - cdf[0], abs=1e-7)


def test_put_is_bounded_increasing_and_convex_in_strike(spx6):
    ks = np.linspace(-0.3, 0.3, 61)
    put = stabilized_invert_many(PUT, spx6, TEN_DAYS, ks)[0]
    strikes = np.exp(-ks)
    assert np.all(put >= -1e-15) and np.all(put <= strikes)
    # convex and increasing in strike
    order = np.argsort(strikes)
    p, kk = put[order], strikes[order]
    assert np.all(np.diff(p) >= -1e-12)
    slopes = np.diff(p) / np.diff(kk)
    assert np.all(np.diff(slopes) >= -1e-8)


def test_complement_branches_are_continuous(spx6):
    # the cdf switches sides at the mean, the put at the forward; values must not jump
    from haircut.levy import levy_exponent_real

    centre = TEN_DAYS * levy_exponent_real(spx6, 0.0)[1]
    xs = np.array([centre - 1e-9, centre + 1e-9])
    a, b = stabilized_invert_many(CDF, spx6, TEN_DAYS, xs)[0]
    assert abs(a - b) < 1e-7
    k0 = -TEN_DAYS * levy_exponent_real(spx6, 1.0)[0]
    a, b = stabilized_invert_many(PUT, spx6, TEN_DAYS, np.array([k0 - 1e-9, k0 + 1e-9]))[0]
    assert abs(a - b) < 1e-7


def test_pdf_matches_monte_carlo_at_zero(spx6):
    n, half = 1_000_000, 5e-4
    x = simulate_returns(spx6, DAY, n, seed=5)
    hits = np.abs(x) < half
    p = hits.mean()
    density = p / (2 * half)
    se = math.sqrt(p * (1 - p) / n) / (2 * half)
    assert stabilized_invert(PDF, spx6, DAY, 0.0).value == pytest.approx(density, abs=3 * se)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_cdf_is_monotone_between_random_points(a, b):
    m = CORP_A_5_10Y.to_model()
    lo, hi = sorted((a, b))
    v = stabilized_invert_many(CDF, m, TEN_DAYS, np.array([lo, hi]))[0]
    assert v[0] <= v[1] + 1e-12
