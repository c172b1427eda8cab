import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structdamp import (
    DampingParams,
    DomainError,
    InitialData,
    Regime,
    TimeGrid,
    envelope_constant,
    fit_exponential_rate,
    fit_polynomial_rate,
    harmonic,
    solve_linear,
    spectral_abscissa,
    strictly_positive_rates,
    theoretical_rates,
    torus_1d,
    verify_bound,
)
from structdamp.analysis import sobolev_data_orders


def test_exponential_fit_recovers_rate():
    t = np.linspace(0, 10, 101)
    fit = fit_exponential_rate(t, 3.0 * np.exp(-0.7 * t))
    assert fit.rate == pytest.approx(0.7, rel=1e-12)
    assert fit.amplitude == pytest.approx(3.0, rel=1e-12)
    assert fit.rsquared == pytest.approx(1.0)
    assert fit_exponential_rate(t, np.full_like(t, 2.0)).rate == pytest.approx(0.0, abs=1e-14)


def test_envelope_fit_on_damped_oscillation():
    t = np.linspace(0, 30, 6001)
    v = np.exp(-0.4 * t) * np.abs(np.cos(1.3 * t + 0.2)) + 1e-300
    assert fit_exponential_rate(t, v, (5, 30), envelope=True).rate == pytest.approx(0.4, rel=1e-4)
    with pytest.raises(DomainError, match="local maxima"):
        fit_exponential_rate(t, np.exp(-t), (5, 30), envelope=True)


def test_polynomial_fit():
    t = np.logspace(-3, -1, 50)
    fit = fit_polynomial_rate(t, 2 * t**-1.5, (1e-3, 1e-1))
    assert fit.rate == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(DomainError):
        fit_polynomial_rate(t, t, (0.0, 0.1))
    with pytest.raises(DomainError):
        fit_polynomial_rate(np.linspace(0.1, 2, 20), np.ones(20), (0.5, 2.0))


def test_fit_errors():
    t = np.linspace(0, 5, 51)
    with pytest.raises(DomainError, match="outside"):
        fit_exponential_rate(t, np.exp(-t), (1, 9))
    with pytest.raises(DomainError, match="> 0"):
        fit_exponential_rate(t, np.zeros_like(t))
    with pytest.raises(DomainError, match="points"):
        fit_exponential_rate(t, np.exp(-t), (0, 0.3))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.1, 10.0))
def test_exponential_fit_property(rate, amp):
    t = np.linspace(1, 6, 40)
    assert fit_exponential_rate(t, amp * np.exp(-rate * t)).rate == pytest.approx(rate, rel=1e-9)


@pytest.mark.parametrize("beta, theta", [(1, 1), (2, 1), (1, 0.5), (3, 1.5), (0.7, 0.3)])
def test_envelope_constant_is_the_supremum(beta, theta):
    """sup_x x^(beta/theta) e^(-x/2) by brute force on a fine grid."""
    q = beta / theta
    x = np.linspace(0, 20 * q + 20, 2_000_001)
    brute = np.max(x**q * np.exp(-x / 2))
    assert envelope_constant(beta, theta) == pytest.approx(brute, rel=1e-9)


def test_abscissa():
    assert spectral_abscissa(harmonic(16), DampingParams(1, 2)) == pytest.approx(0.5)
    assert spectral_abscissa(torus_1d(4), DampingParams(1, 2)) == 0.0
    assert spectral_abscissa(torus_1d(4).positive_part(), DampingParams(1, 2)) == pytest.approx(0.5)


def _row(preds, quantity, channel, family="minimal"):
    (p,) = [p for p in preds if p.quantity == quantity and p.channel == channel and p.family == family]
    return p


def test_rate_table_effective():
    preds = theoretical_rates(DampingParams(1, 3), beta=2.0, k=2)
    assert _row(preds, "L^beta u", "u0").small_time_exponent == pytest.approx(2.0)  # beta/theta
    assert _row(preds, "L^beta u", "u1").small_time_exponent == pytest.approx(0.5)  # (2beta-sigma)/(2theta)
    assert _row(preds, "d_t^k u", "u0").small_time_exponent == pytest.approx(3.0)  # k sigma/(2theta)
    assert _row(preds, "d_t^k u", "u1").small_time_exponent == pytest.approx(1.5)
    assert _row(preds, "u", "u1").large_time == "linear"
    assert _row(preds, "u", "u0").large_time == "none"


def test_rate_table_critical_and_noneffective():
    crit = theoretical_rates(DampingParams(1, 2), beta=3.0, k=1)
    assert _row(crit, "L^beta u", "u0").small_time_exponent == pytest.approx(3.0)
    assert _row(crit, "L^beta u", "u1").small_time_exponent == pytest.approx(2.0)  # (beta-theta)/theta
    assert _row(crit, "d_t^k u", "u0").small_time_exponent == pytest.approx(1.0)
    assert _row(crit, "d_t^k u", "u1").small_time_exponent == 0.0
    assert _row(crit, "d_t^k u", "u1").large_time == "none"
    ne = theoretical_rates(DampingParams(1.5, 2), beta=1.0, k=2)
    assert ne[0].regime is Regime.NON_EFFECTIVE
    assert _row(ne, "L^beta u", "u0").small_time_exponent == pytest.approx(2.0)  # beta/(sigma-theta)
    assert _row(ne, "L^beta u", "u1").small_time_exponent == 0.0  # 2beta - sigma = 0
    assert _row(ne, "d_t^k u", "u0").small_time_exponent == pytest.approx(6.0)  # k theta/(sigma-theta)
    edge = theoretical_rates(DampingParams(2, 2), beta=1.0, k=1)
    assert math.isinf(_row(edge, "L^beta u", "u0").small_time_exponent)


def test_rate_table_undamped_uses_sobolev_data():
    preds = theoretical_rates(DampingParams(0, 2), beta=2.0, k=1)
    row = _row(preds, "L^beta u", "u0")
    assert row.small_time_exponent is None and row.large_time == "exponential" and row.data_order == 4.0
    assert _row(preds, "L^beta u", "u1").data_order == 2.0


def test_strictly_positive_orders():
    assert sobolev_data_orders(DampingParams(1, 3), 1.0, 0) == (2.0, 0.0)
    assert sobolev_data_orders(DampingParams(1.5, 2), 0.0, 1) == (3.0, 0.0)
    preds = strictly_positive_rates(DampingParams(1, 2), 1.0, 1)
    assert {p.family for p in preds} == {"sobolev-exp"}
    assert all(p.large_time == "exponential" for p in preds)
    with pytest.raises(DomainError):
        theoretical_rates(DampingParams(1, 2), 0.0, 0)


def _trace(spectrum, params, grid, u0, u1, beta=1.0, k=1):
    return solve_linear(spectrum, params, InitialData(u0, u1, spectrum), grid, beta, k)


def test_verify_bound_passes_on_regular_data():
    sp = torus_1d(8)
    p = DampingParams(1, 3)
    rng = np.random.default_rng(11)
    u0 = rng.uniform(-1, 1, sp.size)
    u1 = rng.uniform(-1, 1, sp.size)
    u0[0] = u1[0] = 0.0
    coarse = TimeGrid.small_time_grid(20, 1000, 200)
    fine = TimeGrid.small_time_grid(20, 2000, 400)
    preds = theoretical_rates(p, 1.0, 1)
    rep = verify_bound(_trace(sp, p, coarse, u0, u1), preds, _trace(sp, p, fine, u0, u1))
    assert rep.all_passed, [(r.inequality, r.fitted_C, r.ratio_stability) for r in rep.rows]
    assert rep.delta == pytest.approx(0.5 * spectral_abscissa(sp.positive_part(), p))


def test_verify_bound_flags_zero_mode_exponential_claim():
    sp = torus_1d(4)
    p = DampingParams(1, 3)
    u1 = np.zeros(sp.size)
    u1[0] = 1.0
    g1, g2 = TimeGrid.uniform_grid(20, 400), TimeGrid.uniform_grid(20, 800)
    preds = strictly_positive_rates(p, 1.0, 1)
    rep = verify_bound(_trace(sp, p, g1, 0 * u1, u1), preds, _trace(sp, p, g2, 0 * u1, u1))
    by_name = {r.inequality: r for r in rep.rows}
    assert not by_name["sobolev-exp:u:t>=1"].passed
    assert by_name["sobolev-exp:u:t>=1"].diverging


def test_verify_bound_uncontrolled_channel_fails(tmp_path):
    sp = harmonic(4)
    p = DampingParams(2, 2)
    u0 = np.ones(sp.size)
    g1, g2 = TimeGrid.small_time_grid(5, 100, 50), TimeGrid.small_time_grid(5, 200, 100)
    preds = theoretical_rates(p, 1.0, 1)
    rep = verify_bound(_trace(sp, p, g1, u0, 0 * u0), preds, _trace(sp, p, g2, u0, 0 * u0))
    row = [r for r in rep.rows if r.inequality == "minimal:L^beta u:t<=1"][0]
    assert math.isinf(row.fitted_C) and not row.passed
    path = tmp_path / "rep.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "inequality,channel,fitted_C,ratio_stability,pass"
    assert any(",inf,inf,false" in line for line in lines)


def test_verify_bound_needs_small_times():
    sp = harmonic(2)
    p = DampingParams(1, 3)
    u0 = np.ones(sp.size)
    g = TimeGrid(np.linspace(1, 5, 20))
    tr = _trace(sp, p, g, u0, 0 * u0)
    with pytest.raises(DomainError, match="small-time"):
        verify_bound(tr, theoretical_rates(p, 1.0, 1), tr)
    with pytest.raises(DomainError, match="beta"):
        verify_bound(tr, theoretical_rates(p, 2.0, 1), tr)


def test_small_time_slope_with_flat_data():
    """Flat data is not uniformly bounded in H as N grows: ||u0|| ~ sqrt(2N+1)
    and the modes alive at time t have k <~ t^(-1/2), so the l2 slope of
    ||L^2 u|| tends to beta/theta + 1/4 = 9/4 while the normalized quantity
    t^2 ||L^2 u|| / ||u0|| stays below the scalar envelope constant."""
    p = DampingParams(1, 4)
    grid = TimeGrid(np.logspace(-3, -1, 200))
    ratios = []
    for N in (16, 64, 256, 2000):
        sp = torus_1d(N)
        tr = solve_linear(sp, p, InitialData(np.ones(sp.size), np.zeros(sp.size), sp), grid, beta=2.0)
        ratios.append(np.max(tr.t**2 * tr.norm_sobolev_beta) / math.sqrt(sp.size))
    slope = fit_polynomial_rate(tr.t, tr.norm_sobolev_beta, (1e-3, 1e-1)).rate
    assert slope == pytest.approx(2.25, rel=0.01)
    assert max(ratios) <= envelope_constant(2.0, 1.0)
