import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from structdamp import (
    DampingParams,
    DomainError,
    InitialData,
    NonContractionError,
    NonlinearitySpec,
    TimeGrid,
    duhamel_convolve,
    eval_e0,
    eval_e1,
    from_list,
    norm_h,
    norm_sobolev,
    oracle_solve_mode,
    read_trace_csv,
    solve_linear,
    solve_semilinear_picard,
    torus_1d,
    torus_realization,
    xkbeta_norm,
)
from structdamp.evolution import rk4_linear_modes


def test_time_grids():
    g = TimeGrid.uniform_grid(2.0, 4)
    assert g.uniform and g.step == 0.5 and len(g) == 5
    s = TimeGrid.small_time_grid(5.0, 8, 10)
    assert not s.uniform and s.points[0] == pytest.approx(1e-3) and s.points[-1] == 5.0
    assert np.all(np.diff(s.points) > 0)
    with pytest.raises(DomainError):
        TimeGrid([0.0, 1.0, 1.0])
    with pytest.raises(DomainError):
        TimeGrid([-1.0, 1.0])
    with pytest.raises(DomainError):
        s.step


def test_initial_data_validation():
    sp = torus_1d(2)
    with pytest.raises(DomainError, match="u0_hat"):
        InitialData(np.zeros(4), np.zeros(5), sp)
    with pytest.raises(DomainError):
        InitialData(np.full(5, np.nan), np.zeros(5), sp)
    with pytest.raises(DomainError):
        NonlinearitySpec("cubic")


def test_norms():
    sp = from_list([0.0, 1.0, 4.0])
    c = np.array([3.0, 1.0, 2.0])
    assert norm_h(c) == pytest.approx(math.sqrt(14))
    # ||L^beta u|| uses weights lambda^(2 beta): s = 2 beta
    assert norm_sobolev(c, sp, 2.0) == pytest.approx(math.sqrt(1 + 16 * 4))
    assert norm_sobolev(c, sp, 0.0) == pytest.approx(norm_h(c))


def test_zero_data_gives_zero_trace():
    sp = torus_1d(3)
    d = InitialData(np.zeros(sp.size), np.zeros(sp.size), sp)
    tr = solve_linear(sp, DampingParams(1, 2), d, TimeGrid.uniform_grid(3, 30))
    assert not np.any(tr.norm_h) and not np.any(tr.norm_dt_k) and not np.any(tr.norm_sobolev_beta)


def test_single_mode_closed_form():
    sp = from_list([1.0])
    p = DampingParams(1, 2)
    d = InitialData(np.array([0.7]), np.array([-0.2]), sp)
    g = TimeGrid.uniform_grid(6, 60)
    tr = solve_linear(sp, p, d, g, beta=1.5, k=1)
    t = g.points
    # lambda = 1: tau = -1/2 +/- i sqrt(3)/2
    w = math.sqrt(3) / 2
    u = np.exp(-t / 2) * (0.7 * (np.cos(w * t) + np.sin(w * t) / (2 * w)) - 0.2 * np.sin(w * t) / w)
    np.testing.assert_allclose(tr.norm_h, np.abs(u), atol=1e-14)
    np.testing.assert_allclose(tr.norm_sobolev_beta, np.abs(u), atol=1e-14)


def test_zero_mode_velocity_grows_linearly():
    sp = torus_1d(2)
    u1 = np.zeros(sp.size)
    u1[0] = 0.3
    tr = solve_linear(sp, DampingParams(0.5, 2), InitialData(np.zeros(sp.size), u1, sp), TimeGrid.uniform_grid(10, 10))
    np.testing.assert_allclose(tr.norm_h, 0.3 * tr.t, rtol=1e-14)
    np.testing.assert_allclose(tr.norm_dt_k, 0.3, rtol=1e-14)


def test_trace_csv_roundtrip(tmp_path):
    sp = torus_1d(3)
    rng = np.random.default_rng(5)
    d = InitialData(rng.uniform(-1, 1, sp.size), rng.uniform(-1, 1, sp.size), sp)
    tr = solve_linear(sp, DampingParams(1, 3), d, TimeGrid.uniform_grid(2, 20), beta=2.0, k=2)
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    text = path.read_text()
    assert text.splitlines()[0] == "t,norm_h,norm_sobolev_beta,norm_dt_k"
    assert len(text.splitlines()) == 22
    back = read_trace_csv(path)
    for name in ("t", "norm_h", "norm_sobolev_beta", "norm_dt_k"):
        np.testing.assert_array_equal(back[name], tr.column(name))


def test_read_trace_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,norm_h,norm_dt_k\n0,1,1\n")
    with pytest.raises(DomainError, match="norm_sobolev_beta"):
        read_trace_csv(p)
    p.write_text("t,norm_h,norm_sobolev_beta,norm_dt_k\n0,1,x,1\n")
    with pytest.raises(DomainError, match=":2:"):
        read_trace_csv(p)


def test_rk4_oracle_against_closed_form():
    g = TimeGrid.uniform_grid(4, 40)
    p = DampingParams(1, 3)
    y = oracle_solve_mode(2.0, p, 1.0, 0.0, g, dt=1e-3)
    np.testing.assert_allclose(y, eval_e0(2.0, p, g.points), atol=1e-11)
    with pytest.raises(DomainError):
        rk4_linear_modes(1.0, 1.0, 1.0, 0.0, g, dt=0.5)


def test_duhamel_constant_forcing_all_orders():
    lam, p = 2.0, DampingParams(1, 3)
    b = lam**p.sigma
    sp = from_list([lam])
    g = TimeGrid.uniform_grid(5, 4000)
    F = np.ones((len(g), 1))
    t = g.points
    exact = [(1 - eval_e0(lam, p, t)) / b, eval_e1(lam, p, t)]
    for order, ex in enumerate(exact):
        np.testing.assert_allclose(duhamel_convolve(sp, p, F, g, order)[:, 0], ex, atol=2e-6)
    # order 2 includes the forcing itself: u'' = f - damping u' - b u
    u2 = duhamel_convolve(sp, p, F, g, 2)[:, 0]
    np.testing.assert_allclose(u2, 1 - lam**p.theta * exact[1] - b * exact[0], atol=5e-6)
    with pytest.raises(DomainError):
        duhamel_convolve(sp, p, F, g, 3)


def test_picard_linear_shortcuts():
    r = torus_realization(4, 16)
    sp = r.spectrum
    rng = np.random.default_rng(2)
    d = InitialData(rng.uniform(-1, 1, sp.size), rng.uniform(-1, 1, sp.size), sp)
    g = TimeGrid.uniform_grid(4, 400)
    lin = solve_linear(sp, DampingParams(1, 2), d, g)
    tr, rep = solve_semilinear_picard(r, DampingParams(1, 2), d, NonlinearitySpec(), g)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_array_equal(tr.norm_h, lin.norm_h)
    tr, rep = solve_semilinear_picard(r, DampingParams(1, 2), d, NonlinearitySpec("pointwise_power", 3, 0.0), g)
    assert rep.converged
    np.testing.assert_array_equal(tr.norm_h, lin.norm_h)
    np.testing.assert_array_equal(tr.norm_dt_k, lin.norm_dt_k)


def test_picard_matches_ode_solver_on_one_mode():
    """Modewise cubic on a single mode against scipy's adaptive integrator."""
    lam, p, mu = 2.0, DampingParams(1, 2), 0.5
    sp = from_list([lam])
    d = InitialData(np.array([0.4]), np.array([0.1]), sp)
    g = TimeGrid.uniform_grid(6, 6000)
    tr, rep = solve_semilinear_picard(None, p, d, NonlinearitySpec("modewise_power", 3, mu), g, tol=1e-13)
    assert rep.converged and rep.contraction_factor < 1

    def rhs(t, y):
        return [y[1], -lam * y[1] - lam**2 * y[0] + mu * abs(y[0]) ** 2 * y[0]]

    sol = solve_ivp(rhs, (0, 6), [0.4, 0.1], t_eval=g.points, rtol=1e-12, atol=1e-14, method="DOP853")
    np.testing.assert_allclose(tr.coefficients[:, 0], sol.y[0], atol=1e-6)
    np.testing.assert_allclose(tr.dt_coefficients[:, 0], sol.y[1], atol=1e-6)


def test_picard_large_data_raises_with_report():
    r = torus_realization(4, 16)
    sp = r.spectrum
    u0 = np.random.default_rng(3).uniform(-1, 1, sp.size)
    d = InitialData(10 * u0 / norm_h(u0), np.zeros(sp.size), sp)
    with pytest.raises(NonContractionError) as info:
        solve_semilinear_picard(r, DampingParams(1, 2), d, NonlinearitySpec("pointwise_power", 3, 1.0), TimeGrid.uniform_grid(10, 1000))
    rep = info.value.report
    assert not rep.converged and rep.contraction_factor > 1
    assert set(rep.as_dict()) >= {"iterations", "differences", "contraction_factor", "converged"}


def test_picard_input_checks(caplog):
    r = torus_realization(4, 10)
    sp = r.spectrum
    d = InitialData(np.full(sp.size, 1e-4), np.zeros(sp.size), sp)
    nl = NonlinearitySpec("pointwise_power", 3, 1.0)
    with pytest.raises(DomainError):
        solve_semilinear_picard(r, DampingParams(1, 2), d, nl, TimeGrid.small_time_grid(3, 10, 10))
    with pytest.raises(DomainError):
        solve_semilinear_picard(None, DampingParams(1, 2), d, nl, TimeGrid.uniform_grid(1, 10))
    with caplog.at_level("WARNING"):
        solve_semilinear_picard(r, DampingParams(1, 2), d, nl, TimeGrid.uniform_grid(1, 10))
    assert "aliases" in caplog.text or "alias" in caplog.text


def test_xkbeta_norm():
    sp = from_list([1.0])
    d = InitialData(np.array([1.0]), np.array([0.0]), sp)
    tr = solve_linear(sp, DampingParams(1, 2), d, TimeGrid.uniform_grid(10, 100))
    val = xkbeta_norm(tr, 0.25)
    assert val >= 2.0  # t = 0 alone contributes |u| + |L u| + |u'| = 1 + 1 + 0
    assert val == pytest.approx(np.max(np.exp(0.25 * tr.t) * (tr.norm_h + tr.norm_sobolev_beta + tr.norm_dt_k)))
    with pytest.raises(DomainError):
        xkbeta_norm(tr, 0.0)
    with pytest.raises(DomainError):
        xkbeta_norm(tr, 0.2, beta=2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 20.0), st.floats(0.0, 1.5), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity_and_rk4_agreement(lam, theta, u0, u1):
    p = DampingParams(theta, max(theta, 1.0))
    g = TimeGrid.uniform_grid(2, 20)
    sp = from_list([lam])
    tr = solve_linear(sp, p, InitialData(np.array([u0]), np.array([u1]), sp), g, k=1)
    y = oracle_solve_mode(lam, p, u0, u1, g, dt=5e-4)
    scale = max(1.0, abs(u0) * lam ** (p.sigma / 2), abs(u1))
    np.testing.assert_allclose(tr.coefficients[:, 0], y, atol=1e-8 * scale)
