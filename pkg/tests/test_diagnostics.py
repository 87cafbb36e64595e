import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oseen_vvp.diagnostics import (ERROR_COLUMNS, DegenerateError, ErrorReport, dg_seminorm,
                                   enstrophy_oracle, enstrophy_palinstrophy, fit_rates, midline_profiles,
                                   write_diagnostics_csv, write_error_csv)
from oseen_vvp.driver import solve_steady, test1_scenario as make_test1_scenario
from oseen_vvp.fespace import SpaceKind, build_space, divergence_projection, project_l2
from oseen_vvp.mesh import generate_structured
from oseen_vvp.quadrature import triangle


def _reports(errors, h0=1.0):
    return [ErrorReport(h=h0 / 2**i, dofs=10 * 4**i, err_u=e, err_w=e, err_p=e, err_A=e)
            for i, e in enumerate(errors)]


@given(st.floats(0.1, 5.0), st.floats(1e-3, 10.0))
@settings(max_examples=30, deadline=None)
def test_fit_rates_exact_on_power_laws(rate, c):
    reps = _reports([c * 2.0 ** (-rate * i) for i in range(4)])
    for r in fit_rates(reps):
        assert np.isclose(r["err_u"], rate, rtol=1e-10)


def test_fit_rates_degenerate():
    with pytest.raises(DegenerateError):
        fit_rates(_reports([1.0]))
    with pytest.raises(DegenerateError):
        fit_rates(_reports([1.0, 0.0]))


def test_enstrophy_of_constant_and_linear_fields():
    m = generate_structured(4, 4)
    Q = build_space(m, SpaceKind.DISC, 0)
    e, p, ep, pp = enstrophy_palinstrophy(Q.function(np.full(Q.n_dofs, 2.0)), nu=0.5)
    assert np.isclose(e, 4.0) and p == 0 and np.isclose(ep, 8.0)
    Z = build_space(m, SpaceKind.LAGRANGE, 0)
    wl = Z.function(project_l2(Z, lambda x, y: 3.0 * x))
    e, p, _, _ = enstrophy_palinstrophy(wl, nu=1.0)
    assert np.isclose(p, 4.5) and np.isclose(e, 1.5)


def test_enstrophy_oracle_on_known_integral():
    # (1/2) int (sin(pi x) sin(pi y))^2 = 1/8
    val = enstrophy_oracle(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), nu=0.3, blocks=4, order=8)
    assert np.isclose(val, 0.125, rtol=1e-12)


def test_divergence_projection_matches_cellwise_divergence():
    m = generate_structured(3, 3)
    H, Q = build_space(m, SpaceKind.RT, 1), build_space(m, SpaceKind.DISC, 1)
    uh = H.function(np.random.default_rng(0).standard_normal(H.n_dofs))
    q = triangle(4)
    ph = Q.function(divergence_projection(uh, Q))
    assert np.allclose(ph.evaluate(q.points), uh.evaluate(q.points, what="div"), atol=1e-11)


def test_dg_seminorm_vanishes_for_continuous_fields():
    sc = make_test1_scenario()
    sol = solve_steady(sc, generate_structured(3, 3), 1, "dg")
    assert dg_seminorm(sol, sc.exact) > 0
    # a globally linear velocity with zero normal trace has no jumps: use the zero field
    sol.u.coeffs[:] = 0.0
    sol.p.coeffs[:] = 1.0
    assert np.isclose(dg_seminorm(sol), 0.0, atol=1e-14)


def test_midline_profiles():
    m = generate_structured(2, 2)
    Z = build_space(m, SpaceKind.LAGRANGE, 0)
    wl = Z.function(project_l2(Z, lambda x, y: x + y))
    pts, vals = midline_profiles(wl, (0.0, 0.5), (1.0, 0.5), 5)
    assert np.allclose(vals, pts.sum(1))
    assert midline_profiles(wl, (0, 0), (1, 1), 0)[1].size == 0


def test_csv_schemas(tmp_path):
    reps = _reports([1.0, 0.5, 0.25])
    fit_rates(reps)
    p = tmp_path / "e.csv"
    write_error_csv(p, reps)
    rows = list(csv.reader(open(p)))
    assert rows[0][:len(ERROR_COLUMNS)] == ERROR_COLUMNS
    assert len(rows) == 4 and rows[1][3] == ""
    q = tmp_path / "d.csv"
    write_diagnostics_csv(q, [])
    assert open(q).read().strip() == "t,E,P,E_phys,P_phys,div_linf"
