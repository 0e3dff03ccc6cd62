import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cvxopt_oracle, random_si_grid
from xipsi import optimize
from xipsi.boundary import jensen_floor
from xipsi.gridcop import midpoints, psi_grid, xi_grid
from xipsi.optimize import (
    QPConvergenceError,
    QPProblem,
    feasibility_residual,
    grid_search_extremizer,
    qp_density_export,
    qp_objective,
    qp_solve,
    refine_search,
    table1,
    table2,
)


# --- problem and objective ------------------------------------------------

def test_problem_validation():
    with pytest.raises(ValueError):
        QPProblem(-1.0, 8)
    with pytest.raises(ValueError):
        QPProblem(1.0, 1)


def test_objective_independence_examples():
    n = 200
    v = midpoints(n)
    h = np.tile(v, (n, 1))
    assert qp_objective(QPProblem(0.0, n), h) == pytest.approx(6 * np.mean(v**2), abs=1e-15)
    assert qp_objective(QPProblem(0.0, n), h) == pytest.approx(2.0, abs=1e-4)
    assert qp_objective(QPProblem(1.0, n), h) == pytest.approx(4.0, abs=1e-2)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 3))
def test_objective_matches_measures_identity(seed, mu):
    G = random_si_grid(np.random.default_rng(seed), 40)
    got = qp_objective(QPProblem(mu, 40), G.h)
    assert abs(got - (mu * (psi_grid(G) + 2) + xi_grid(G) + 2)) <= 1e-13


# --- solver ---------------------------------------------------------------

def test_mu_zero_recovers_independence():
    sol = qp_solve(QPProblem(0.0, 16))
    v = midpoints(16)
    np.testing.assert_allclose(sol.h.h, np.tile(v, (16, 1)), atol=1e-6)
    assert sol.objective == pytest.approx(6 * np.mean(v**2), abs=1e-12)
    assert sol.feasibility_residual <= 1e-8


def test_small_problem_matches_interior_point_oracle():
    sol = qp_solve(QPProblem(1.0, 4))
    oracle = cvxopt_oracle(1.0, 4)
    assert sol.objective == pytest.approx(oracle, abs=1e-5)
    assert sol.objective == pytest.approx(3.77734375, abs=1e-9)


@pytest.mark.parametrize("mu", [0.5, 2.0])
def test_interior_point_oracle_n6(mu):
    assert qp_solve(QPProblem(mu, 6)).objective == pytest.approx(cvxopt_oracle(mu, 6), abs=1e-6)


@pytest.mark.parametrize("n", [32, 64])
@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5, 2.0])
def test_solution_respects_jensen_floor(mu, n):
    sol = qp_solve(QPProblem(mu, n))
    assert sol.feasibility_residual <= 1e-8
    assert sol.objective - (2 + 2 * mu) >= jensen_floor(mu) - 10 / n
    assert sol.psi <= math.sqrt(max(sol.xi, 0.0)) + 10 / n


def test_solution_is_feasible_and_below_independence():
    p = QPProblem(1.5, 32)
    sol = qp_solve(p)
    assert feasibility_residual(sol.h.h, p.v) <= 1e-8
    assert sol.objective < qp_objective(p, np.tile(p.v, (32, 1)))


def test_solver_is_deterministic():
    a = qp_solve(QPProblem(1.3, 24))
    b = qp_solve(QPProblem(1.3, 24))
    np.testing.assert_array_equal(a.h.h, b.h.h)
    assert a.log == b.log


def test_debug_mode_checks_descent_with_short_steps():
    sol = qp_solve(QPProblem(1.0, 16), step_scale=0.5, max_iters=2000, debug=True)
    objs = [o for _, o, f in sol.log if f <= 1e-8]
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))
    assert sol.objective == pytest.approx(qp_solve(QPProblem(1.0, 16)).objective, abs=1e-8)


def test_non_convergence_carries_best_iterate():
    with pytest.raises(QPConvergenceError) as ei:
        qp_solve(QPProblem(2.0, 16), max_iters=1, max_sweeps=2)
    best = ei.value.best
    assert best.h.h.shape == (16, 16)
    assert math.isfinite(best.objective)
    assert best.iterations == 1


def test_step_scale_validation():
    with pytest.raises(ValueError):
        qp_solve(QPProblem(1.0, 8), step_scale=1.5)


# --- density export -------------------------------------------------------

def test_density_of_independence_is_one():
    c = qp_density_export(qp_solve(QPProblem(0.0, 32))).c
    np.testing.assert_allclose(c, 1.0, atol=1e-4)


def test_density_mass_and_band():
    sol = qp_solve(QPProblem(2.0, 128))
    d = qp_density_export(sol)
    assert d.c.mean() == pytest.approx(1.0, abs=1e-6)
    assert d.c.min() >= 0
    assert (d.c < 0.05).mean() > 0.1
    # the empty cells sit around the diagonal
    n = 128
    i, j = np.nonzero(d.c < 0.05)
    assert np.median(np.abs(i - j)) < n / 4


# --- grid searches --------------------------------------------------------

def test_search_frechet():
    r = grid_search_extremizer("frechet", "max_psi_minus_xi", np.arange(0, 1.0001, 0.002))
    assert r.param == pytest.approx(0.5, abs=1e-12)
    assert r.value == pytest.approx(0.25, abs=1e-12)
    assert (r.xi, r.psi) == pytest.approx((0.25, 0.5), abs=1e-12)


def test_search_gaussian():
    r = grid_search_extremizer("gaussian", "max_psi_minus_xi", np.arange(0, 1, 0.002))
    assert r.param == pytest.approx(0.614, abs=0.01)
    assert r.value == pytest.approx(0.172, abs=0.005)


def test_search_cdown():
    # the minimum of xi + psi along the Jensen family sits at mu = 1
    r = grid_search_extremizer("cdown", "min_psi_plus_xi", np.arange(0, 2.0001, 0.002))
    assert r.param == pytest.approx(1.0, abs=0.002)
    assert r.value == pytest.approx(0.171136852853528 - 7 / 18, abs=1e-9)


def test_search_ties_go_to_smallest_parameter():
    r = grid_search_extremizer("frechet", "max_psi_minus_xi", [0.75, 0.25, 0.5 + 0.25])
    assert r.param == 0.25


def test_search_threads_do_not_change_result():
    grid = np.arange(0.5, 3.0, 0.25)
    a = grid_search_extremizer("clayton", "max_psi_minus_xi", grid, n=200, threads=1)
    b = grid_search_extremizer("clayton", "max_psi_minus_xi", grid, n=200, threads=4)
    assert a == b


def test_search_validation():
    with pytest.raises(ValueError):
        grid_search_extremizer("clayton", "max_psi_minus_xi", [1.0], n=100)
    with pytest.raises(ValueError):
        grid_search_extremizer("frechet", "maximize", [0.5])
    with pytest.raises(ValueError):
        grid_search_extremizer("nope", "max_psi_minus_xi", [0.5], n=200)
    with pytest.raises(ValueError):
        grid_search_extremizer("frechet", "max_psi_minus_xi", [])


def test_refine_search_frechet():
    r = refine_search("lower_frechet", "min_psi_plus_xi", 0.0, 1.0, 0.05)
    assert r.param == pytest.approx(0.25, abs=1e-12)
    assert (r.xi, r.psi, r.value) == pytest.approx((0.0625, -0.125, -0.0625), abs=1e-12)


def test_steps_include_ends_and_are_rounded():
    s = optimize._steps(0.002, 0.01, 0.002)
    np.testing.assert_array_equal(s, [0.002, 0.004, 0.006, 0.008, 0.01])
    s = optimize._steps(-0.99, -0.9, 0.05)
    assert s[0] == -0.99 and s[-1] == -0.9 and -0.95 in s


# --- tables ---------------------------------------------------------------

def test_table_rows_closed_form_families():
    rows = {r.family: r for r in table1(only=["frechet"]) + table2(only=["lower_frechet"])}
    f = rows["Frechet"]
    assert (f.param, f.xi, f.psi, f.value) == pytest.approx((0.5, 0.25, 0.5, 0.25), abs=1e-12)
    lf = rows["Lower Frechet"]
    assert (lf.param, lf.xi, lf.psi, lf.value) == pytest.approx((0.25, 0.0625, -0.125, -0.0625), abs=1e-12)


@pytest.mark.slow
def test_table2_gumbel_row_is_independence():
    (r,) = table2(n=200, only=["gumbel"])
    assert r.param == 1.0
    assert (r.xi, r.psi) == pytest.approx((0.0, 0.0), abs=10 / 200)


def test_table_marks_failing_family_and_continues(monkeypatch):
    real = optimize.refine_search

    def flaky(family, *args, **kw):
        if family == "gaussian":
            raise RuntimeError("evaluation blew up")
        return real(family, *args, **kw)

    monkeypatch.setattr(optimize, "refine_search", flaky)
    rows = table1(only=["frechet", "gaussian"])
    by = {r.family: r for r in rows}
    assert by["Gaussian"].status == "error" and "blew up" in by["Gaussian"].message
    assert by["Gaussian"].to_dict()["param"] is None
    assert by["Frechet"].status == "ok"
