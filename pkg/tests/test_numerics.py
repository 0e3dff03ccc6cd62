import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xipsi.numerics import (
    Interval,
    NotBracketedError,
    PiecewisePoly,
    QuadratureError,
    find_root_bracketed,
    integrate_1d,
    isotonic_project,
    project_capped_simplex,
    project_capped_simplex_columns,
    std_normal_cdf,
    std_normal_quantile,
)


def erf_series(x: float, terms: int = 80) -> float:
    # Maclaurin series of erf, summed exactly enough for |x| < 3
    s = math.fsum((-1) ** k * x ** (2 * k + 1) / (math.factorial(k) * (2 * k + 1)) for k in range(terms))
    return 2.0 / math.sqrt(math.pi) * s


def phi_series(x: float) -> float:
    return 0.5 * (1.0 + erf_series(x / math.sqrt(2.0)))


# --- Interval -------------------------------------------------------------

def test_interval_rejects_bad_bounds():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    with pytest.raises(ValueError):
        Interval(0.0, math.inf)
    assert Interval(0.25, 1.0).width == 0.75


# --- integrate_1d ---------------------------------------------------------

def test_integrate_identity():
    assert integrate_1d(lambda x: x, Interval(0, 1), 1e-10) == pytest.approx(0.5, abs=1e-12)


def test_integrate_square():
    assert integrate_1d(lambda x: x * x, Interval(0, 1), 1e-10) == pytest.approx(1 / 3, abs=1e-12)


def test_integrate_reciprocal_matches_log2():
    assert integrate_1d(lambda x: 1 / x, Interval(0.5, 1), 1e-10) == pytest.approx(0.6931471805599453, abs=1e-10)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.floats(-2, 1), st.floats(0.1, 3))
def test_integrate_exact_on_cubics(coef, lo, width):
    hi = lo + width
    p = np.polynomial.Polynomial(coef)
    got = integrate_1d(lambda x: float(p(x)), Interval(lo, hi), 1e-9)
    P = p.integ()
    assert abs(got - (P(hi) - P(lo))) <= 1e-12 * max(1.0, abs(P(hi)) + abs(P(lo)))


def test_integrate_piecewise_with_points():
    f = lambda x: 1.0 if x < 0.3 else (0.0 if x < 0.71 else 2.0)
    got = integrate_1d(f, Interval(0, 1), 1e-12, points=[0.3, 0.71])
    assert got == pytest.approx(0.3 + 2 * 0.29, abs=1e-12)


def test_integrate_reports_failure_with_estimate():
    with pytest.raises(QuadratureError) as ei:
        integrate_1d(lambda x: math.sin(1 / x) / x, Interval(1e-9, 1), 1e-12, max_depth=8)
    assert math.isfinite(ei.value.estimate)
    assert ei.value.achieved > ei.value.requested


# --- find_root_bracketed --------------------------------------------------

def test_root_linear():
    assert find_root_bracketed(lambda x: x - 0.5, Interval(0, 1)) == pytest.approx(0.5, abs=1e-12)


def test_root_cubic_at_endpoint():
    # mu^3 - (4 + 2y) mu^2 - (4 + 8y) mu - 8y at y = -1/2 is mu^3 - 3 mu^2 + 4
    f = lambda m: m**3 - 3 * m**2 + 4
    assert find_root_bracketed(f, Interval(0, 2)) == 2.0


def test_root_sqrt2():
    assert find_root_bracketed(lambda x: x * x - 2, Interval(1, 2)) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_root_not_bracketed():
    with pytest.raises(NotBracketedError):
        find_root_bracketed(lambda x: x * x + 1, Interval(-1, 1))


# --- normal functions -----------------------------------------------------

def test_normal_cdf_symmetry_and_quantile_center():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_quantile(0.5) == 0.0


def test_normal_cdf_at_975_quantile():
    assert std_normal_cdf(1.959963985) == pytest.approx(0.975, abs=1e-9)
    assert phi_series(1.959963985) == pytest.approx(0.975, abs=1e-9)


@settings(max_examples=200)
@given(st.floats(-2.8, 2.8))
def test_normal_cdf_against_erf_series(x):
    assert abs(float(std_normal_cdf(x)) - phi_series(x)) <= 1e-10


@settings(max_examples=200)
@given(st.floats(0.005, 0.995))
def test_normal_quantile_inverts_series_cdf(p):
    x = float(std_normal_quantile(p))
    assert abs(phi_series(x) - p) <= 1e-10


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_normal_quantile_domain(p):
    with pytest.raises(ValueError):
        std_normal_quantile(p)


# --- PiecewisePoly --------------------------------------------------------

def test_piecewise_poly_eval_and_antiderivative():
    pp = PiecewisePoly([0, 0.5, 1], [[0, 1], [1, -1]], continuous=True)  # tent
    assert float(pp(0.25)) == 0.25
    assert float(pp(0.75)) == 0.25
    assert pp.integral() == pytest.approx(0.25, abs=1e-15)
    A = pp.antiderivative()
    assert float(A(0.5)) == pytest.approx(0.125, abs=1e-15)
    assert float(pp.derivative()(0.7)) == -1.0


def test_piecewise_poly_continuity_flag():
    with pytest.raises(ValueError):
        PiecewisePoly([0, 0.5, 1], [[0, 1], [0, 0]], continuous=True)


def test_piecewise_poly_degree_limit():
    with pytest.raises(ValueError):
        PiecewisePoly([0, 1], [[0, 0, 0, 0, 1]])


# --- capped simplex -------------------------------------------------------

def test_capped_simplex_feasible_fixed_point():
    np.testing.assert_allclose(project_capped_simplex([0.2, 0.2, 0.2], 0.2), [0.2, 0.2, 0.2], atol=1e-12)


def test_capped_simplex_clipping():
    np.testing.assert_allclose(project_capped_simplex([2, 2, 2], 1.0), [1, 1, 1], atol=1e-12)


def test_capped_simplex_two_point_grid_oracle():
    x = np.array([0.0, 1.0])
    y = project_capped_simplex(x, 0.5)
    # feasible set is the segment y0 + y1 = 1 in the box; search it densely
    s = np.linspace(0, 1, 100001)
    cand = np.stack([s, 1 - s], axis=1)
    best = cand[np.argmin(((cand - x) ** 2).sum(axis=1))]
    np.testing.assert_allclose(y, best, atol=1e-5)
    np.testing.assert_allclose(y, [0, 1], atol=1e-12)


@settings(max_examples=150)
@given(arrays(float, st.integers(1, 30), elements=st.floats(-3, 3)), st.floats(0, 1))
def test_capped_simplex_constraints(x, target):
    y = project_capped_simplex(x, target)
    assert y.min() >= 0 and y.max() <= 1
    assert abs(y.mean() - target) <= 1e-12
    # optimality: y = clip(x + lam) for a single shift on the free coordinates
    free = (y > 1e-12) & (y < 1 - 1e-12)
    if free.sum() >= 2:
        shifts = (y - x)[free]
        assert shifts.max() - shifts.min() <= 1e-9
    np.testing.assert_allclose(project_capped_simplex(y, target), y, atol=1e-12)


def test_capped_simplex_columns_matches_vector_version():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(9, 5))
    t = rng.uniform(size=5)
    Y = project_capped_simplex_columns(X, t)
    for j in range(5):
        np.testing.assert_allclose(Y[:, j], project_capped_simplex(X[:, j], t[j]), atol=1e-14)


def test_capped_simplex_rejects_bad_target():
    with pytest.raises(ValueError):
        project_capped_simplex([0.5, 0.5], 1.5)


# --- isotonic -------------------------------------------------------------

def test_isotonic_sorted_is_fixed():
    np.testing.assert_array_equal(isotonic_project([1, 2, 3]), [1, 2, 3])


def test_isotonic_pair():
    np.testing.assert_allclose(isotonic_project([3, 1]), [2, 2])


def test_isotonic_grid_search_oracle():
    x = np.array([1.0, 3.0, 2.0, 4.0])
    got = isotonic_project(x)
    vals = np.round(np.arange(0.5, 4.5001, 0.1), 10)
    best, best_d = None, np.inf
    for c in itertools.combinations_with_replacement(vals, 4):
        d = float(np.sum((np.array(c) - x) ** 2))
        if d < best_d:
            best, best_d = c, d
    np.testing.assert_allclose(best, [1, 2.5, 2.5, 4], atol=1e-12)
    np.testing.assert_allclose(got, best, atol=1e-12)


vectors = arrays(float, st.integers(1, 25), elements=st.floats(-10, 10))


@settings(max_examples=200)
@given(vectors)
def test_isotonic_monotone_idempotent_and_matches_scipy(x):
    from scipy.optimize import isotonic_regression

    y = isotonic_project(x)
    assert np.all(np.diff(y) >= -1e-12)
    np.testing.assert_allclose(isotonic_project(y), y, atol=1e-12)
    np.testing.assert_allclose(y, isotonic_regression(x).x, atol=1e-9)


@settings(max_examples=200)
@given(st.integers(1, 20).flatmap(lambda n: st.tuples(*[arrays(float, n, elements=st.floats(-5, 5))] * 3)))
def test_isotonic_firmly_nonexpansive(triple):
    x, z, w = triple
    px, pz = isotonic_project(x), isotonic_project(z)
    # firm nonexpansiveness: |Px - Pz|^2 <= <Px - Pz, x - z>
    assert np.sum((px - pz) ** 2) <= np.dot(px - pz, x - z) + 1e-9
    # no monotone vector gets farther away after projection
    m = np.sort(w)
    assert np.linalg.norm(px - m) <= np.linalg.norm(x - m) + 1e-9
