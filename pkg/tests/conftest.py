"""Shared fixtures: random SI copula generators and the acceptance log."""

from __future__ import annotations

import numpy as np
import pytest

from xipsi.families import EqualityClassCopula, FrechetMixture, OrdinalSumPi
from xipsi.gridcop import GridCopula, grid_from_partial
from xipsi.numerics import Interval, integrate_1d

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance check and return the verdict."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def random_si_piece(rng: np.random.Generator):
    """A random SI copula from the Frechet, ordinal-sum or equality classes.

    Returns ``(partial, jumps)``: the vectorized partial derivative and a
    function giving, for fixed ``v``, the points where ``partial(., v)``
    jumps besides ``t = v``.  Between jumps the partial is constant in ``t``.
    """
    kind = rng.integers(3)
    if kind == 0:
        return FrechetMixture.upper(float(rng.uniform())).partial, lambda v: []
    if kind == 1:
        k = int(rng.integers(1, 4))
        cuts = np.sort(rng.uniform(size=2 * k))
        ends = cuts.tolist()
        return OrdinalSumPi(tuple(zip(cuts[::2], cuts[1::2]))).partial, lambda v: ends
    p = float(rng.uniform(1.0, 4.0))
    q = float(rng.uniform(1.0, 4.0))
    lam = float(rng.uniform())
    A = lambda v: lam * v**p
    B = lambda v: v ** (1.0 / q)
    return EqualityClassCopula(A, B).partial, lambda v: [A(v), B(v)]


def random_si_component(rng: np.random.Generator):
    """Partial derivative of a random SI copula, see :func:`random_si_piece`."""
    return random_si_piece(rng)[0]


def random_si_grid(rng: np.random.Generator, n: int) -> GridCopula:
    """Convex combination of two or three random SI components on an ``n``-grid."""
    m = int(rng.integers(2, 4))
    w = rng.dirichlet(np.ones(m))
    hs = [grid_from_partial(random_si_component(rng), n).h for _ in range(m)]
    return GridCopula(sum(wi * hi for wi, hi in zip(w, hs)))


def random_si_combination(rng: np.random.Generator):
    """Dirichlet weights and two or three :func:`random_si_piece` components."""
    m = int(rng.integers(2, 4))
    w = rng.dirichlet(np.ones(m))
    return w, [random_si_piece(rng) for _ in range(m)]


def combination_grid(w, pieces, n: int) -> GridCopula:
    return GridCopula(sum(wk * grid_from_partial(p, n).h for wk, (p, _) in zip(w, pieces)))


def combination_measures(w, pieces, tol: float = 1e-10) -> tuple[float, float]:
    """(xi, psi) of a mixture of step-in-t components by iterated integration.

    For fixed ``v`` the mixed partial is piecewise constant in ``t``, so the
    inner integrals are exact sums; the outer one is adaptive.
    """

    def cells(v):
        pts = {0.0, 1.0, v}
        for _, jumps in pieces:
            pts.update(x for x in jumps(v) if 0.0 < x < 1.0)
        b = np.array(sorted(pts))
        mid = 0.5 * (b[:-1] + b[1:])
        h = sum(wk * np.asarray(p(mid, v), dtype=float) for wk, (p, _) in zip(w, pieces))
        return b, h

    def sq(v):
        b, h = cells(v)
        return float(np.dot(np.diff(b), h * h))

    def lin(v):
        b, h = cells(v)
        keep = b[1:] <= v
        return float(np.dot(np.diff(b)[keep], h[keep]))

    # ordinal-sum endpoints do not move with v and are kinks of the outer integrand
    kinks = sorted({x for _, jumps in pieces for x in jumps(0.25) if x in jumps(0.75)})
    unit = Interval(0.0, 1.0)
    return 6.0 * integrate_1d(sq, unit, tol, points=kinks) - 2.0, 6.0 * integrate_1d(lin, unit, tol, points=kinks) - 2.0


def strip_u_breaks(sc, tau):
    """Kinks of ``u -> c(u, v)`` on the fiber with ``F_T^{-1}(v) = tau``."""
    pts = [sc.alpha, 1 - sc.alpha, sc.alpha + tau / sc.k, sc.alpha + (tau - sc.beta) / sc.k]
    return sorted(p for p in pts if 0 < p < 1)


def strip_v_breaks(sc, u):
    """Kinks of ``v -> c(u, v)`` on the fiber at ``u``."""
    p = float(sc.psi_s(u))
    ts = [p, p + sc.beta, sc.beta, 1 - sc.beta]
    return sorted(float(sc.FT(t)) for t in ts if 0 < t < 1)


def cvxopt_oracle(mu: float, n: int) -> float:
    """Optimal objective of the discretized program from an interior-point QP solve."""
    cvxopt = pytest.importorskip("cvxopt")
    from xipsi.gridcop import midpoints
    from xipsi.optimize import QPProblem, qp_objective

    cvxopt.solvers.options.update(show_progress=False, abstol=1e-12, reltol=1e-12, feastol=1e-12)
    N = n * n
    idx = np.arange(N).reshape(n, n)
    mask = QPProblem(mu, n).mask.ravel()
    P = 12.0 / N * np.eye(N)
    q = 6.0 * mu / N * mask
    rows = [-np.eye(N), np.eye(N)]
    for i in range(n):
        for j in range(n - 1):
            r = np.zeros(N)
            r[idx[i, j]], r[idx[i, j + 1]] = 1.0, -1.0
            rows.append(r[None, :])
    G = np.vstack(rows)
    hvec = np.concatenate([np.zeros(N), np.ones(N), np.zeros(n * (n - 1))])
    A = np.zeros((n, N))
    for j in range(n):
        A[j, idx[:, j]] = 1.0
    b = n * midpoints(n)
    m = lambda x: cvxopt.matrix(np.asarray(x, dtype=float))
    sol = cvxopt.solvers.qp(m(P), m(q), m(G), m(hvec), m(A), m(b))
    assert sol["status"] == "optimal"
    x = np.array(sol["x"]).ravel()
    return qp_objective(QPProblem(mu, n), x.reshape(n, n))
