"""Discretized lower-boundary program and parameter searches over families.

The program minimizes ``6 * mean(mu * mask * h + h**2)`` over conditional
distribution fields ``h`` on an ``n x n`` midpoint grid subject to

* ``0 <= h <= 1``,
* ``mean_i h[i, j] = v_j`` for every column,
* ``h[i, :]`` non-decreasing in ``j``.

The objective equals ``mu * (psi + 2) + (xi + 2)`` of the grid copula.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .families import (
    PARAMETRIC_FAMILIES,
    FrechetMixture,
    ParametricCopula,
    cdown_measures,
    frechet_measures,
    gaussian_measures,
)
from .gridcop import GridCopula, diagonal_mask, grid_from_partial, midpoints, psi_grid, xi_grid
from .numerics import isotonic_project, project_capped_simplex_columns

log = logging.getLogger(__name__)

__all__ = [
    "QPProblem",
    "QPSolution",
    "QPConvergenceError",
    "DensityExport",
    "SearchResult",
    "TableRow",
    "qp_objective",
    "qp_solve",
    "qp_density_export",
    "feasibility_residual",
    "measure_evaluator",
    "grid_search_extremizer",
    "refine_search",
    "table1",
    "table2",
    "TABLE1_FAMILIES",
    "TABLE2_FAMILIES",
]


@dataclass(frozen=True)
class QPProblem:
    mu: float
    n: int

    def __post_init__(self):
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be a finite nonnegative number, got {self.mu!r}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n!r}")

    @property
    def mask(self) -> np.ndarray:
        return diagonal_mask(self.n)

    @property
    def v(self) -> np.ndarray:
        return midpoints(self.n)


@dataclass
class QPSolution:
    h: GridCopula
    objective: float
    iterations: int
    feasibility_residual: float
    stationarity_residual: float
    log: list = field(default_factory=list)

    @property
    def xi(self) -> float:
        return xi_grid(self.h)

    @property
    def psi(self) -> float:
        return psi_grid(self.h)


class QPConvergenceError(RuntimeError):
    """Raised when ``qp_solve`` exhausts its iteration budget.

    ``best`` holds the feasible-most iterate seen, as a :class:`QPSolution`.
    """

    def __init__(self, message: str, best: QPSolution):
        super().__init__(message)
        self.best = best


def qp_objective(p: QPProblem, h) -> float:
    h = np.asarray(h, dtype=float)
    return 6.0 * float(np.mean(p.mu * p.mask * h + h * h))


def feasibility_residual(h: np.ndarray, v: np.ndarray) -> float:
    """Largest violation among the box, column-mean and row-monotonicity constraints."""
    box = max(0.0, float(-h.min()), float(h.max() - 1.0))
    col = float(np.max(np.abs(h.mean(axis=0) - v)))
    mono = max(0.0, float(-np.diff(h, axis=1).min())) if h.shape[1] > 1 else 0.0
    return max(col, box, mono)


def _project_rows(X: np.ndarray) -> np.ndarray:
    # onto {non-decreasing along j} intersected with the box: clip after PAV
    return np.clip(np.stack([isotonic_project(r) for r in X]), 0.0, 1.0)


class _Dykstra:
    """Dykstra alternation for the projection of a fixed point ``y``.

    The state (iterate and the two correction terms) persists between calls so
    that repeated projections of the same ``y`` resume where they stopped.
    """

    def __init__(self, y: np.ndarray, v: np.ndarray):
        self.y = y.copy()
        self.v = v
        self.x = y.copy()
        self.p = np.zeros_like(y)
        self.q = np.zeros_like(y)
        self.sweeps = 0
        self.converged = False

    def run(self, max_sweeps: int, tol: float) -> np.ndarray:
        for _ in range(max_sweeps):
            a = project_capped_simplex_columns(self.x + self.p, self.v)
            self.p = self.x + self.p - a
            b = _project_rows(a + self.q)
            self.q = a + self.q - b
            change = float(np.max(np.abs(b - self.x)))
            self.x = b
            self.sweeps += 1
            if change <= tol and feasibility_residual(b, self.v) <= tol:
                self.converged = True
                break
        return self.x


def qp_solve(
    p: QPProblem,
    max_iters: int = 200,
    obj_tol: float = 1e-12,
    step_scale: float = 1.0,
    max_sweeps: int = 200,
    inner_tol: float = 1e-10,
    window: int = 50,
    debug: bool = False,
) -> QPSolution:
    """Projected gradient on the discretized program.

    Each outer step moves against the gradient with step ``step_scale / L``
    (``L = 12`` for the mean-scaled objective) and projects onto the feasible
    set by Dykstra's method.  With the default ``step_scale = 1`` the
    gradient step maps every iterate to ``-mu * mask / 2``, so the outer loop
    only resumes the same projection until it is a fixed point.

    Stops when the iterate no longer moves, or when the objective decreased by
    less than ``obj_tol`` over the last ``window`` steps; either way the
    feasibility residual must be at most ``1e-8``.

    Raises
    ------
    QPConvergenceError
        If ``max_iters`` outer steps do not meet the stopping rule.
    """
    if not (0.0 < step_scale <= 1.0):
        raise ValueError("step_scale must lie in (0, 1]")
    n = p.n
    v = p.v
    mask = p.mask
    h = np.broadcast_to(v, (n, n)).copy()
    history: list[tuple[int, float, float]] = []
    dyk: _Dykstra | None = None
    best: tuple[float, float, np.ndarray, int, float] | None = None
    prev_feasible_obj = math.inf
    change = math.inf

    for it in range(1, max_iters + 1):
        grad = p.mu * mask + 2.0 * h
        y = h - step_scale * grad / 2.0
        if dyk is None or not np.array_equal(y, dyk.y):
            dyk = _Dykstra(y, v)
        h_new = dyk.run(max_sweeps, inner_tol)
        change = float(np.max(np.abs(h_new - h)))
        h = h_new
        obj = qp_objective(p, h)
        feas = feasibility_residual(h, v)
        history.append((it, obj, feas))
        if best is None or (feas, obj) < (best[0], best[1]) or (feas <= 1e-8 and obj < best[1]):
            best = (feas, obj, h.copy(), it, change)
        if debug and feas <= 1e-8:
            if obj > prev_feasible_obj + 1e-12:
                raise AssertionError(f"objective increased at iteration {it}: {prev_feasible_obj!r} -> {obj!r}")
            prev_feasible_obj = obj
        if feas <= 1e-8:
            if change <= 1e-12:
                break
            if len(history) > window and history[-window - 1][1] - obj < obj_tol:
                break
    else:
        feas, obj, hb, itb, chb = best
        sol = QPSolution(GridCopula(hb, check=False), obj, itb, feas, chb, history)
        raise QPConvergenceError(f"no convergence in {max_iters} iterations (feasibility {feas:.3g})", sol)

    log.debug("qp_solve mu=%g n=%d: %d outer steps, %d sweeps", p.mu, n, len(history), dyk.sweeps)
    return QPSolution(GridCopula(h), obj, len(history), feas, change, history)


@dataclass(frozen=True)
class DensityExport:
    c: np.ndarray
    clip_magnitude: float


def qp_density_export(sol: QPSolution) -> DensityExport:
    """Per-cell density from a solved field.

    ``h`` is interpolated to the ``v`` cell edges (with ``h = 0`` at ``v = 0``
    and ``h = 1`` at ``v = 1``) and differenced, which is the same as the
    mixed second difference of the cumulative ``C`` scaled by ``n**2``.
    Row means of the result are exactly 1.  Negative cells are clipped to 0
    and the largest clipped amount is reported.
    """
    h = sol.h.h
    n = h.shape[0]
    edges = np.empty((n, n + 1))
    edges[:, 0] = 0.0
    edges[:, -1] = 1.0
    edges[:, 1:-1] = 0.5 * (h[:, :-1] + h[:, 1:])
    c = n * np.diff(edges, axis=1)
    neg = max(0.0, float(-c.min()))
    return DensityExport(np.maximum(c, 0.0), neg)


# ---------------------------------------------------------------------------
# parameter searches
# ---------------------------------------------------------------------------

OBJECTIVES: dict[str, Callable[[float, float], float]] = {
    "max_psi_minus_xi": lambda xi, psi: psi - xi,
    "min_psi_plus_xi": lambda xi, psi: xi + psi,
}


def measure_evaluator(family: str, n: int = 600, tol: float = 1e-5) -> Callable[[float], tuple[float, float, str]]:
    """Map a family id to ``param -> (xi, psi, method)``.

    ``frechet`` is the upper mixture ``(1 - a) Pi + a M``, ``lower_frechet``
    the mixture with weight on ``W``, ``cdown`` the Jensen family and
    ``strip_path`` the strip copula along its parameter path.  The Gaussian
    family uses its closed forms; the other parametric families are
    evaluated on an ``n``-grid.
    """
    if family == "frechet":
        return lambda a: _triple(frechet_measures(FrechetMixture.upper(a)))
    if family == "lower_frechet":
        return lambda w: _triple(frechet_measures(FrechetMixture.lower(w)))
    if family == "cdown":
        return lambda mu: _triple(cdown_measures(mu))
    if family == "strip_path":
        from .twoparam import path_strip, strip_measures

        return lambda mu: _triple(strip_measures(path_strip(mu), tol))
    if family == "gaussian":
        return lambda r: _triple(gaussian_measures(r))

    def ev(theta):
        G = grid_from_partial(ParametricCopula(family, theta).partial, n)
        return xi_grid(G), psi_grid(G), "grid"

    if family not in PARAMETRIC_FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    return ev


def _triple(m):
    return m.xi, m.psi, m.method


@dataclass(frozen=True)
class SearchResult:
    param: float
    xi: float
    psi: float
    value: float
    method: str = "grid"


def grid_search_extremizer(
    family: str,
    objective: str,
    param_grid: Sequence[float],
    n: int = 600,
    threads: int = 1,
    tol: float = 1e-5,
) -> SearchResult:
    """Evaluate ``objective`` at every parameter and return the extremizing row.

    Ties go to the smallest parameter.  With ``threads > 1`` evaluations run
    in a thread pool; results are collected in input order, so the outcome
    does not depend on scheduling.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {sorted(OBJECTIVES)}")
    if n < 200 and family not in ("frechet", "lower_frechet", "cdown", "gaussian", "strip_path"):
        raise ValueError("grid searches need n >= 200")
    params = [float(x) for x in param_grid]
    if not params:
        raise ValueError("empty parameter grid")
    ev = measure_evaluator(family, n, tol)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(ev, params))
    else:
        vals = [ev(x) for x in params]
    sign = -1.0 if objective.startswith("max") else 1.0
    f = OBJECTIVES[objective]
    best = None
    for x, (xi, psi, method) in sorted(zip(params, vals), key=lambda r: r[0]):
        key = sign * f(xi, psi)
        if best is None or key < best[0]:
            best = (key, SearchResult(x, xi, psi, f(xi, psi), method))
    return best[1]


def refine_search(
    family: str,
    objective: str,
    lo: float,
    hi: float,
    coarse: float,
    fine: float = 0.002,
    n: int = 600,
    threads: int = 1,
    tol: float = 1e-5,
) -> SearchResult:
    """Coarse sweep at step ``coarse`` then a dense sweep at step ``fine``
    within one coarse step of the coarse winner (clamped to ``[lo, hi]``)."""
    grid = _steps(lo, hi, coarse)
    first = grid_search_extremizer(family, objective, grid, n, threads, tol)
    a = max(lo, first.param - coarse)
    b = min(hi, first.param + coarse)
    return grid_search_extremizer(family, objective, _steps(a, b, fine), n, threads, tol)


def _steps(lo: float, hi: float, step: float) -> np.ndarray:
    # multiples of ``step`` inside [lo, hi], plus both ends, rounded to the step's decimals
    digits = max(0, -int(math.floor(math.log10(step)))) + 3
    k0 = math.ceil(lo / step - 1e-9)
    k1 = math.floor(hi / step + 1e-9)
    pts = {round(k * step, digits) for k in range(k0, k1 + 1)}
    pts.update((lo, hi))
    return np.array(sorted(p for p in pts if lo <= p <= hi))


@dataclass(frozen=True)
class TableRow:
    family: str
    param: float | None
    xi: float | None
    psi: float | None
    value: float | None
    status: str = "ok"
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "param": self.param,
            "xi": self.xi,
            "psi": self.psi,
            "value": self.value,
            "status": self.status,
            "message": self.message,
        }


# (label, family id, lo, hi, coarse step); dense step is 0.002 throughout
TABLE1_FAMILIES = [
    ("Clayton", "clayton", 0.002, 10.0, 0.1),
    ("Frank", "frank", 0.002, 30.0, 0.25),
    ("Frechet", "frechet", 0.0, 1.0, 0.05),
    ("Gaussian", "gaussian", 0.0, 0.998, 0.05),
    ("Gumbel-Hougaard", "gumbel", 1.0, 10.0, 0.1),
    ("Joe", "joe", 1.0, 10.0, 0.1),
]

TABLE2_FAMILIES = [
    ("C-down", "cdown", 0.0, 2.0, 0.05),
    ("C-mu path", "strip_path", 0.0, 4.0, 0.05),
    ("Clayton", "clayton", -0.99, -0.002, 0.05),
    ("Frank", "frank", -30.0, -0.002, 0.25),
    ("Gaussian", "gaussian", -0.998, 0.0, 0.05),
    ("Gumbel-Hougaard", "gumbel", 1.0, 10.0, 0.1),
    ("Joe", "joe", 1.0, 10.0, 0.1),
    ("Lower Frechet", "lower_frechet", 0.0, 1.0, 0.05),
]


def _table(layout, objective: str, n: int, threads: int, tol: float, only: Sequence[str] | None) -> list[TableRow]:
    rows = []
    for label, fam, lo, hi, coarse in layout:
        if only is not None and fam not in only:
            continue
        try:
            r = refine_search(fam, objective, lo, hi, coarse, 0.002, n, threads, tol)
            rows.append(TableRow(label, r.param, r.xi, r.psi, r.value))
        except Exception as exc:  # a failing family is reported, not fatal
            log.warning("table row %s failed: %s", label, exc)
            rows.append(TableRow(label, None, None, None, None, "error", str(exc)))
    return rows


def table1(n: int = 600, threads: int = 1, tol: float = 1e-5, only: Sequence[str] | None = None) -> list[TableRow]:
    """Maximizers of ``psi - xi`` per family."""
    return _table(TABLE1_FAMILIES, "max_psi_minus_xi", n, threads, tol, only)


def table2(n: int = 600, threads: int = 1, tol: float = 1e-5, only: Sequence[str] | None = None) -> list[TableRow]:
    """Minimizers of ``xi + psi`` per family."""
    return _table(TABLE2_FAMILIES, "min_psi_plus_xi", n, threads, tol, only)
