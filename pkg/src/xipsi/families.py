"""Analytic copula families with their conditional distribution functions.

Every family exposes ``partial(t, v)``, the first partial derivative
``d/du C(u, v)`` at ``u = t``, vectorized over numpy arrays, and a
``measures()`` method returning a :class:`~xipsi.gridcop.MeasureReport`.
Closed forms are used where they exist; otherwise the field is sampled on a
midpoint grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gridcop import GridCopula, MeasureReport, grid_from_partial, grid_measures, midpoints, psi_grid, xi_grid
from .numerics import std_normal_cdf, std_normal_quantile

__all__ = [
    "DomainError",
    "FrechetMixture",
    "OrdinalSumPi",
    "CheckerboardMatrix",
    "CDownMu",
    "EqualityClassCopula",
    "ParametricCopula",
    "PARAMETRIC_FAMILIES",
    "frechet_partial",
    "frechet_measures",
    "ordinal_sum_partial",
    "ordinal_sum_measures",
    "checkerboard_measures",
    "cdown_partial",
    "cdown_measures",
    "equality_class_partial",
    "equality_class_check",
    "parametric_partial",
    "gaussian_measures",
]


class DomainError(ValueError):
    """A family parameter or argument lies outside its admissible range."""


# ---------------------------------------------------------------------------
# Frechet mixtures of Pi, M and W
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrechetMixture:
    """``w_pi * Pi + w_m * M + w_w * W``."""

    w_pi: float
    w_m: float
    w_w: float = 0.0

    def __post_init__(self):
        w = (self.w_pi, self.w_m, self.w_w)
        if min(w) < 0:
            raise DomainError(f"Frechet weights must be nonnegative, got {w}")
        if abs(sum(w) - 1.0) > 1e-12:
            raise DomainError(f"Frechet weights must sum to 1, got {sum(w)!r}")

    @classmethod
    def upper(cls, alpha: float) -> "FrechetMixture":
        """``(1 - alpha) * Pi + alpha * M``."""
        return cls(1.0 - alpha, alpha, 0.0)

    @classmethod
    def lower(cls, weight: float) -> "FrechetMixture":
        """``(1 - weight) * Pi + weight * W``."""
        return cls(1.0 - weight, 0.0, weight)

    def partial(self, t, v):
        return frechet_partial(self, t, v)

    def measures(self, n: int = 800) -> MeasureReport:
        return frechet_measures(self, n)


def frechet_partial(w: FrechetMixture, t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    return w.w_pi * v + w.w_m * (t <= v) + w.w_w * (t > 1.0 - v)


def frechet_measures(w: FrechetMixture, n: int = 800) -> MeasureReport:
    """Exact (xi, psi, tau) for two-component mixtures; grid otherwise."""
    if w.w_w == 0.0:
        a = w.w_m
        return MeasureReport(a * a, a, (a * a + 2 * a) / 3, method="exact")
    if w.w_m == 0.0:
        b = w.w_w
        return MeasureReport(b * b, -0.5 * b, -(b * b + 2 * b) / 3, method="exact")
    rep = grid_measures(grid_from_partial(w.partial, n))
    return MeasureReport(rep.xi, rep.psi, rep.tau, "grid", n, flags=("three-way mixture",))


# ---------------------------------------------------------------------------
# ordinal sums of Pi
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrdinalSumPi:
    """Ordinal sum of independence copulas on finitely many disjoint squares."""

    intervals: tuple = ()

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        prev = 0.0
        for a, b in ivs:
            if not (0.0 <= a < b <= 1.0):
                raise DomainError(f"invalid ordinal-sum interval ({a}, {b})")
            if a < prev:
                raise DomainError(f"ordinal-sum intervals overlap at ({a}, {b})")
            prev = b
        object.__setattr__(self, "intervals", ivs)

    def partial(self, t, v):
        return ordinal_sum_partial(self, t, v)

    def measures(self) -> MeasureReport:
        return ordinal_sum_measures(self)


def ordinal_sum_partial(os: OrdinalSumPi, t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.broadcast_to((t <= v).astype(float), np.broadcast(t, v).shape).copy()
    for a, b in os.intervals:
        inside = (t > a) & (t < b)
        slope = np.clip((v - a) / (b - a), 0.0, 1.0)
        out = np.where(inside, slope, out)
    return out


def ordinal_sum_measures(os: OrdinalSumPi) -> MeasureReport:
    # iint h^2 = iint 1{t<=v} h = 1/2 - sum(w^2)/6 for squares of width w
    s = sum((b - a) ** 2 for a, b in os.intervals)
    return MeasureReport(1.0 - s, 1.0 - s, 1.0 - s, method="exact")


# ---------------------------------------------------------------------------
# checkerboards
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CheckerboardMatrix:
    """Piecewise-uniform copula; ``delta[i, j]`` is the mass of the cell
    ``[i/n, (i+1)/n) x [j/n, (j+1)/n)`` with ``i`` indexing ``u``."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.array(self.delta, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise DomainError(f"checkerboard matrix must be square, got shape {d.shape}")
        if np.any(d < 0):
            raise DomainError("checkerboard masses must be nonnegative")
        n = d.shape[0]
        err = max(np.abs(d.sum(axis=0) - 1 / n).max(), np.abs(d.sum(axis=1) - 1 / n).max())
        if err > 1e-9:
            raise DomainError(f"checkerboard row/column sums deviate from 1/n by {err:.3g}")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @property
    def n(self) -> int:
        return self.delta.shape[0]

    def _below(self) -> np.ndarray:
        # mass of row i strictly left of column j
        return np.cumsum(self.delta, axis=1) - self.delta

    def partial(self, t, v):
        n = self.n
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        i = np.clip(np.floor(t * n).astype(int), 0, n - 1)
        j = np.clip(np.floor(v * n).astype(int), 0, n - 1)
        s = np.clip(v * n - j, 0.0, 1.0)
        return n * (self._below()[i, j] + self.delta[i, j] * s)

    def measures(self) -> MeasureReport:
        return checkerboard_measures(self)


def checkerboard_measures(cb: CheckerboardMatrix) -> MeasureReport:
    """Exact xi and psi by cellwise integration.

    Within cell ``(i, j)`` the conditional distribution is ``n * (S + D * s)``
    with ``s`` the relative position in the ``v`` cell, so both integrals are
    sums of low-degree polynomial moments.
    """
    n = cb.n
    D = cb.delta
    S = cb._below()
    sq = float(np.sum(S * S + S * D + D * D / 3.0))
    xi = 6.0 * sq - 2.0
    i = np.arange(n)
    above = i[:, None] < i[None, :]
    lin = np.where(above, (S + D / 2.0) / n, 0.0).sum() + np.sum(np.diag(S) / 2.0 + np.diag(D) / 3.0) / n
    psi = 6.0 * float(lin) - 2.0
    return MeasureReport(xi, psi, None, method="exact")


# ---------------------------------------------------------------------------
# the pointwise Jensen minimizer family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CDownMu:
    """Pseudo-copula whose partial derivative is constant on ``t <= v`` and on ``t > v``."""

    mu: float

    def __post_init__(self):
        if not (0.0 <= self.mu <= 2.0):
            raise DomainError(f"mu must lie in [0, 2], got {self.mu!r}")

    @property
    def v0(self) -> float:
        return self.mu / (2.0 + self.mu)

    @property
    def v1(self) -> float:
        return 2.0 / (2.0 + self.mu)

    def branches(self, v):
        """Values ``(below, above)`` taken on ``t <= v`` and ``t > v``."""
        v = np.asarray(v, dtype=float)
        m = self.mu
        with np.errstate(divide="ignore", invalid="ignore"):
            low = (np.zeros_like(v), v / (1.0 - v))
            mid = (v - 0.5 * m * (1.0 - v), v + 0.5 * m * v)
            high = (2.0 - 1.0 / v, np.ones_like(v))
        first = np.where(v <= self.v0, low[0], np.where(v <= self.v1, mid[0], high[0]))
        second = np.where(v <= self.v0, low[1], np.where(v <= self.v1, mid[1], high[1]))
        return first, second

    def partial(self, t, v):
        return cdown_partial(self, t, v)

    def measures(self) -> MeasureReport:
        return cdown_measures(self.mu)


def cdown_partial(c: CDownMu, t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    below, above = c.branches(v)
    return np.where(t <= v, below, above)


def cdown_measures(mu: float) -> MeasureReport:
    """Closed-form (xi, psi) of the Jensen family; tau is not reported."""
    if not (0.0 <= mu <= 2.0):
        raise DomainError(f"mu must lie in [0, 2], got {mu!r}")
    v1 = 2.0 / (2.0 + mu)
    psi = -2.0 * v1**2 + 6.0 * v1 - 5.0 + 1.0 / v1
    xi = -4.0 * v1**2 + 20.0 * v1 - 17.0 + 2.0 / v1 - 1.0 / v1**2 - 12.0 * math.log(v1)
    # both expressions cancel to O(mu^2) near mu = 0; keep rounding on the right side of 0
    return MeasureReport(max(xi, 0.0), min(psi, 0.0), None, method="exact")


# ---------------------------------------------------------------------------
# SI copulas with xi == psi
# ---------------------------------------------------------------------------

class EqualityClassCopula:
    """Copula whose conditional distribution is 1 below ``A(v)``, a constant
    level between ``A(v)`` and ``B(v)``, and 0 above.

    ``A`` and ``B`` must be vectorized, non-decreasing, and satisfy
    ``A(v) <= v <= B(v)``; the middle level is fixed by the column-mean
    constraint.
    """

    def __init__(self, A: Callable, B: Callable, n_check: int = 1001):
        self.A = A
        self.B = B
        v = np.linspace(0.0, 1.0, n_check)
        a = np.broadcast_to(np.asarray(A(v), dtype=float), v.shape)
        b = np.broadcast_to(np.asarray(B(v), dtype=float), v.shape)
        if np.any(a > b + 1e-12):
            k = int(np.argmax(a - b))
            raise DomainError(f"A(v) > B(v) at v={v[k]:.6g}")
        if np.any(a > v + 1e-12) or np.any(b < v - 1e-12):
            raise DomainError("need A(v) <= v <= B(v)")
        if np.any(np.diff(a) < -1e-12) or np.any(np.diff(b) < -1e-12):
            raise DomainError("A and B must be non-decreasing")

    def level(self, v):
        v = np.asarray(v, dtype=float)
        a = np.asarray(self.A(v), dtype=float)
        b = np.asarray(self.B(v), dtype=float)
        width = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(width > 0, (v - a) / np.where(width > 0, width, 1.0), 0.0)

    def partial(self, t, v):
        return equality_class_partial(self, t, v)


def equality_class_partial(e: EqualityClassCopula, t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(e.A(v), dtype=float)
    b = np.asarray(e.B(v), dtype=float)
    return (t < a) + e.level(v) * ((t > a) & (t < b))


def equality_class_check(e: EqualityClassCopula, n: int) -> tuple[float, float]:
    G = grid_from_partial(e.partial, n)
    return xi_grid(G), psi_grid(G)


# ---------------------------------------------------------------------------
# classical one-parameter families
# ---------------------------------------------------------------------------

PARAMETRIC_FAMILIES = ("gaussian", "clayton", "frank", "gumbel", "joe")


def _check_theta(family: str, theta: float) -> None:
    ok = {
        "gaussian": -1.0 < theta < 1.0,
        "clayton": theta > -1.0 and theta != 0.0,
        "frank": math.isfinite(theta) and theta != 0.0,
        "gumbel": theta >= 1.0,
        "joe": theta >= 1.0,
    }
    if family not in ok:
        raise DomainError(f"unknown family {family!r}; expected one of {PARAMETRIC_FAMILIES}")
    if not (math.isfinite(theta) and ok[family]):
        raise DomainError(f"theta={theta!r} outside the admissible range of the {family} family")


@dataclass(frozen=True)
class ParametricCopula:
    family: str
    theta: float

    def __post_init__(self):
        _check_theta(self.family, float(self.theta))

    def partial(self, t, v):
        return parametric_partial(self, t, v)

    def cdf(self, u, v):
        return _CDF[self.family](np.asarray(u, dtype=float), np.asarray(v, dtype=float), float(self.theta))

    def measures(self, n: int = 600) -> MeasureReport:
        if self.family == "gaussian":
            return gaussian_measures(self.theta)
        return grid_measures(grid_from_partial(self.partial, n))


def gaussian_measures(rho: float) -> MeasureReport:
    """Closed-form xi, footrule and tau of the Gaussian copula."""
    xi = 3.0 / math.pi * math.asin((1.0 + rho * rho) / 2.0) - 0.5
    psi = 3.0 / math.pi * math.asin((1.0 + rho) / 2.0) - 0.5
    tau = 2.0 / math.pi * math.asin(rho)
    return MeasureReport(xi, psi, tau, method="exact")


def _h_gaussian(t, v, th):
    return std_normal_cdf((std_normal_quantile(v) - th * std_normal_quantile(t)) / math.sqrt(1.0 - th * th))


def _h_clayton(t, v, th):
    # stable for small |theta|: base - 1 = expm1(-th*log t) + expm1(-th*log v)
    lt, lv = np.log(t), np.log(v)
    bm1 = np.expm1(-th * lt) + np.expm1(-th * lv)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        out = np.exp((-th - 1.0) * lt - (1.0 / th + 1.0) * np.log1p(bm1))
    if th < 0:
        out = np.where(1.0 + bm1 > 0, out, 0.0)
    return np.clip(np.nan_to_num(out, nan=0.0), 0.0, 1.0)


def _C_clayton(u, v, th):
    bm1 = np.expm1(-th * np.log(u)) + np.expm1(-th * np.log(v))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.exp(-np.log1p(bm1) / th)
    return np.where(1.0 + bm1 > 0, out, 0.0)


def _h_frank(t, v, th):
    a = np.expm1(-th * t)
    b = np.expm1(-th * v)
    return np.exp(-th * t) * b / (np.expm1(-th) + a * b)


def _C_frank(u, v, th):
    return -np.log1p(np.expm1(-th * u) * np.expm1(-th * v) / np.expm1(-th)) / th


def _h_gumbel(t, v, th):
    x = -np.log(t)
    y = -np.log(v)
    s = x**th + y**th
    return np.exp(-(s ** (1.0 / th))) * s ** (1.0 / th - 1.0) * x ** (th - 1.0) / t


def _C_gumbel(u, v, th):
    return np.exp(-((-np.log(u)) ** th + (-np.log(v)) ** th) ** (1.0 / th))


def _h_joe(t, v, th):
    a = (1.0 - t) ** th
    b = (1.0 - v) ** th
    return (a + b - a * b) ** (1.0 / th - 1.0) * (1.0 - t) ** (th - 1.0) * (1.0 - b)


def _C_joe(u, v, th):
    a = (1.0 - u) ** th
    b = (1.0 - v) ** th
    return 1.0 - (a + b - a * b) ** (1.0 / th)


def _C_gaussian(u, v, th):
    from scipy.stats import multivariate_normal

    x = np.stack(np.broadcast_arrays(std_normal_quantile(u), std_normal_quantile(v)), axis=-1)
    return multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, th], [th, 1.0]]).cdf(x)


_PARTIAL = {
    "gaussian": _h_gaussian,
    "clayton": _h_clayton,
    "frank": _h_frank,
    "gumbel": _h_gumbel,
    "joe": _h_joe,
}

_CDF = {
    "gaussian": _C_gaussian,
    "clayton": _C_clayton,
    "frank": _C_frank,
    "gumbel": _C_gumbel,
    "joe": _C_joe,
}


def parametric_partial(p: ParametricCopula, t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    return _PARTIAL[p.family](t, v, float(p.theta))
