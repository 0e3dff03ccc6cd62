"""Shared numerical kernels.

Adaptive Simpson quadrature, bisection root finding, standard-normal
functions, piecewise polynomials and the two Euclidean projections used by
the discretized program (capped simplex and isotonic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "Interval",
    "PiecewisePoly",
    "QuadratureError",
    "NotBracketedError",
    "integrate_1d",
    "find_root_bracketed",
    "std_normal_cdf",
    "std_normal_quantile",
    "project_capped_simplex",
    "project_capped_simplex_columns",
    "isotonic_project",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, estimate: float, achieved: float, requested: float):
        super().__init__(
            f"quadrature did not converge: estimate={estimate!r}, "
            f"achieved tolerance {achieved:.3g} > requested {requested:.3g}"
        )
        self.estimate = estimate
        self.achieved = achieved
        self.requested = requested


class NotBracketedError(ValueError):
    """The function has no sign change over the supplied interval."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _as_interval(iv) -> Interval:
    if isinstance(iv, Interval):
        return iv
    lo, hi = iv
    return Interval(float(lo), float(hi))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _simpson_on(f, a, fa, b, fb, abs_tol, max_depth):
    """Adaptive Simpson on [a, b]; returns (value, unresolved error estimate)."""
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    unresolved = 0.0
    # explicit stack: (a, fa, m, fm, b, fb, whole, tol, depth)
    stack = [(a, fa, m, fm, b, fb, whole, abs_tol, 0)]
    while stack:
        a, fa, m, fm, b, fb, whole, tol, depth = stack.pop()
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
        elif depth + 1 >= max_depth:
            total += left + right + delta / 15.0
            unresolved += abs(delta) / 15.0
        else:
            stack.append((m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1))
            stack.append((a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1))
    return total, unresolved


def integrate_1d(
    f: Callable[[float], float],
    iv,
    abs_tol: float = 1e-9,
    max_depth: int = 40,
    points: Sequence[float] | None = None,
) -> float:
    """Integrate a scalar function over an interval by adaptive Simpson.

    Parameters
    ----------
    f : callable
        Scalar integrand, bounded on the interval.
    iv : Interval or (lo, hi)
        Integration range.
    abs_tol : float
        Requested absolute error.
    max_depth : int
        Maximum bisection depth of any subinterval.
    points : sequence of float, optional
        Known break points of ``f`` inside the interval.  The range is split
        there first and the tolerance is shared in proportion to length.

    Raises
    ------
    QuadratureError
        If subintervals that hit ``max_depth`` leave an error estimate above
        ``abs_tol``.  The exception carries the best estimate.
    """
    if not abs_tol > 0:
        raise ValueError("abs_tol must be positive")
    iv = _as_interval(iv)
    cuts = [iv.lo]
    if points is not None:
        cuts.extend(sorted(float(p) for p in points if iv.lo < p < iv.hi))
    cuts.append(iv.hi)

    total = 0.0
    unresolved = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        tol = abs_tol * (b - a) / iv.width
        val, err = _simpson_on(f, a, f(a), b, f(b), tol, max_depth)
        total += val
        unresolved += err
    if unresolved > abs_tol:
        raise QuadratureError(total, unresolved, abs_tol)
    return total


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def find_root_bracketed(
    f: Callable[[float], float],
    iv,
    abs_tol: float = 1e-12,
) -> float:
    """Bisection root of a continuous function with ``f(lo) * f(hi) <= 0``.

    Returns the midpoint of the final bracket, whose width is ``<= abs_tol``.
    An exact zero at an evaluated point is returned immediately.
    """
    iv = _as_interval(iv)
    lo, hi = iv.lo, iv.hi
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NotBracketedError(
            f"not bracketed: f({lo})={flo!r} and f({hi})={fhi!r} have the same sign"
        )
    while hi - lo > abs_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# standard normal
# ---------------------------------------------------------------------------

def std_normal_cdf(x):
    """Standard normal distribution function (scalar or array)."""
    return special.ndtr(x)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open unit interval."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise ValueError("std_normal_quantile is defined for p in (0, 1) only")
    return special.ndtri(p)


# ---------------------------------------------------------------------------
# piecewise polynomials
# ---------------------------------------------------------------------------

class PiecewisePoly:
    """Piecewise polynomial on [breaks[0], breaks[-1]].

    Coefficients are in ascending powers of the *absolute* variable, one row
    per piece.  Evaluation is right-continuous at interior break points; the
    last piece is closed on the right.
    """

    def __init__(self, breaks, coeffs, continuous: bool = False):
        breaks = np.asarray(breaks, dtype=float)
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if breaks.ndim != 1 or len(breaks) < 2:
            raise ValueError("need at least two break points")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("break points must be strictly increasing")
        if coeffs.shape[0] != len(breaks) - 1:
            raise ValueError("one coefficient row per piece required")
        if coeffs.shape[1] > 4:
            raise ValueError("degree must not exceed 3")
        self.breaks = breaks
        self.coeffs = coeffs
        self.continuous = continuous
        if continuous:
            inner = breaks[1:-1]
            idx = np.arange(len(inner))
            left = self._poly(idx, inner)
            right = self._poly(idx + 1, inner)
            if np.any(np.abs(left - right) > 1e-12):
                raise ValueError("piecewise polynomial flagged continuous but jumps")

    @property
    def n_pieces(self) -> int:
        return self.coeffs.shape[0]

    def piece_index(self, x):
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        return np.clip(idx, 0, self.n_pieces - 1)

    def _poly(self, idx, x):
        c = self.coeffs[idx]
        out = np.zeros_like(np.asarray(x, dtype=float))
        for k in range(self.coeffs.shape[1] - 1, -1, -1):
            out = out * x + c[..., k]
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self._poly(self.piece_index(x), x)

    def derivative(self) -> "PiecewisePoly":
        deg = self.coeffs.shape[1] - 1
        if deg == 0:
            return PiecewisePoly(self.breaks, np.zeros((self.n_pieces, 1)))
        d = self.coeffs[:, 1:] * np.arange(1, deg + 1)
        return PiecewisePoly(self.breaks, d)

    def antiderivative(self) -> "PiecewisePoly":
        """Continuous antiderivative vanishing at the left end."""
        deg = self.coeffs.shape[1] - 1
        if deg >= 3:
            raise ValueError("antiderivative would exceed degree 3")
        a = np.zeros((self.n_pieces, deg + 2))
        a[:, 1:] = self.coeffs / np.arange(1, deg + 2)
        offset = 0.0
        for i in range(self.n_pieces):
            x0 = self.breaks[i]
            a[i, 0] = 0.0
            a[i, 0] = offset - np.polynomial.polynomial.polyval(x0, a[i])
            offset = np.polynomial.polynomial.polyval(self.breaks[i + 1], a[i])
        return PiecewisePoly(self.breaks, a, continuous=True)

    def integral(self) -> float:
        return float(self.antiderivative()(self.breaks[-1]))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def project_capped_simplex_columns(X, targets, tol: float = 1e-12) -> np.ndarray:
    """Project every column of ``X`` onto ``{y : 0 <= y <= 1, mean(y) = target}``.

    The projection has the form ``clip(x + lam, 0, 1)``; ``lam`` is found per
    column by bisection to width ``tol`` and then solved exactly on the
    resulting active set.
    """
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    n = X.shape[0]
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (X.shape[1],))
    if np.any((targets < 0) | (targets > 1)):
        raise ValueError("target mean must lie in [0, 1]")

    lo = -X.max(axis=0)
    hi = 1.0 - X.min(axis=0)
    while np.max(hi - lo) > tol:
        lam = 0.5 * (lo + hi)
        too_big = np.clip(X + lam, 0.0, 1.0).mean(axis=0) > targets
        hi = np.where(too_big, lam, hi)
        lo = np.where(too_big, lo, lam)
    lam = 0.5 * (lo + hi)

    # exact shift on the active set found by bisection
    for _ in range(3):
        Y = X + lam
        free = (Y > 0.0) & (Y < 1.0)
        n_free = free.sum(axis=0)
        n_up = (Y >= 1.0).sum(axis=0)
        s_free = np.where(free, X, 0.0).sum(axis=0)
        exact = (n * targets - n_up - s_free) / np.maximum(n_free, 1)
        cand = np.where(n_free > 0, exact, lam)
        err_old = np.abs(np.clip(X + lam, 0, 1).mean(axis=0) - targets)
        err_new = np.abs(np.clip(X + cand, 0, 1).mean(axis=0) - targets)
        better = err_new < err_old
        if not np.any(better):
            break
        lam = np.where(better, cand, lam)

    out = np.clip(X + lam, 0.0, 1.0)
    return out[:, 0] if squeeze else out


def project_capped_simplex(x, target_mean: float) -> np.ndarray:
    """Euclidean projection of a vector onto the box-capped simplex slice."""
    return project_capped_simplex_columns(np.asarray(x, dtype=float), target_mean)


def isotonic_project(x) -> np.ndarray:
    """Least-squares non-decreasing fit (pool adjacent violators)."""
    vals: list[float] = []
    wts: list[int] = []
    for xi in np.asarray(x, dtype=float).ravel():
        v = float(xi)
        w = 1
        while vals and vals[-1] > v:
            pv = vals.pop()
            pw = wts.pop()
            v = (pv * pw + v * w) / (pw + w)
            w += pw
        vals.append(v)
        wts.append(w)
    return np.repeat(np.asarray(vals), wts)
