"""Two-parameter copula family with a zero-density diagonal strip.

For ``0 <= alpha < 1/2`` and ``0 <= beta <= 1/2`` the strip

    H = {(s, t) : psi(s) <= t <= psi(s) + beta},
    psi(s) = clip(k (s - alpha), 0, 1 - beta),   k = (1 - beta) / (1 - 2 alpha),

has area ``beta``.  Uniform mass on the complement has uniform first
marginal; its second marginal has density ``f_T = (1 - L) / (1 - beta)``
with ``L(t)`` the length of the horizontal slice of ``H`` at height ``t``.
Pushing the second coordinate through ``F_T`` yields a copula.

All one-dimensional pieces (``psi``, ``L``, ``f_T``, ``F_T``) are exact
piecewise polynomials, so conditional distribution values never divide by
``f_T``.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .gridcop import MeasureReport
from .numerics import Interval, PiecewisePoly, integrate_1d

__all__ = [
    "StripCopula",
    "StripBuildError",
    "PathParams",
    "strip_build",
    "strip_in_H",
    "strip_density",
    "strip_partial",
    "strip_measures",
    "strip_density_grid",
    "path_params",
    "path_strip",
]


class StripBuildError(RuntimeError):
    """A piecewise component failed its integral check at build time."""


@dataclass(frozen=True, eq=False)
class StripCopula:
    alpha: float
    beta: float
    k: float
    psi_s: PiecewisePoly
    L_t: PiecewisePoly
    fT: PiecewisePoly
    FT: PiecewisePoly
    _scalar: tuple = field(init=False, repr=False)

    def __post_init__(self):
        # plain-float copies of the pieces for the scalar fast path
        object.__setattr__(
            self,
            "_scalar",
            (
                self.FT.breaks.tolist(),
                self.FT(self.FT.breaks).tolist(),
                self.FT.coeffs.tolist(),
                self.fT.coeffs.tolist(),
            ),
        )

    def inverse_FT(self, v):
        if np.ndim(v) == 0:
            return _inverse_FT_scalar(self, float(v))
        return _inverse_FT(self.FT, v)

    def _psi(self, s: float) -> float:
        return min(max(self.k * (s - self.alpha), 0.0), 1.0 - self.beta)


def _unique_breaks(points) -> np.ndarray:
    pts = sorted(set(float(p) for p in points))
    out = [pts[0]]
    for p in pts[1:]:
        if p - out[-1] > 1e-15:
            out.append(p)
    return np.array(out)


def strip_build(alpha: float, beta: float) -> StripCopula:
    """Construct the strip copula for ``(alpha, beta)``.

    Raises
    ------
    ValueError
        If ``alpha`` is outside ``[0, 1/2)`` or ``beta`` outside ``[0, 1/2]``.
    StripBuildError
        If a mass or normalization check fails by more than ``1e-10``.
    """
    alpha = float(alpha)
    beta = float(beta)
    if not (0.0 <= alpha < 0.5):
        raise ValueError(f"alpha must lie in [0, 1/2), got {alpha!r}")
    if not (0.0 <= beta <= 0.5):
        raise ValueError(f"beta must lie in [0, 1/2], got {beta!r}")
    k = (1.0 - beta) / (1.0 - 2.0 * alpha)

    sb = _unique_breaks([0.0, alpha, 1.0 - alpha, 1.0])
    sc = []
    for lo, hi in zip(sb[:-1], sb[1:]):
        m = 0.5 * (lo + hi)
        if m < alpha:
            sc.append([0.0, 0.0])
        elif m > 1.0 - alpha:
            sc.append([1.0 - beta, 0.0])
        else:
            sc.append([-k * alpha, k])
    psi_s = PiecewisePoly(sb, sc, continuous=True)

    # horizontal slice length: two corner rectangles of width alpha plus the
    # part of the sloped band with psi(s) in [t - beta, t], of length (hi - lo) / k
    tb = _unique_breaks([0.0, beta, 1.0 - beta, 1.0])
    lc = []
    for lo, hi in zip(tb[:-1], tb[1:]):
        m = 0.5 * (lo + hi)
        c0 = (alpha if m < beta else 0.0) + (alpha if m > 1.0 - beta else 0.0)
        band_hi = np.array([0.0, 1.0]) if m < 1.0 - beta else np.array([1.0 - beta, 0.0])
        band_lo = np.array([-beta, 1.0]) if m > beta else np.array([0.0, 0.0])
        lc.append(np.array([c0, 0.0]) + (band_hi - band_lo) / k)
    L_t = PiecewisePoly(tb, lc)
    fT = PiecewisePoly(tb, (np.array([[1.0, 0.0]]) - L_t.coeffs) / (1.0 - beta))
    FT = fT.antiderivative()

    mass = L_t.integral()
    if abs(mass - beta) > 1e-10:
        raise StripBuildError(f"strip area {mass!r} differs from beta={beta!r}")
    ends = np.concatenate([fT.coeffs[:, 0] + fT.coeffs[:, 1] * tb[:-1], fT.coeffs[:, 0] + fT.coeffs[:, 1] * tb[1:]])
    if ends.min() < -1e-12:
        raise StripBuildError(f"f_T takes the negative value {ends.min()!r}")
    total = float(FT(1.0))
    if abs(total - 1.0) > 1e-10:
        raise StripBuildError(f"f_T integrates to {total!r}")
    return StripCopula(alpha, beta, k, psi_s, L_t, fT, FT)


def _inverse_FT(FT: PiecewisePoly, v):
    """Quantile of ``F_T``: locate the piece, then solve its quadratic.

    The smaller-cancellation root formula is used; the result is clipped to
    the piece so that rounding cannot push it across a break point.
    """
    v = np.asarray(v, dtype=float)
    knots = FT(FT.breaks)
    i = np.clip(np.searchsorted(knots, v, side="right") - 1, 0, FT.n_pieces - 1)
    lo = FT.breaks[i]
    hi = FT.breaks[i + 1]
    c = FT.coeffs[i]
    a2 = c[..., 2]
    a1 = c[..., 1]
    a0 = c[..., 0] - v
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.sqrt(np.maximum(a1 * a1 - 4.0 * a2 * a0, 0.0))
        q = -0.5 * (a1 + np.copysign(disc, a1))
        r1 = q / a2
        r2 = a0 / q
        lin = -a0 / a1
    mid = 0.5 * (lo + hi)
    r1 = np.where(np.isfinite(r1), r1, np.inf)
    r2 = np.where(np.isfinite(r2), r2, np.inf)
    quad = np.where(np.abs(np.clip(r1, lo, hi) - r1) <= np.abs(np.clip(r2, lo, hi) - r2), r1, r2)
    root = np.where(a2 == 0.0, np.where(np.isfinite(lin), lin, mid), quad)
    return np.clip(root, lo, hi)


def _inverse_FT_scalar(sc: StripCopula, v: float) -> float:
    breaks, knots, coeffs, _ = sc._scalar
    i = min(max(bisect_right(knots, v) - 1, 0), len(coeffs) - 1)
    lo, hi = breaks[i], breaks[i + 1]
    c = coeffs[i]
    a0, a1 = c[0] - v, c[1]
    a2 = c[2] if len(c) > 2 else 0.0
    if a2 == 0.0:
        root = -a0 / a1 if a1 != 0.0 else 0.5 * (lo + hi)
    else:
        q = -0.5 * (a1 + math.copysign(math.sqrt(max(a1 * a1 - 4.0 * a2 * a0, 0.0)), a1))
        r1 = q / a2 if q != 0.0 else math.inf
        r2 = a0 / q if q != 0.0 else math.inf
        root = r1 if abs(min(max(r1, lo), hi) - r1) <= abs(min(max(r2, lo), hi) - r2) else r2
    return min(max(root, lo), hi)


def _fT_scalar(sc: StripCopula, t: float) -> float:
    breaks, _, _, fc = sc._scalar
    i = min(max(bisect_right(breaks, t) - 1, 0), len(fc) - 1)
    return fc[i][0] + fc[i][1] * t


def strip_in_H(sc: StripCopula, s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    p = sc.psi_s(s)
    return (p <= t) & (t <= p + sc.beta)


def strip_density(sc: StripCopula, u, v):
    """Copula density; defined as 0 on the null set of fibers where ``f_T`` vanishes."""
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        tau = _inverse_FT_scalar(sc, float(v))
        f = _fT_scalar(sc, tau)
        p = sc._psi(float(u))
        if f <= 0.0 or p <= tau <= p + sc.beta:
            return 0.0
        return 1.0 / ((1.0 - sc.beta) * f)
    tau = sc.inverse_FT(v)
    f = sc.fT(tau)
    outside = ~strip_in_H(sc, u, tau)
    with np.errstate(divide="ignore"):
        val = 1.0 / ((1.0 - sc.beta) * f)
    return np.where((f > 0) & outside, val, 0.0)


def strip_partial(sc: StripCopula, u, v):
    """``d/du C(u, v)``: the uncovered length of ``[0, F_T^{-1}(v)]`` above ``u``, over ``1 - beta``."""
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        tau = _inverse_FT_scalar(sc, float(v))
        covered = min(max(tau - sc._psi(float(u)), 0.0), sc.beta)
        return min(max((tau - covered) / (1.0 - sc.beta), 0.0), 1.0)
    tau = sc.inverse_FT(v)
    covered = np.clip(tau - sc.psi_s(u), 0.0, sc.beta)
    return np.clip((tau - covered) / (1.0 - sc.beta), 0.0, 1.0)


def _u_breaks(sc: StripCopula, tau: float, upper: float) -> np.ndarray:
    pts = [0.0, upper, sc.alpha, 1.0 - sc.alpha, sc.alpha + tau / sc.k, sc.alpha + (tau - sc.beta) / sc.k]
    return _unique_breaks([p for p in pts if 0.0 <= p <= upper])


def _inner(sc: StripCopula, v: float, square: bool, upper: float) -> float:
    # h(., v) is piecewise linear in u, so Simpson is exact on every piece
    tau = _inverse_FT_scalar(sc, v)
    b = _u_breaks(sc, tau, upper)
    if len(b) < 2:
        return 0.0
    lo, hi = b[:-1], b[1:]
    nodes = np.stack([lo, 0.5 * (lo + hi), hi])
    covered = np.clip(tau - sc.psi_s(nodes), 0.0, sc.beta)
    h = (tau - covered) / (1.0 - sc.beta)
    g = h * h if square else h
    return float(np.sum((hi - lo) / 6.0 * (g[0] + 4.0 * g[1] + g[2])))


def strip_measures(sc: StripCopula, tol: float = 1e-4) -> MeasureReport:
    """xi and footrule by iterated integration of the conditional distribution.

    The inner integral over ``u`` is exact; the outer one over ``v`` is
    adaptive with kinks at ``F_T(beta)`` and ``F_T(1 - beta)`` supplied as
    break points.  Both reported values are within ``tol`` of the truth.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kinks = [float(sc.FT(sc.beta)), float(sc.FT(1.0 - sc.beta))]
    pts = [p for p in kinks if 0.0 < p < 1.0]
    unit = Interval(0.0, 1.0)
    sq = integrate_1d(lambda v: _inner(sc, v, True, 1.0), unit, abs_tol=tol / 6.0, points=pts)
    lin = integrate_1d(lambda v: _inner(sc, v, False, v), unit, abs_tol=tol / 6.0, points=pts)
    return MeasureReport(6.0 * sq - 2.0, 6.0 * lin - 2.0, None, method="quadrature", n_or_tol=tol)


def strip_density_grid(sc: StripCopula, n: int) -> np.ndarray:
    """Density at cell midpoints; row ``i`` is the ``u`` index, column ``j`` the ``v`` index."""
    g = (np.arange(n) + 0.5) / n
    return strip_density(sc, g[:, None], g[None, :])


@dataclass(frozen=True)
class PathParams:
    mu: float
    alpha: float
    beta: float


def path_params(mu: float) -> PathParams:
    """Parameters of the one-parameter path: a line ``alpha = 3 beta / 5``
    until ``beta`` saturates at 1/2, then ``alpha`` increases towards 1/2."""
    mu = float(mu)
    if not mu >= 0.0:
        raise ValueError(f"mu must be nonnegative, got {mu!r}")
    if math.isinf(mu):
        return PathParams(mu, 0.5, 0.5)
    alpha = 3.0 * mu / 20.0 if mu <= 2.0 else 0.5 - 2.0 / (5.0 * mu)
    return PathParams(mu, alpha, 0.25 * min(mu, 2.0))


def path_strip(mu: float) -> StripCopula:
    p = path_params(mu)
    return strip_build(p.alpha, p.beta)
