"""Curves bounding the attainable (xi, psi) region and point classification."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .families import DomainError, cdown_measures
from .numerics import Interval, find_root_bracketed

__all__ = [
    "RegionPoint",
    "RegionVerdict",
    "upper_psi_max",
    "jensen_curve",
    "jensen_floor",
    "mu_of_y",
    "region_check",
    "si_region_check",
    "kkt_residual_upper",
    "boundary_export",
    "write_boundary_csv",
    "CURVES",
]

CURVES = ("upper", "jensen", "si_lower", "path")


@dataclass(frozen=True)
class RegionPoint:
    xi: float
    psi: float

    def __post_init__(self):
        if not (0.0 <= self.xi <= 1.0):
            raise DomainError(f"xi must lie in [0, 1], got {self.xi!r}")
        if not (-0.5 <= self.psi <= 1.0):
            raise DomainError(f"psi must lie in [-1/2, 1], got {self.psi!r}")


@dataclass(frozen=True)
class RegionVerdict:
    """Membership flags with signed margins; a margin is nonnegative exactly
    when the matching flag holds (up to the tolerance used in the check)."""

    in_upper: bool
    in_lower_bound: bool
    in_si_region: bool
    margins: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "in_upper": self.in_upper,
            "in_lower_bound": self.in_lower_bound,
            "in_si_region": self.in_si_region,
            "margins": dict(self.margins),
        }


def upper_psi_max(x: float) -> float:
    """Largest footrule compatible with ``xi = x``."""
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    return math.sqrt(x)


def jensen_curve(mu: float) -> RegionPoint:
    m = cdown_measures(mu)
    return RegionPoint(m.xi, m.psi)


def jensen_floor(mu: float) -> float:
    """``mu * psi + xi`` of the Jensen family at ``mu``; a lower bound for every copula."""
    m = cdown_measures(mu)
    return mu * m.psi + m.xi


def mu_of_y(y: float) -> float:
    """Parameter of the Jensen family whose footrule equals ``y``.

    Solves ``mu^3 - (4 + 2y) mu^2 - (4 + 8y) mu - 8y = 0`` on ``[0, 2]`` by
    bisection.  At ``y = -1/2`` the root at 2 is double, which still gives a
    sign change on ``[0, 2]`` because the left end is positive.
    """
    if not (-0.5 <= y <= 0.0):
        raise DomainError(f"y must lie in [-1/2, 0], got {y!r}")

    def cubic(m):
        return ((m - (4.0 + 2.0 * y)) * m - (4.0 + 8.0 * y)) * m - 8.0 * y

    return find_root_bracketed(cubic, Interval(0.0, 2.0), abs_tol=1e-13)


def region_check(p: RegionPoint, tol: float = 0.0) -> RegionVerdict:
    """Classify a point against the proven bounds.

    For ``psi > 0`` the Jensen bound is not defined and only ``xi >= 0`` is
    checked; its margin is then ``xi`` itself.
    """
    up = math.sqrt(p.xi) - p.psi
    if p.psi <= 0.0:
        low = p.xi - cdown_measures(mu_of_y(p.psi)).xi
    else:
        low = p.xi
    si = min(p.psi - p.xi, up)
    margins = {"upper": up, "lower_bound": low, "si": si}
    return RegionVerdict(up >= -tol, low >= -tol, si >= -tol, margins)


def si_region_check(p: RegionPoint, tol: float = 0.0) -> bool:
    return p.xi - tol <= p.psi <= math.sqrt(p.xi) + tol


def kkt_residual_upper(x: float, n: int, perturb: float = 0.0) -> float:
    """Sup-norm stationarity residual of the upper-boundary optimizer.

    The candidate is ``h = (1 - r) v + r 1{t <= v}`` with ``r = sqrt(x)``,
    multiplier ``1 / (12 r)`` on the xi constraint and ``-(1 - r) v / r`` on
    the column-mean constraints.  ``perturb`` is added to ``h`` before
    evaluation, which shifts the residual by ``perturb / r``.
    """
    if not (0.0 < x <= 1.0):
        raise DomainError(f"x must lie in (0, 1], got {x!r}")
    r = math.sqrt(x)
    g = (np.arange(n) + 0.5) / n
    ind = (g[:, None] <= g[None, :]).astype(float)
    h = (1.0 - r) * g[None, :] + r * ind + perturb
    mult = 1.0 / (12.0 * r)
    gamma = -((1.0 - r) / r) * g[None, :]
    return float(np.max(np.abs(-ind + 12.0 * mult * h + gamma)))


def boundary_export(curve: str, samples: int, tol: float = 1e-4, mu_max: float = 4.0) -> list[tuple[float, float, float]]:
    """Sample a region curve uniformly in its parameter.

    ``upper`` is parameterized by ``x = xi`` on ``[0, 1]``; ``jensen`` by
    ``mu`` on ``[0, 2]``; ``si_lower`` by the width ``a`` of the ordinal-sum
    square ``<0, a>`` on ``[0, 1]``; ``path`` by ``mu`` on ``[0, mu_max]``
    with strip measures at quadrature tolerance ``tol``.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if curve == "upper":
        return [(x, x, math.sqrt(x)) for x in np.linspace(0.0, 1.0, samples).tolist()]
    if curve == "jensen":
        rows = []
        for mu in np.linspace(0.0, 2.0, samples).tolist():
            m = cdown_measures(mu)
            rows.append((mu, m.xi, m.psi))
        return rows
    if curve == "si_lower":
        return [(a, 1.0 - a * a, 1.0 - a * a) for a in np.linspace(0.0, 1.0, samples).tolist()]
    if curve == "path":
        from .twoparam import path_strip, strip_measures

        rows = []
        for mu in np.linspace(0.0, mu_max, samples).tolist():
            m = strip_measures(path_strip(mu), tol)
            rows.append((mu, m.xi, m.psi))
        return rows
    raise ValueError(f"unknown curve {curve!r}; expected one of {CURVES}")


def write_boundary_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "xi", "psi"])
        for row in rows:
            w.writerow(["%.15g" % x for x in row])
