"""Discretized copulas via their first partial derivative.

A :class:`GridCopula` stores ``h[i, j] ~ d/du C(t_i, v_j)`` at the cell
midpoints ``t_i = (i + 1/2) / n`` and ``v_j = (j + 1/2) / n`` (zero-based).
Everything the package measures numerically goes through this field.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "GridCopula",
    "MeasureReport",
    "InfeasibleGridError",
    "midpoints",
    "diagonal_mask",
    "grid_from_partial",
    "xi_grid",
    "psi_grid",
    "tau_grid",
    "cdf_from_h",
    "markov_diag",
    "is_si",
    "grid_measures",
    "write_grid_csv",
    "read_grid_csv",
]


class InfeasibleGridError(ValueError):
    """The sampled field violates the copula constraints beyond tolerance."""

    def __init__(self, message: str, worst_column: int | None = None, violation: float = 0.0):
        super().__init__(message)
        self.worst_column = worst_column
        self.violation = violation


@dataclass(frozen=True)
class MeasureReport:
    """Chatterjee's xi, Spearman's footrule psi and (optionally) Kendall's tau."""

    xi: float
    psi: float
    tau: float | None = None
    method: str = "exact"
    n_or_tol: float | None = None
    flags: tuple = ()

    def __post_init__(self):
        if self.method not in ("exact", "grid", "quadrature"):
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        out = {
            "xi": self.xi,
            "psi": self.psi,
            "tau": self.tau,
            "method": self.method,
            "n": int(self.n_or_tol) if self.method == "grid" else None,
        }
        if self.method == "quadrature":
            out["tol"] = self.n_or_tol
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def midpoints(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


@dataclass(frozen=True, eq=False)
class GridCopula:
    """Conditional-distribution field of a copula on an ``n x n`` midpoint grid.

    Parameters
    ----------
    h : array_like, shape (n, n)
        Row ``i`` is the ``t`` (first argument) index, column ``j`` the ``v``
        index.
    feas_tol : float, optional
        Allowed deviation of column means from ``v_j``; defaults to ``2 / n``.
    si : bool
        If set, the field is additionally required to be non-increasing in ``t``.
    check : bool
        Validate the box and column-mean constraints on construction.
    """

    h: np.ndarray
    feas_tol: float | None = None
    si: bool = False
    check: bool = True
    feasibility_violation: float = field(init=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
            raise ValueError(f"h must be a square matrix with n >= 2, got shape {h.shape}")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        n = h.shape[0]
        if self.feas_tol is None:
            object.__setattr__(self, "feas_tol", 2.0 / n)
        col_err = np.abs(h.mean(axis=0) - midpoints(n))
        worst = int(np.argmax(col_err))
        object.__setattr__(self, "feasibility_violation", float(col_err[worst]))
        if not self.check:
            return
        if not np.all(np.isfinite(h)):
            raise InfeasibleGridError("h contains non-finite entries")
        box = max(float(-h.min()), float(h.max() - 1.0), 0.0)
        if box > 1e-12:
            raise InfeasibleGridError(f"h leaves [0, 1] by {box:.3g}", violation=box)
        if col_err[worst] > self.feas_tol:
            raise InfeasibleGridError(
                f"column {worst} has mean {h[:, worst].mean():.6g}, expected "
                f"{midpoints(n)[worst]:.6g} (violation {col_err[worst]:.3g} > {self.feas_tol:.3g})",
                worst_column=worst,
                violation=float(col_err[worst]),
            )
        if self.si and not is_si(self, 1e-12):
            raise InfeasibleGridError("field flagged SI but increases in t somewhere")

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def t(self) -> np.ndarray:
        return midpoints(self.n)

    v = t

    def mix(self, other: "GridCopula", lam: float) -> "GridCopula":
        """Convex combination ``(1 - lam) * self + lam * other``."""
        return GridCopula((1.0 - lam) * self.h + lam * other.h, feas_tol=max(self.feas_tol, other.feas_tol))


def grid_from_partial(
    dC1: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n: int,
    feas_tol: float | None = None,
    si: bool = False,
) -> GridCopula:
    """Sample a vectorized ``dC1(t, v)`` at the cell midpoints.

    ``dC1`` is called once with broadcast arrays of shape ``(n, 1)`` and
    ``(1, n)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    g = midpoints(n)
    h = np.broadcast_to(np.asarray(dC1(g[:, None], g[None, :]), dtype=float), (n, n))
    return GridCopula(h, feas_tol=feas_tol, si=si)


def diagonal_mask(n: int) -> np.ndarray:
    """Cell averages of ``1{t <= v}``: 1 above the diagonal, 1/2 on it, 0 below."""
    i = np.arange(n)
    return (i[:, None] < i[None, :]) + 0.5 * (i[:, None] == i[None, :])


def markov_diag(G: GridCopula) -> np.ndarray:
    """Diagonal of the Markov product of the transpose with ``C``: column means of ``h**2``."""
    return np.mean(G.h * G.h, axis=0)


def xi_grid(G: GridCopula) -> float:
    return 6.0 * float(np.mean(markov_diag(G))) - 2.0


def psi_grid(G: GridCopula) -> float:
    return 6.0 * float(np.mean(diagonal_mask(G.n) * G.h)) - 2.0


def cdf_from_h(G: GridCopula) -> np.ndarray:
    """``C(i / n, v_j)`` for ``i = 1..n``: running row sums of ``h`` scaled by ``1/n``."""
    return np.cumsum(G.h, axis=0) / G.n


def tau_grid(G: GridCopula) -> float:
    """Kendall's tau, ``1 - 4 * iint dC/du * dC/dv``.

    ``dC/dv`` comes from central differences along ``v`` (one-sided at the
    first and last column) of ``C`` evaluated at the row midpoints.
    """
    n = G.n
    if n < 4:
        raise ValueError("tau_grid needs n >= 4")
    C_mid = cdf_from_h(G) - G.h / (2 * n)
    dC2 = np.gradient(C_mid, 1.0 / n, axis=1, edge_order=1)
    return 1.0 - 4.0 * float(np.mean(G.h * dC2))


def is_si(G: GridCopula, tol: float = 1e-12) -> bool:
    """Elementwise check that ``h`` is non-increasing in ``t`` for every column."""
    return bool(np.all(np.diff(G.h, axis=0) <= tol))


def grid_measures(G: GridCopula, with_tau: bool = True) -> MeasureReport:
    return MeasureReport(
        xi=xi_grid(G),
        psi=psi_grid(G),
        tau=tau_grid(G) if with_tau and G.n >= 4 else None,
        method="grid",
        n_or_tol=G.n,
    )


_HEADER = re.compile(r"#\s*gridcop\s+n\s*=\s*(\d+)")


def write_grid_csv(G: GridCopula, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# gridcop n={G.n}\n")
        for row in G.h:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_grid_csv(path, feas_tol: float | None = None) -> GridCopula:
    """Read a field written by :func:`write_grid_csv`.

    Raises ``ValueError`` on a malformed file and
    :class:`InfeasibleGridError` when the field violates the constraints.
    """
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty file")
    m = _HEADER.fullmatch(text[0].strip())
    if m is None:
        raise ValueError(f"{path}: missing '# gridcop n=<n>' header")
    n = int(m.group(1))
    rows = [ln for ln in text[1:] if ln.strip()]
    try:
        h = np.array([[float(x) for x in ln.split(",")] for ln in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if h.shape != (n, n):
        raise ValueError(f"{path}: header says n={n} but data has shape {h.shape}")
    return GridCopula(h, feas_tol=feas_tol)
