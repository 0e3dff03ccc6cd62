"""Plain-text writers for densities and solver logs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["write_pgm", "read_pgm", "write_density_csv", "write_log_csv"]


def write_pgm(c: np.ndarray, path, sidecar: bool = True) -> float:
    """Write a density matrix as an ASCII (P2) 8-bit greymap.

    ``c[i, j]`` is the density in cell ``(u_i, v_j)``.  Image columns follow
    ``u``; image rows follow ``v`` with the largest ``v`` on top.  Grey level
    ``255 * (1 - c / max(c))`` makes high density dark.  The scale ``max(c)``
    is written to ``<path>.json`` when ``sidecar`` is set and returned.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2:
        raise ValueError("density must be a 2-D array")
    cmax = float(c.max()) if c.size else 0.0
    scale = cmax if cmax > 0 else 1.0
    img = np.rint(255.0 * (1.0 - np.clip(c, 0.0, None) / scale)).astype(int)
    img = np.clip(img, 0, 255).T[::-1]
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"P2\n{img.shape[1]} {img.shape[0]}\n255\n")
        for row in img:
            fh.write(" ".join(str(x) for x in row))
            fh.write("\n")
    if sidecar:
        meta = {"max_density": cmax, "width": img.shape[1], "height": img.shape[0], "grey": "255*(1-c/max_density)"}
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return cmax


def read_pgm(path) -> np.ndarray:
    """Read a P2 greymap written by :func:`write_pgm` (rows top to bottom)."""
    tokens = [t for ln in Path(path).read_text().splitlines() if not ln.startswith("#") for t in ln.split()]
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM file")
    w, h, _ = (int(x) for x in tokens[1:4])
    vals = np.array([int(x) for x in tokens[4:]])
    if vals.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {vals.size}")
    return vals.reshape(h, w)


def write_density_csv(c: np.ndarray, path) -> None:
    """Rows follow ``u``, columns follow ``v``."""
    np.savetxt(path, np.asarray(c, dtype=float), delimiter=",", fmt="%.15g")


def write_log_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective", "feas_residual"])
        for it, obj, feas in history:
            w.writerow([it, "%.15g" % obj, "%.6g" % feas])
