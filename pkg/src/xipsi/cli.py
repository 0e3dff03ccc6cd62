"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 infeasible input, 4 solver
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import boundary, families, gridcop, optimize, twoparam
from .formats import write_density_csv, write_log_csv, write_pgm

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGENCE = 4

FORMATS = ("csv", "json", "pgm")


class InputError(ValueError):
    """Malformed command-line input or descriptor."""


@dataclass
class CliConfig:
    grid_n: int = 400
    quad_tol: float = 1e-6
    output_dir: str = "."
    threads: int = 0
    format: str = "json"

    def validate(self) -> "CliConfig":
        if not isinstance(self.grid_n, int) or self.grid_n < 16:
            raise InputError(f"grid size must be an integer >= 16, got {self.grid_n!r}")
        if not (isinstance(self.quad_tol, (int, float)) and self.quad_tol > 0):
            raise InputError(f"quadrature tolerance must be positive, got {self.quad_tol!r}")
        if not isinstance(self.threads, int) or self.threads < 0:
            raise InputError(f"threads must be a nonnegative integer, got {self.threads!r}")
        if self.format not in FORMATS:
            raise InputError(f"format must be one of {FORMATS}, got {self.format!r}")
        return self

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


_CONFIG_KEYS = {
    "grid_n": "grid_n",
    "n": "grid_n",
    "quad_tol": "quad_tol",
    "tol": "quad_tol",
    "output_dir": "output_dir",
    "out": "output_dir",
    "threads": "threads",
    "format": "format",
}


def resolve_config(args: argparse.Namespace, environ=None) -> CliConfig:
    """Merge settings with precedence flags > config file > defaults.

    The thread count additionally falls back to ``XIPSI_THREADS`` before the
    default.
    """
    environ = os.environ if environ is None else environ
    cfg = CliConfig()
    from_file: set[str] = set()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        for key, val in data.items():
            if key not in _CONFIG_KEYS:
                raise InputError(f"unknown config key {key!r}")
            setattr(cfg, _CONFIG_KEYS[key], val)
            from_file.add(_CONFIG_KEYS[key])
    if "threads" not in from_file and environ.get("XIPSI_THREADS"):
        try:
            cfg.threads = int(environ["XIPSI_THREADS"])
        except ValueError:
            raise InputError(f"XIPSI_THREADS must be an integer, got {environ['XIPSI_THREADS']!r}") from None
    for flag, attr in (("n", "grid_n"), ("tol", "quad_tol"), ("threads", "threads"), ("format", "format")):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, attr, val)
    return cfg.validate()


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

def _num(d: dict, key: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise InputError(f"descriptor for {d.get('family')!r} needs {key!r}")
        return default
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise InputError(f"{key!r} must be a finite number, got {val!r}")
    return float(val)


def load_descriptor(text: str):
    """Parse a JSON descriptor given inline or as a file path.

    A file whose first line is a ``# gridcop`` header is read as a grid.
    """
    src = text.strip()
    if not src.startswith("{"):
        path = Path(text)
        if not path.is_file():
            raise InputError(f"descriptor is neither JSON nor an existing file: {text!r}")
        body = path.read_text()
        if body.lstrip().startswith("# gridcop"):
            return ("grid", path)
        src = body
    try:
        d = json.loads(src)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON descriptor: {exc}") from None
    if not isinstance(d, dict) or "family" not in d:
        raise InputError("descriptor must be a JSON object with a 'family' key")
    return ("family", d)


def measures_from_descriptor(d: dict, cfg: CliConfig) -> gridcop.MeasureReport:
    fam = d["family"]
    if fam == "frechet":
        w = families.FrechetMixture(_num(d, "w_pi", 0.0), _num(d, "w_m", 0.0), _num(d, "w_w", 0.0))
        return families.frechet_measures(w, max(cfg.grid_n, 16))
    if fam == "checkerboard":
        try:
            delta = np.array(d["delta"], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise InputError("checkerboard descriptor needs a numeric square 'delta' matrix") from None
        return families.checkerboard_measures(families.CheckerboardMatrix(delta))
    if fam == "cdown":
        return families.cdown_measures(_num(d, "mu"))
    if fam == "ordinal_sum":
        try:
            ivs = [(float(a), float(b)) for a, b in d.get("intervals", [])]
        except (TypeError, ValueError):
            raise InputError("'intervals' must be a list of [a, b] pairs") from None
        return families.ordinal_sum_measures(families.OrdinalSumPi(tuple(ivs)))
    if fam == "strip":
        sc = twoparam.strip_build(_num(d, "alpha"), _num(d, "beta"))
        return twoparam.strip_measures(sc, cfg.quad_tol)
    if fam == "strip_path":
        return twoparam.strip_measures(twoparam.path_strip(_num(d, "mu")), cfg.quad_tol)
    if fam in families.PARAMETRIC_FAMILIES:
        return families.ParametricCopula(fam, _num(d, "theta")).measures(cfg.grid_n)
    raise InputError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _emit(obj, args, cfg: CliConfig) -> None:
    text = json.dumps(obj, indent=2)
    print(text)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")


def cmd_measures(args, cfg: CliConfig) -> int:
    kind, payload = load_descriptor(args.descriptor)
    if kind == "grid":
        rep = gridcop.grid_measures(gridcop.read_grid_csv(payload))
    else:
        rep = measures_from_descriptor(payload, cfg)
    _emit(rep.to_dict(), args, cfg)
    return EXIT_OK


def cmd_boundary(args, cfg: CliConfig) -> int:
    rows = boundary.boundary_export(args.curve, args.samples, tol=cfg.quad_tol)
    if args.out:
        boundary.write_boundary_csv(rows, args.out)
    else:
        print("param,xi,psi")
        for r in rows:
            print(",".join("%.15g" % x for x in r))
    return EXIT_OK


def _format_table(rows, value_label: str) -> str:
    head = f"{'Family':<18}{'Parameter':>11}{'xi':>10}{'psi':>10}{value_label:>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        if r.status != "ok":
            lines.append(f"{r.family:<18}{'error':>11}  {r.message}")
        else:
            lines.append(f"{r.family:<18}{r.param:>11.4g}{r.xi:>10.4f}{r.psi:>10.4f}{r.value:>10.4f}")
    return "\n".join(lines)


def _write_table_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("family,param,xi,psi,value,status\n")
        for r in rows:
            vals = ["" if x is None else "%.15g" % x for x in (r.param, r.xi, r.psi, r.value)]
            fh.write(",".join([r.family, *vals, r.status]) + "\n")


def _cmd_table(args, cfg: CliConfig, builder, value_label: str) -> int:
    rows = builder(n=cfg.grid_n, threads=cfg.workers, tol=max(cfg.quad_tol, 1e-6))
    print(_format_table(rows, value_label))
    if args.out:
        if cfg.format == "json":
            Path(args.out).write_text(json.dumps([r.to_dict() for r in rows], indent=2) + "\n")
        else:
            _write_table_csv(rows, args.out)
    return EXIT_OK


def cmd_table1(args, cfg: CliConfig) -> int:
    return _cmd_table(args, cfg, optimize.table1, "psi-xi")


def cmd_table2(args, cfg: CliConfig) -> int:
    return _cmd_table(args, cfg, optimize.table2, "xi+psi")


def _write_solution(sol: optimize.QPSolution, prefix: str) -> dict:
    out = Path(prefix)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    gridcop.write_grid_csv(sol.h, f"{prefix}_h.csv")
    dens = optimize.qp_density_export(sol)
    cmax = write_pgm(dens.c, f"{prefix}_density.pgm")
    write_density_csv(dens.c, f"{prefix}_density.csv")
    write_log_csv(sol.log, f"{prefix}_log.csv")
    return {"max_density": cmax, "density_clip": dens.clip_magnitude}


def cmd_optimize(args, cfg: CliConfig) -> int:
    if args.mu is None:
        raise InputError("optimize needs --mu")
    prob = optimize.QPProblem(args.mu, cfg.grid_n)
    prefix = args.out or os.path.join(cfg.output_dir, f"qp_mu{args.mu:g}_n{cfg.grid_n}")
    code = EXIT_OK
    try:
        sol = optimize.qp_solve(prob, max_iters=args.max_iters)
    except optimize.QPConvergenceError as exc:
        sol = exc.best
        code = EXIT_NO_CONVERGENCE
        print(f"error: {exc}", file=sys.stderr)
    extra = _write_solution(sol, prefix)
    summary = {
        "mu": args.mu,
        "n": cfg.grid_n,
        "objective": sol.objective,
        "xi": sol.xi,
        "psi": sol.psi,
        "feasibility_residual": sol.feasibility_residual,
        "stationarity_residual": sol.stationarity_residual,
        "iterations": sol.iterations,
        "converged": code == EXIT_OK,
        **extra,
    }
    Path(f"{prefix}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return code


def cmd_region_check(args, cfg: CliConfig) -> int:
    p = boundary.RegionPoint(args.xi, args.psi)
    verdict = boundary.region_check(p, args.slack)
    _emit({"xi": args.xi, "psi": args.psi, **verdict.to_dict()}, args, cfg)
    return EXIT_OK


def cmd_twoparam(args, cfg: CliConfig) -> int:
    if args.mu is not None:
        if args.alpha is not None or args.beta is not None:
            raise InputError("give either --mu or --alpha/--beta, not both")
        pp = twoparam.path_params(args.mu)
        alpha, beta = pp.alpha, pp.beta
    else:
        if args.alpha is None or args.beta is None:
            raise InputError("twoparam needs --mu or both --alpha and --beta")
        alpha, beta = args.alpha, args.beta
    sc = twoparam.strip_build(alpha, beta)
    if args.out and cfg.format in ("pgm", "csv"):
        c = twoparam.strip_density_grid(sc, cfg.grid_n)
        if cfg.format == "pgm":
            write_pgm(c, args.out)
        else:
            write_density_csv(c, args.out)
        print(json.dumps({"alpha": alpha, "beta": beta, "density": args.out, "n": cfg.grid_n}))
        return EXIT_OK
    rep = twoparam.strip_measures(sc, cfg.quad_tol)
    _emit({"alpha": alpha, "beta": beta, **rep.to_dict()}, args, cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=None, help="grid cells per axis (default 400)")
    common.add_argument("--tol", type=float, default=None, help="quadrature tolerance (default 1e-6)")
    common.add_argument("--threads", type=int, default=None, help="worker threads, 0 = all cores")
    common.add_argument("--format", choices=FORMATS, default=None, help="output format where a choice exists")
    common.add_argument("--config", default=None, help="JSON file with default settings")
    common.add_argument("--out", default=None, help="output file or prefix")

    ap = argparse.ArgumentParser(prog="xipsi", description="Chatterjee's xi and Spearman's footrule for copulas.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measures", parents=[common], help="xi, psi and tau of a family descriptor or grid CSV")
    p.add_argument("descriptor", help="inline JSON, a JSON file, or a gridcop CSV file")
    p.set_defaults(func=cmd_measures)

    p = sub.add_parser("boundary", parents=[common], help="sample a region curve to CSV")
    p.add_argument("curve", choices=boundary.CURVES)
    p.add_argument("--samples", type=int, default=101)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("table1", parents=[common], help="per-family maximizers of psi - xi")
    p.set_defaults(func=cmd_table1)
    p = sub.add_parser("table2", parents=[common], help="per-family minimizers of xi + psi")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("optimize", parents=[common], help="solve the discretized lower-boundary program")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=200)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("region-check", parents=[common], help="classify an (xi, psi) point")
    p.add_argument("xi", type=float)
    p.add_argument("psi", type=float)
    p.add_argument("--slack", type=float, default=0.0)
    p.set_defaults(func=cmd_region_check)

    p = sub.add_parser("twoparam", parents=[common], help="strip copula measures or density export")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=cmd_twoparam)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        if args.command == "boundary" and args.samples < 2:
            raise InputError("--samples must be at least 2")
        return args.func(args, cfg)
    except gridcop.InfeasibleGridError as exc:
        print(f"error: infeasible input: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
