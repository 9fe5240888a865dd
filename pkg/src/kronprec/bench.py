"""Benchmark driver: iteration/time tables over a (h, p) grid.

Usage::

    kronprec-bench --domain quarter_ring --method collocation --precond fd,ilu0 \
        --p 2,3,4,5 --h-list 1/32,1/64,1/128 --out results --format both

Options given on the command line override those read from ``--config``
(a YAML mapping with the same keys as :class:`BenchConfig`).
"""
import argparse
import csv
import dataclasses
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from .assembly import METHODS, assemble, assemble_rhs, manufactured_source, parametric_matrices
from .fastdiag import build_preconditioner
from .geometry import GEOMETRIES, get_geometry
from .krylov import bicgstab, build_ilu0
from .splines import SplineSpace1D

log = logging.getLogger("kronprec.bench")

PRECONDITIONERS = ("fd", "bs", "ilu0", "none")
FORMATS = ("csv", "markdown", "both")
FIELDS = ["domain", "method", "precond", "p", "num_elements", "h", "N", "iterations",
          "converged", "status", "assembly_time", "setup_time", "solve_time", "total_time",
          "true_residual", "message"]


@dataclasses.dataclass
class BenchConfig:
    """Settings of one benchmark run; see the README for the defaults."""
    domain: str = "quarter_ring"
    method: str = "collocation"
    p_list: list = dataclasses.field(default_factory=lambda: [2, 3, 4, 5])
    h_list: list = dataclasses.field(default_factory=lambda: [32, 64, 128])
    precond: list = dataclasses.field(default_factory=lambda: ["fd"])
    tol: float = 1e-8
    max_iter: int = 1000
    out: str = "results"
    format: str = "both"
    memory_limit_mb: float = 3000.0
    rhs_points: int = 0
    tol_imag: float = 1e-8
    cond_max: float = 1e8
    plots: bool = True
    warmup: bool = True
    diagnostics: bool = False

    def __post_init__(self):
        self.p_list = [int(p) for p in _as_list(self.p_list)]
        self.h_list = [parse_h(h) for h in _as_list(self.h_list)]
        self.precond = [str(s).lower() for s in _as_list(self.precond)]
        self.validate()

    def validate(self):
        if self.domain not in GEOMETRIES:
            raise ValueError("unknown domain %r (choose from %s)" % (self.domain, ", ".join(GEOMETRIES)))
        if self.method not in METHODS:
            raise ValueError("unknown method %r (choose from %s)" % (self.method, ", ".join(METHODS)))
        for s in self.precond:
            if s not in PRECONDITIONERS:
                raise ValueError("unknown preconditioner %r (choose from %s)"
                                 % (s, ", ".join(PRECONDITIONERS)))
        if self.format not in FORMATS:
            raise ValueError("format must be one of %s" % ", ".join(FORMATS))
        if any(p < 1 for p in self.p_list):
            raise ValueError("degrees must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError("config file must hold a mapping")
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError("unknown config keys: %s" % ", ".join(sorted(unknown)))
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def _as_list(v):
    if isinstance(v, str):
        return [s.strip() for s in v.split(",") if s.strip()]
    if np.isscalar(v):
        return [v]
    return list(v)


def parse_h(h):
    """Number of elements from ``32``, ``"32"``, ``"1/32"`` or ``0.03125``."""
    if isinstance(h, str) and "/" in h:
        frac = Fraction(h)
        if frac <= 0 or frac.numerator != 1:
            raise ValueError("h must be of the form 1/n, got %r" % h)
        return frac.denominator
    x = float(h)
    if x >= 1:
        if x != int(x):
            raise ValueError("number of elements must be an integer, got %r" % h)
        return int(x)
    if x <= 0:
        raise ValueError("h must be positive")
    n = round(1.0 / x)
    if abs(n * x - 1.0) > 1e-9:
        raise ValueError("h=%r is not the reciprocal of an integer" % h)
    return n


def estimate_memory_mb(d, num_elements, p, precond):
    """Rough peak memory of assembling (and ILU-factoring) one cell."""
    n = num_elements + p - 2
    N = n ** d
    band = (2 * p + 1) ** d
    mb = 40.0 * N * band / 2 ** 20
    if precond == "ilu0":
        mb *= 1.5
    return mb


def _make_preconditioner(name, system, spaces, cfg):
    if name in ("fd", "bs"):
        return build_preconditioner(parametric_matrices(spaces, system.method), backend=name,
                                    tol_imag=cfg.tol_imag, cond_max=cfg.cond_max)
    if name == "ilu0":
        return build_ilu0(system.operator)
    return None


def run_cell(G, cfg, p, num_elements, precond):
    """Assemble, precondition and solve one grid cell; returns a result row."""
    d = G.dim
    row = dict(domain=cfg.domain, method=cfg.method, precond=precond, p=p,
               num_elements=num_elements, h=1.0 / num_elements, N=(num_elements + p - 2) ** d,
               iterations=None, converged=False, status="", assembly_time=None,
               setup_time=None, solve_time=None, total_time=None, true_residual=None,
               message="")
    mem = estimate_memory_mb(d, num_elements, p, precond)
    if mem > cfg.memory_limit_mb:
        row.update(status="*", message="estimated %.0f MB exceeds the memory limit" % mem)
        return row
    try:
        spaces = [SplineSpace1D.uniform(num_elements, p)] * d
        t0 = time.perf_counter()
        system = assemble(G, spaces, cfg.method, f=manufactured_source)
        if cfg.rhs_points and cfg.method != "collocation":
            system.rhs = assemble_rhs(G, manufactured_source, spaces, cfg.method, cfg.rhs_points)
        row["assembly_time"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        P = _make_preconditioner(precond, system, spaces, cfg)
        setup = time.perf_counter() - t0
        _, rep = bicgstab(system.operator, system.rhs, P, tol=cfg.tol, max_iter=cfg.max_iter,
                          setup_time=setup)
    except (MemoryError, ZeroDivisionError, np.linalg.LinAlgError, ValueError) as exc:
        row.update(status="failed", message="%s: %s" % (type(exc).__name__, exc))
        return row
    row.update(iterations=rep.iterations, converged=rep.converged, status=rep.status,
               setup_time=rep.setup_time, solve_time=rep.solve_time, total_time=rep.total_time,
               true_residual=rep.true_residual)
    if P is not None and getattr(P, "fallback_reason", None):
        row["message"] = "fell back to bs: " + P.fallback_reason
    return row


def _warmup(G, cfg):
    # compile numba kernels and touch BLAS once so timings exclude start-up costs
    for precond in cfg.precond:
        run_cell(G, dataclasses.replace(cfg, max_iter=3), min(cfg.p_list), 4, precond)


def run_benchmark(cfg):
    """Run every (precond, h, p) cell of `cfg`; failures are recorded, not raised."""
    G = get_geometry(cfg.domain)
    if cfg.warmup:
        _warmup(G, cfg)
    results = []
    for precond in cfg.precond:
        for ne in cfg.h_list:
            for p in cfg.p_list:
                row = run_cell(G, cfg, p, ne, precond)
                log.info("%s %s %s h=1/%d p=%d: %s", cfg.domain, cfg.method, precond, ne, p,
                         format_cell(row))
                results.append(row)
    return results


def format_iterations(it):
    return "%.1f" % it


def format_cell(row):
    if row["status"] == "*":
        return "*"
    if row["iterations"] is None:
        return "failed"
    cell = "%s / %.2f" % (format_iterations(row["iterations"]), row["total_time"])
    if not row["converged"]:
        cell += " (%s)" % row["status"]
    return cell


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELDS)
        for r in results:
            w.writerow([_csv_value(r.get(k)) for k in FIELDS])
    return path


def read_csv(path):
    """Parse a file written by :func:`write_csv` back into result rows."""
    ints = {"p", "num_elements", "N"}
    floats = {"h", "iterations", "assembly_time", "setup_time", "solve_time", "total_time",
              "true_residual"}
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                if v == "" and k not in ("status", "message"):
                    row[k] = None
                elif k in ints:
                    row[k] = int(v)
                elif k in floats:
                    row[k] = float(v)
                elif k == "converged":
                    row[k] = v == "True"
                else:
                    row[k] = v
            out.append(row)
    return out


def markdown_table(results):
    """Iterations / seconds per cell: one block per preconditioner, rows h, columns p."""
    ps = sorted({r["p"] for r in results})
    cols = ["precond", "h"] + ["p=%d" % p for p in ps]
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    blocks = []
    for r in results:
        if r["precond"] not in blocks:
            blocks.append(r["precond"])
    for prec in blocks:
        hs = []
        for r in results:
            if r["precond"] == prec and r["num_elements"] not in hs:
                hs.append(r["num_elements"])
        for ne in hs:
            cells = {r["p"]: format_cell(r) for r in results
                     if r["precond"] == prec and r["num_elements"] == ne}
            lines.append("| %s | 1/%d | " % (prec, ne)
                         + " | ".join(cells.get(p, "") for p in ps) + " |")
    return "\n".join(lines) + "\n"


def emit_table(results, path, format="csv"):
    """Write `results` to `path` as CSV or Markdown."""
    path = Path(path)
    if format == "csv":
        return write_csv(results, path)
    if format == "markdown":
        path.write_text(markdown_table(results))
        return path
    raise ValueError("format must be 'csv' or 'markdown'")


def write_outputs(results, cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = "%s_%s" % (cfg.domain, cfg.method)
    written = []
    if cfg.format in ("csv", "both"):
        written.append(emit_table(results, out / (stem + ".csv"), "csv"))
    if cfg.format in ("markdown", "both"):
        written.append(emit_table(results, out / (stem + ".md"), "markdown"))
    if cfg.plots and results:
        from .plotting import plot_iterations
        written.append(plot_iterations(results, out / (stem + ".png"),
                                       title="%s, %s" % (cfg.domain, cfg.method)))
    return written


def run_diagnostics(cfg):
    from .diagnostics import diagnostics_rows, write_rows_csv
    from .plotting import plot_e_h
    G = get_geometry(cfg.domain)
    rows = diagnostics_rows(G, degrees=[p for p in cfg.p_list if p <= 4] or [2])
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_rows_csv(rows, out / ("%s_diagnostics.csv" % cfg.domain))]
    if cfg.plots:
        written.append(plot_e_h(rows, out / ("%s_e_h.png" % cfg.domain)))
    return rows, written


def build_parser():
    ap = argparse.ArgumentParser(prog="kronprec-bench", description=__doc__.split("\n")[0])
    ap.add_argument("--config", help="YAML file with BenchConfig keys")
    ap.add_argument("--domain", choices=sorted(GEOMETRIES))
    ap.add_argument("--method", choices=METHODS)
    ap.add_argument("--precond", help="comma-separated subset of %s" % ",".join(PRECONDITIONERS))
    ap.add_argument("--p", dest="p_list", help="comma-separated degrees, e.g. 2,3,4,5")
    ap.add_argument("--h-list", dest="h_list", help="comma-separated mesh sizes, e.g. 1/32,1/64")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--max-iter", dest="max_iter", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--memory-limit-mb", dest="memory_limit_mb", type=float)
    ap.add_argument("--no-plots", dest="plots", action="store_false", default=None)
    ap.add_argument("--diagnostics", action="store_true", default=None,
                    help="also compute e_h and spectral diagnostics for the domain")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args):
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("config", "verbose") and v is not None}
    if args.config:
        return BenchConfig.from_file(args.config, **overrides)
    return BenchConfig(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError, yaml.YAMLError) as exc:
        print("kronprec-bench: error: %s" % exc, file=sys.stderr)
        return 2
    results = run_benchmark(cfg)
    try:
        written = write_outputs(results, cfg)
        if cfg.diagnostics:
            written += run_diagnostics(cfg)[1]
    except OSError as exc:
        print("kronprec-bench: error: %s" % exc, file=sys.stderr)
        return 2
    print(markdown_table(results), end="")
    for path in written:
        print("wrote %s" % path)
    ok = all(r["converged"] for r in results if r["status"] != "*")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
