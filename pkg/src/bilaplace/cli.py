"""Command-line front end: ``bilaplace {solve,green,verify,sample,repulsion}``.

Each run writes a CSV (the data) and a JSON summary that echoes the resolved
configuration.  With ``--out PREFIX`` they go to ``PREFIX.csv`` and
``PREFIX.json``; otherwise the CSV goes to stdout and the JSON to stderr.

Exit codes: 0 success, 2 invalid input, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .fullspace import AccuracyError
from .lattice import DomainError, LatticeDomain
from .solver import NonConvergenceError, SizeError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

VERIFY_IDS = ("green-bounds", "caccioppoli", "inner-decay", "outer-decay", "corner", "poincare",
              "convergence", "fullspace", "continuity")

DEFAULT_GRIDS = {
    "green-bounds": {2: [8, 16, 32], 3: [6, 10, 14]},
    "caccioppoli": {2: [16, 32, 64], 3: [16, 24, 32]},
    "inner-decay": {2: [16, 32, 64], 3: [16, 24, 32]},
    "outer-decay": {2: [16, 32, 64], 3: [16, 24, 32]},
    "poincare": {2: [16, 32, 64], 3: [12, 16, 24]},
    "corner": {2: [64]},
    "convergence": {2: [8, 16, 32, 64], 3: [4, 8, 16]},
}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(args, csv_text: str, summary: dict, extra_files: dict | None = None):
    summary = {"config": _config(args), **summary}
    js = json.dumps(summary, indent=2, default=_json_default)
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.csv").write_text(csv_text)
        Path(f"{prefix}.json").write_text(js + "\n")
        for suffix, text in (extra_files or {}).items():
            Path(f"{prefix}{suffix}").write_text(text)
    else:
        sys.stdout.write(csv_text)
        sys.stderr.write(js + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(type(obj).__name__)


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _check_n(n):
    if n not in (2, 3):
        raise UsageError(f"--n must be 2 or 3, got {n}")


def _domain(n, M) -> LatticeDomain:
    _check_n(n)
    if M < 2:
        raise UsageError(f"--M must be >= 2, got {M}")
    return LatticeDomain(n, M)


def _point(domain, y, flag="--y"):
    if y is None or len(y) != domain.n:
        raise UsageError(f"{flag} needs {domain.n} comma-separated indices")
    y = tuple(y)
    if not domain.in_lattice(y):
        raise UsageError(f"{flag} {y} lies outside the lattice 0..{domain.M}")
    return y


def _lattice_rows(domain, arr):
    for k in np.ndindex(*domain.lattice_shape):
        yield (*k, float(arr[k]))


def _index_header(n):
    return ["ix", "iy", "iz"][:n]


# --------------------------------------------------------------------------

def cmd_solve(args):
    from .operators import delta_function
    from .solver import energy_norm, solve_bilaplacian

    domain = _domain(args.n, args.M)
    if args.rhs == "delta":
        y = _point(domain, args.y)
        if not domain.in_interior(y):
            raise UsageError("--rhs delta needs an interior --y")
        f = delta_function(domain, y)
    else:
        f = np.ones(domain.interior_shape)
    t = time.perf_counter()
    u, rep = solve_bilaplacian(domain, f, tol=args.tol, method=args.method,
                               maxiter=args.maxiter, preconditioner=args.preconditioner)
    _emit(args, _csv_text(_index_header(domain.n) + ["value"], _lattice_rows(domain, u.on_lattice())),
          {"iterations": rep.iterations, "residual": rep.residual, "method": rep.method,
           "energy": energy_norm(u), "seconds": time.perf_counter() - t})


def cmd_green(args):
    from .green import green_column, green_derivatives

    domain = _domain(args.n, args.M)
    y = _point(domain, args.y)
    if args.derivatives and not args.out:
        raise UsageError("--derivatives needs --out")
    if domain.in_interior(y):
        col = green_column(domain, y, tol=args.tol, cache_dir=args.cache_dir)
        arr = col.values.on_lattice()
        info = {"iterations": col.report.iterations, "residual": col.report.residual,
                "method": col.report.method}
    else:
        arr = np.zeros(domain.lattice_shape)
        info = {"note": "source on the boundary; the column is identically zero"}
    extra = {}
    if args.derivatives:
        bundle = green_derivatives(domain, y, source=args.tol)
        names = ("grad_x", "hess_x", "grad_x_grad_y", "hess_x_grad_y", "hess_x_hess_y")
        rows = []
        for k in np.ndindex(*domain.lattice_shape):
            rows.append((*k, *[float(np.sqrt(np.sum(getattr(bundle, nm).at(np.array(k)) ** 2)))
                               for nm in names]))
        extra[".derivatives.csv"] = _csv_text(_index_header(domain.n) + list(names), rows)
    _emit(args, _csv_text(_index_header(domain.n) + ["value"], _lattice_rows(domain, arr)),
          {"y": list(y), "rows": int(arr.size), **info}, extra)


def _grids(args, key):
    if args.M:
        return args.M
    try:
        return DEFAULT_GRIDS[key][args.n]
    except KeyError:
        raise UsageError(f"no default grids for {key} with n={args.n}; pass --M")


def cmd_verify(args):
    from . import verify as v

    if args.id not in VERIFY_IDS:
        raise UsageError(f"unknown estimate id {args.id!r}; valid ids: {', '.join(VERIFY_IDS)}")
    _check_n(args.n)
    kw = {"jobs": args.jobs}
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.seed is not None:
        kw["seed"] = args.seed
    eid = args.id
    if eid == "green-bounds":
        reports = v.verify_green_bounds(args.n, _grids(args, eid), jobs=args.jobs)
    elif eid == "caccioppoli":
        reports = {"caccioppoli": v.verify_caccioppoli(args.n, _grids(args, eid), **kw)}
    elif eid == "inner-decay":
        reports = {"inner-decay": v.verify_inner_decay(args.n, _grids(args, eid), **kw)}
    elif eid == "outer-decay":
        reports = v.verify_outer_decay(args.n, _grids(args, eid), **kw)
    elif eid == "poincare":
        reports = v.verify_poincare_sobolev(args.n, _grids(args, eid), **kw)
    elif eid == "corner":
        if args.n != 2:
            raise UsageError("the corner fit is defined for n=2")
        reports = {"corner": v.verify_corner(_grids(args, eid))}
    elif eid == "convergence":
        Ms = _grids(args, eid)
        if len(Ms) < 2 or any(b != 2 * a for a, b in zip(Ms, Ms[1:])):
            raise UsageError("--M for convergence must be successive doublings, e.g. 8,16,32,64")
        y = args.y_frac or [0.5] * args.n
        if len(y) != args.n:
            raise UsageError(f"--y-frac needs {args.n} values")
        reports = {"convergence": v.convergence_report(args.n, y, Ms[0], len(Ms) - 1)}
    elif eid == "fullspace":
        reports = {"fullspace": v.fullspace_report(args.n)}
    else:
        Ns = args.N or [8, 16, 32]
        reports = {"continuity": v.continuity_report(args.n, Ns)}
    _emit(args, _merge_csv([r.to_csv() for r in reports.values()]),
          {"reports": [r.summary() for r in reports.values()]})


def _merge_csv(parts) -> str:
    """Concatenate report tables; a shared header is written once."""
    parts = [p for p in parts if p]
    if not parts:
        return ""
    heads = {p.split("\n", 1)[0] for p in parts}
    if len(heads) == 1:
        return parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
    return "\n".join(parts)


def cmd_sample(args):
    from .membrane import BATCH, MembraneModel, sample_values

    _check_n(args.n)
    if args.N < 0 or args.samples < 1:
        raise UsageError("--N must be >= 0 and --samples >= 1")
    model = MembraneModel(args.n, args.N)
    size = model.size
    if size > args.cap:
        raise UsageError(f"V_N has {size} points, above the Green-matrix cap {args.cap}")
    vals = sample_values(model, args.seed, args.samples, jobs=args.jobs)
    diag = np.diag(model.covariance)
    emp = vals.var(axis=0, ddof=0) if args.samples > 1 else np.zeros(size)
    pos = np.all(vals >= 0, axis=1)
    batches = [float(pos[s:s + BATCH].mean()) for s in range(0, args.samples, BATCH)]
    pts = model.points()
    header = ["sample"] + ["psi_" + "_".join(str(int(c)) for c in p) for p in pts]
    rows = ((k, *row) for k, row in enumerate(vals.tolist()))
    _emit(args, _csv_text(header, rows), {
        "size": size,
        "points": pts.tolist(),
        "exact_variance": diag.tolist(),
        "empirical_variance": emp.tolist(),
        "max_relative_variance_deviation": float(np.max(np.abs(emp - diag) / diag)),
        "positivity_fraction": float(pos.mean()),
        "positivity_fraction_per_batch": batches,
        "batch_size": BATCH,
    })


def cmd_repulsion(args):
    from .membrane import entropic_repulsion_mc, repulsion_exponent_fit

    _check_n(args.n)
    if args.samples < 1 or not args.N or min(args.N) < 0:
        raise UsageError("--N must list nonnegative sizes and --samples must be >= 1")
    rows = entropic_repulsion_mc(args.n, args.N, args.samples, seed=args.seed, jobs=args.jobs)
    header = ["N", "samples", "hits", "p_hat", "ci_low", "ci_high", "neg_log_p", "lower_bound_only"]
    body = [(r.N, r.samples, r.hits, r.p_hat, r.ci_low, r.ci_high, r.neg_log_p, int(r.lower_bound_only))
            for r in rows]
    neg = [r.neg_log_p for r in rows]
    _emit(args, _csv_text(header, body), {
        "monotone": all(b > a for a, b in zip(neg, neg[1:])),
        "exponent_fit": repulsion_exponent_fit(rows),
        "reference_exponent": args.n - 1,
    })


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bilaplace", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=False):
        sp.add_argument("--n", type=int, default=2, help="dimension (2 or 3)")
        sp.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker threads")

    s = sub.add_parser("solve", help="solve the clamped bilaplace equation")
    common(s)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--rhs", choices=("delta", "ones"), default="delta")
    s.add_argument("--y", type=_int_list, help="source index for --rhs delta")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--method", choices=("cg", "dense"), default="cg")
    s.add_argument("--maxiter", type=int, default=None, help="CG iteration cap")
    s.add_argument("--preconditioner", choices=("jacobi", "dirichlet", "none"), default="jacobi")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("green", help="one column of the Green's function over the lattice")
    common(g)
    g.add_argument("--M", type=int, required=True)
    g.add_argument("--y", type=_int_list, required=True, help="source index, e.g. 8,8")
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--derivatives", action="store_true",
                   help="also write Frobenius norms of the derivative bundles")
    g.add_argument("--cache-dir", type=Path, default=None,
                   help="column cache directory (default: $BILAP_CACHE_DIR)")
    g.set_defaults(func=cmd_green)

    v = sub.add_parser("verify", help="empirical constants for one estimate")
    common(v, jobs=True)
    v.add_argument("--id", required=True, help="one of: " + ", ".join(VERIFY_IDS))
    v.add_argument("--M", type=_int_list, help="grid list, e.g. 8,16,32")
    v.add_argument("--N", type=_int_list, help="membrane sizes for --id continuity")
    v.add_argument("--trials", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--y-frac", type=_float_list, help="continuum source for --id convergence")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("sample", help="draw membrane samples on V_N")
    common(m, jobs=True)
    m.add_argument("--N", type=int, required=True)
    m.add_argument("--samples", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--cap", type=int, default=5000, help="largest V_N handled by the dense factor")
    m.set_defaults(func=cmd_sample)

    r = sub.add_parser("repulsion", help="Monte Carlo probability that the field is nonnegative")
    common(r, jobs=True)
    r.add_argument("--N", type=_int_list, required=True)
    r.add_argument("--samples", type=int, default=10 ** 6)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_repulsion)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, DomainError, SizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergenceError, AccuracyError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
