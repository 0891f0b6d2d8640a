"""``facetqp`` command line: ``solve``, ``bench`` and ``spectrum``.

Exit codes: 0 success, 1 no convergence, 2 usage or input error,
3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import mmio
from .analysis import IterationTraceHook
from .constraints import BoxConstraints
from .errors import DenseCapExceeded, FacetQPError, NumericalBreakdown
from .linalg import dense_cap
from .problems import QpProblem, journal_bearing, obstacle_laplace_2d, random_box_qp
from .solvers import SolverConfig, solve

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_BREAKDOWN = 0, 1, 2, 3

PRECOND_TO_KIND = {"cholesky": "cholesky", "icc": "ic0", "ssor": "ssor"}
BENCH_HEADER = ["method", "type", "precond", "hess", "cg", "exp", "prop", "time_s", "sb", "sm"]


class UsageError(Exception):
    pass


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", required=True, choices=["jbearing", "obstacle", "random", "mm"])
    g.add_argument("--nx", type=int, default=400, help="journal bearing nodes along the angle")
    g.add_argument("--ny", type=int, default=25, help="journal bearing nodes across the width")
    g.add_argument("--eps", type=float, default=0.1, help="journal bearing eccentricity")
    g.add_argument("--bgeom", type=float, default=10.0, help="journal bearing half-width")
    g.add_argument("--n", type=int, default=6, help="obstacle grid size or random QP dimension")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--load", type=float, default=1.0)
    g.add_argument("--obstacle-height", type=float, default=float("inf"))
    g.add_argument("--matrix", help="Matrix Market file (--problem mm)")
    g.add_argument("--rhs", help="right-hand side vector file (--problem mm)")
    g.add_argument("--lower", help="lower bound vector file, 'inf' tokens allowed")
    g.add_argument("--upper", help="upper bound vector file, 'inf' tokens allowed")
    g.add_argument("--dump-problem", metavar="PREFIX",
                   help="also write the problem as Matrix Market + vector files")


def _add_solver_args(p, method_required):
    g = p.add_argument_group("solver")
    if method_required:
        g.add_argument("--solver", required=True, choices=["mprgp", "mppcg"])
    g.add_argument("--rtol", type=float, default=1e-10)
    g.add_argument("--atol", type=float, default=None)
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--abar", type=float, default=None, help="fixed expansion step (default 1.9/||A||)")
    g.add_argument("--abar-factor", type=float, default=1.9)
    g.add_argument("--max-iter", type=int, default=None)
    g.add_argument("--expansion-gradient", choices=["half-step", "iteration-start"],
                   default="half-step")
    g.add_argument("--ssor-omega", type=float, default=1.0)
    g.add_argument("--ic0-shift", action="store_true", help="retry IC(0) with a diagonal shift")
    g.add_argument("--no-mppcg-safeguard", action="store_true",
                   help="accept projected CG steps even when the cost increases")
    g.add_argument("--fixed-free", metavar="FILE",
                   help="indices (one per line) that never become active; face mode factors once on them")


def _add_face_args(p, default_face="none", default_precond="none"):
    p.add_argument("--face", choices=["none", "face", "approx"], default=default_face)
    p.add_argument("--precond", choices=["none", "cholesky", "icc", "ssor"], default=default_precond)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facetqp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configuration and write a JSON report")
    _add_problem_args(p)
    _add_solver_args(p, method_required=True)
    _add_face_args(p)
    p.add_argument("--output", "-o", help="JSON report path (default: stdout)")
    p.add_argument("--trace", action="store_true", help="include the per-step trace")
    p.add_argument("--no-solution", action="store_true", help="omit x from the report")

    p = sub.add_parser("bench", help="sweep methods x preconditioning types into a CSV table")
    _add_problem_args(p)
    _add_solver_args(p, method_required=False)
    p.add_argument("--methods", default="mprgp,mppcg")
    p.add_argument("--precond", default="none,cholesky,icc,ssor",
                   help="comma list from none,cholesky,icc,ssor")
    p.add_argument("--types", default="face,approx", help="comma list from face,approx")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")

    p = sub.add_parser("spectrum", help="per-iteration Schur-complement diagnostics as CSV")
    _add_problem_args(p)
    _add_solver_args(p, method_required=False)
    _add_face_args(p, default_face="approx", default_precond="cholesky")
    p.add_argument("--solver", choices=["mprgp", "mppcg"], default="mprgp")
    p.add_argument("--sample-every", type=int, default=1)
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    return parser


def load_problem(args):
    """Return ``(problem, box, x0)`` described by the problem flags."""
    if args.problem == "jbearing":
        problem, box = journal_bearing(args.nx, args.ny, args.eps, args.bgeom)
        x0 = None
    elif args.problem == "obstacle":
        problem, box = obstacle_laplace_2d(args.n, args.load, args.obstacle_height)
        x0 = None
    elif args.problem == "random":
        problem, box, x0 = random_box_qp(args.n, args.seed)
    else:
        if not args.matrix or not args.rhs:
            raise UsageError("--problem mm needs --matrix and --rhs")
        A = mmio.read_matrix(args.matrix)
        problem = QpProblem(A, mmio.read_vector(args.rhs), "mm")
        lower = mmio.read_vector(args.lower) if args.lower else np.full(A.n, -np.inf)
        upper = mmio.read_vector(args.upper) if args.upper else np.full(A.n, np.inf)
        box = BoxConstraints(lower, upper)
        x0 = None
    if args.dump_problem:
        mmio.write_problem(args.dump_problem, problem, box)
    return problem, box, x0


def make_config(args, method, face, precond) -> SolverConfig:
    if (face == "none") != (precond == "none"):
        raise UsageError("--face none goes with --precond none and vice versa")
    fixed = None
    if getattr(args, "fixed_free", None):
        fixed = tuple(int(v) for v in mmio.read_vector(args.fixed_free))
    return SolverConfig.for_method(
        method,
        gamma=args.gamma,
        abar=args.abar,
        abar_factor=args.abar_factor,
        rtol=args.rtol,
        atol=args.atol,
        max_iter=args.max_iter,
        face_mode=face,
        inner_kind=PRECOND_TO_KIND.get(precond, "cholesky"),
        expansion_gradient_source=args.expansion_gradient,
        fixed_free=fixed,
        ssor_omega=args.ssor_omega,
        ic0_shift=args.ic0_shift,
        mppcg_safeguard=not args.no_mppcg_safeguard,
    )


def _open_out(path):
    return open(path, "w", newline="") if path else None


def cmd_solve(args) -> int:
    problem, box, x0 = load_problem(args)
    cfg = make_config(args, args.solver, args.face, args.precond)
    report = solve(problem, box, x0, cfg)
    doc = {
        "problem": problem.name,
        "n": problem.n,
        "method": args.solver,
        "type": args.face,
        "precond": args.precond,
        **report.summary(),
        "accounting_ok": report.accounting_ok(),
    }
    if not args.no_solution:
        doc["x"] = report.x.tolist()
    if args.trace:
        doc["trace"] = [{k: v for k, v in vars(r).items() if v is not None} for r in report.trace]
    text = json.dumps(doc, indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    print(f"{problem.name} {args.solver}/{args.face}/{args.precond}: "
          f"{'converged' if report.converged else 'NOT converged'} hess={report.hessian_mults} "
          f"cg={report.cg_steps} exp={report.expansion_steps} prop={report.proportioning_steps} "
          f"|gP|={report.gp_norm:.3e} time={report.elapsed:.3f}s", file=sys.stderr)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def bench_grid(methods, preconds, types):
    cells = []
    for method in methods:
        if "none" in preconds:
            cells.append((method, "none", "none"))
        for precond in preconds:
            if precond == "none":
                continue
            for face in types:
                cells.append((method, face, precond))
    return cells


def _bench_cell(args, method, face, precond):
    try:
        problem, box, x0 = load_problem(args)
        report = solve(problem, box, x0, make_config(args, method, face, precond))
    except NumericalBreakdown as exc:
        return {"status": f"breakdown: {type(exc).__name__}"}
    return {
        "status": "ok" if report.converged else "not_converged",
        "hess": report.hessian_mults,
        "cg": report.cg_steps,
        "exp": report.expansion_steps,
        "prop": report.proportioning_steps,
        "time_s": report.elapsed,
    }


def _split_list(text, allowed, flag):
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in allowed]
    if bad or not items:
        raise UsageError(f"{flag} accepts a comma list from {','.join(allowed)}")
    return items


def _warmup():
    # compile the numba kernels outside the timed region
    problem, box, x0 = random_box_qp(4, 0)
    for face, kind in (("none", "cholesky"), ("face", "ic0"), ("approx", "ssor")):
        solve(problem, box, x0, SolverConfig(face_mode=face, inner_kind=kind))


def bench_rows(args):
    methods = _split_list(args.methods, ("mprgp", "mppcg"), "--methods")
    preconds = _split_list(args.precond, ("none", "cholesky", "icc", "ssor"), "--precond")
    types = _split_list(args.types, ("face", "approx"), "--types")
    cells = bench_grid(methods, preconds, types)
    args.dump_problem = None
    _warmup()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_cell, [args] * len(cells),
                                    *zip(*cells)))
    else:
        results = [_bench_cell(args, *cell) for cell in cells]
    times = {cell: res.get("time_s") for cell, res in zip(cells, results)
             if res["status"] == "ok"}
    rows = []
    for (method, face, precond), res in zip(cells, results):
        row = {"method": method, "type": face, "precond": precond, "status": res["status"]}
        for key in ("hess", "cg", "exp", "prop"):
            row[key] = res.get(key, "")
        t = res.get("time_s")
        row["time_s"] = "" if t is None else f"{t:.4f}"
        base_same = times.get((method, "none", "none"))
        base_mprgp = times.get(("mprgp", "none", "none"))
        ok = res["status"] == "ok" and t
        row["sb"] = f"{base_same / t:.2f}" if ok and base_same else ""
        row["sm"] = f"{base_mprgp / t:.2f}" if ok and base_mprgp else ""
        rows.append(row)
    return rows


def write_bench_csv(rows, fh):
    header = list(BENCH_HEADER)
    # the status column only appears when some cell failed
    if any(r["status"] != "ok" for r in rows):
        header.append("status")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([r[c] for c in header])


def cmd_bench(args) -> int:
    rows = bench_rows(args)
    out = _open_out(args.output)
    write_bench_csv(rows, out or sys.stdout)
    if out:
        out.close()
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_NOT_CONVERGED


def cmd_spectrum(args) -> int:
    problem, box, x0 = load_problem(args)
    if problem.n > dense_cap():
        raise DenseCapExceeded(
            f"spectrum needs dense blocks of a {problem.n}-dof problem but the cap is "
            f"{dense_cap()}; pick a smaller grid (e.g. --nx 20 --ny 20) or raise FACETQP_DENSE_CAP")
    cfg = make_config(args, args.solver, args.face, args.precond)
    hook = IterationTraceHook(problem.A, sample_every=args.sample_every)
    report = solve(problem, box, x0, cfg, observer=hook)
    buf = io.StringIO()
    hook.write_csv(buf)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except DenseCapExceeded as exc:
        print(f"facetqp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalBreakdown as exc:
        print(f"facetqp: numerical breakdown: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except (FacetQPError, ValueError, OSError) as exc:
        print(f"facetqp: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
