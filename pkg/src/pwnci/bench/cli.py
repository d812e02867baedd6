"""``pwnci`` command-line interface.

Subcommands
-----------
exact-ci   intervals for the center of a piecewise normal model (JSON model file)
svi-solve  solve one SAA problem and print z_N, x_N, M_N and Sigma_N
svi-ci     full single-shot pipeline: region, selected cell, intervals
coverage   Monte Carlo coverage study from a config file or a built-in problem
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from ..errors import PwnciError
from ..inference import infer, lambda_hat
from ..polyhedral import BoxSet, Piece, PiecewiseLinearMap, normal_map_pieces
from ..pwnormal import PiecewiseNormalModel
from ..svi import SaaData, make_problem, solve_from_data, solve_saa
from .config import default_config, load_config
from .matrixio import load_saa_file, resolve_array
from .report import aggregate, coverage_csv, coverage_table, emit
from .runner import run_experiment, stream

log = logging.getLogger("pwnci")


def _fmt_vec(v, digits=4):
    return "(" + ", ".join(f"{x:.{digits}f}" for x in v) + ")"


def _fmt_mat(m, digits=4, indent="  "):
    return "\n".join(indent + "  ".join(f"{x:>{digits + 4}.{digits}f}" for x in row) for row in m)


def _add_common(p, *, alphas=True):
    p.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
    if alphas:
        p.add_argument("--alpha1", type=float, default=None, help="level for the confidence region")
        p.add_argument("--alpha2", type=float, default=None, help="level for the intervals")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--format", choices=("csv", "table"), default="table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwnci", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact-ci", help="exact intervals for a piecewise normal model")
    p.add_argument("--config", "--model", dest="config", required=True, help="model JSON file")
    _add_common(p)

    for name, desc in (("svi-solve", "solve one SAA problem"), ("svi-ci", "single-shot SAA inference")):
        p = sub.add_parser(name, help=desc)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--saa-file", help="SAA data JSON, or 'worked' for the bundled 2-D example")
        src.add_argument("--problem", help="built-in problem name (lcp1, lcp2, lcp3, qp, worked)")
        src.add_argument("--config", help="experiment config JSON (problem, n, N)")
        p.add_argument("--n", type=int, default=None, help="dimension for built-in problems")
        p.add_argument("--N", type=int, default=None, help="sample size for built-in problems")
        _add_common(p, alphas=(name == "svi-ci"))

    p = sub.add_parser("coverage", help="Monte Carlo coverage study")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="experiment config JSON")
    src.add_argument("--problem", help="built-in problem with desk-scale defaults")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--full-scale", action="store_true", help="use the full problem sizes")
    p.add_argument("--raw", action="store_true", help="also write per-replication records")
    _add_common(p)
    return parser


def _load_model(path):
    with open(path) as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    if "pieces" in raw:
        gamma = PiecewiseLinearMap(
            Piece(p["signs"], resolve_array(p["matrix"], base)) for p in raw["pieces"]
        )
    else:
        nm = raw["normal_map"]
        gamma = normal_map_pieces(
            resolve_array(nm["L"], base),
            BoxSet(
                [-np.inf if v is None else v for v in nm["cone_lower"]],
                [np.inf if v is None else v for v in nm["cone_upper"]],
            ),
        )
    sigma = resolve_array(raw["sigma"], base)
    center = raw.get("center")
    model = PiecewiseNormalModel(gamma, sigma, raw["a0"], center)
    return model, raw


def cmd_exact_ci(args, out):
    model, raw = _load_model(args.config)
    alpha = args.alpha2 if args.alpha2 is not None else raw.get("alpha", 0.05)
    if "Z" in raw:
        Z = np.asarray(raw["Z"], dtype=float)
    else:
        Z = model.sample_z(stream(args.seed or 0, 0))
    rep = model.exact_ci(Z, alpha)
    if args.format == "csv":
        out.write("coordinate,center,lower,upper,half_width\n")
        for j, (c, h) in enumerate(zip(rep.center, rep.half_widths), start=1):
            out.write(f"{j},{c:.10g},{c - h:.10g},{c + h:.10g},{h:.10g}\n")
    else:
        out.write(f"observation Z = {_fmt_vec(Z)}\n")
        out.write(f"piece index   = {rep.piece}\n")
        out.write(f"{100 * (1 - alpha):g}% intervals for the center:\n{rep.format()}\n")
    return 0


def _solution_from_args(args):
    if args.saa_file:
        d = load_saa_file(args.saa_file)
        S = BoxSet(d["lower"], d["upper"])
        sol = solve_from_data(
            SaaData(d["A_bar"], d["b_bar"]), S, N=d["N"], bandwidth=d["bandwidth"], sigma=d.get("sigma_N")
        )
        return sol, d["name"], None
    if args.config:
        cfg = load_config(args.config)
        problem, N, seed = cfg.build_problem(), cfg.N, cfg.seed
    else:
        cfg = default_config(args.problem)
        problem = make_problem(args.problem, args.n if args.n is not None else cfg.n)
        N, seed = cfg.N, 0
    N = args.N if args.N is not None else N
    seed = args.seed if args.seed is not None else seed
    return solve_saa(problem, N, stream(seed, 0)), problem.name, problem


def _needs_sigma(args):
    if args.saa_file and "sigma_N" not in load_saa_file(args.saa_file):
        raise SystemExit("the SAA file has no sigma_N and no draws to estimate it from")


def cmd_svi_solve(args, out):
    _needs_sigma(args)
    sol, name, _ = _solution_from_args(args)
    if args.format == "csv":
        out.write("coordinate,z_N,x_N\n")
        for j, (z, x) in enumerate(zip(sol.z, sol.x), start=1):
            out.write(f"{j},{z:.10g},{x:.10g}\n")
        return 0
    out.write(f"{name} (N = {sol.N})\n")
    out.write(f"z_N = {_fmt_vec(sol.z)}\nx_N = {_fmt_vec(sol.x)}\n")
    out.write(f"cell of z_N: {sol.cell.label}\n")
    if sol.n <= 12:
        out.write(f"M_N =\n{_fmt_mat(sol.M)}\nSigma_N =\n{_fmt_mat(sol.sigma.matrix)}\n")
    return 0


def cmd_svi_ci(args, out):
    _needs_sigma(args)
    t0 = time.perf_counter()
    sol, name, problem = _solution_from_args(args)
    a1 = 0.05 if args.alpha1 is None else args.alpha1
    a2 = 0.05 if args.alpha2 is None else args.alpha2
    res = infer(sol, a1, a2)
    if args.format == "csv":
        out.write("target,coordinate,center,lower,upper,half_width\n")
        for rep in (res.z, res.x):
            for j, (c, h) in enumerate(zip(rep.center, rep.half_widths), start=1):
                out.write(f"{rep.target.value},{j},{c:.10g},{c - h:.10g},{c + h:.10g},{h:.10g}\n")
        return 0
    n = sol.n
    out.write(f"{name} (N = {sol.N}, alpha1 = {a1:g}, alpha2 = {a2:g})\n")
    out.write(f"z_N = {_fmt_vec(sol.z)}   x_N = {_fmt_vec(sol.x)}\n")
    if n <= 12:
        out.write(f"M_N =\n{_fmt_mat(sol.M)}\nSigma_N =\n{_fmt_mat(sol.sigma.matrix)}\n")
        out.write(f"Lambda_N =\n{_fmt_mat(lambda_hat(sol).matrix)}\n")
        out.write(f"region shape M_N' Sigma_N^-1 M_N =\n{_fmt_mat(res.region.shape)}\n")
    out.write(f"region threshold chi2_{n}({a1:g})/N = {res.region.threshold:.6g}\n")
    out.write(f"cell of z_N: {sol.cell.label}   selected cell: {res.cell.label} (dim {res.cell.dim})\n")
    out.write(f"z estimate = {_fmt_vec(res.z.center)}\n")
    out.write(f"{100 * (1 - a1 - a2):g}% intervals:\n{res.z.format()}\n{res.x.format()}\n")
    log.info("svi-ci finished in %.3f s", time.perf_counter() - t0)
    return 0


def cmd_coverage(args, out):
    overrides = {}
    for key in ("reps", "n", "N", "workers", "seed"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    if args.raw:
        overrides["raw"] = True
    if args.config:
        cfg = load_config(args.config)
        if args.full_scale:
            cfg = cfg.at_scale(True)
    else:
        cfg = default_config(args.problem, full_scale=args.full_scale)
    if args.alpha1 is not None or args.alpha2 is not None:
        if args.alpha1 is None or args.alpha2 is None:
            raise SystemExit("--alpha1 and --alpha2 must be given together")
        overrides["budgets"] = ((args.alpha1, args.alpha2),)
    cfg = replace(cfg, **overrides) if overrides else cfg
    t0 = time.perf_counter()
    records = run_experiment(cfg)
    log.info("%d replications in %.1f s", cfg.reps, time.perf_counter() - t0)
    summary = aggregate(records, cfg.build_problem())
    if args.out:
        paths = emit(summary, args.out, "both", cfg, records if cfg.raw else None)
        for p in paths:
            log.info("wrote %s", p)
    if args.format == "csv":
        out.write(coverage_csv(summary, cfg))
    else:
        out.write(coverage_table(summary, title=f"{cfg.problem_name}: n={cfg.build_problem().n}, N={cfg.N}"))
    return 0


COMMANDS = {
    "exact-ci": cmd_exact_ci,
    "svi-solve": cmd_svi_solve,
    "svi-ci": cmd_svi_ci,
    "coverage": cmd_coverage,
}


def main(argv=None, out=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    out = sys.stdout if out is None else out
    buf = io.StringIO()
    try:
        code = COMMANDS[args.command](args, buf)
        if args.out and args.command != "coverage":
            os.makedirs(args.out, exist_ok=True)
            ext = "csv" if args.format == "csv" else "txt"
            with open(os.path.join(args.out, f"{args.command}.{ext}"), "w") as fh:
                fh.write(buf.getvalue())
    except (PwnciError, ValueError, OSError) as exc:
        out.write(buf.getvalue())
        print(f"pwnci: error: {exc}", file=sys.stderr)
        return 2
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
