"""Command-line interface: ``mmse <command> ...``.

Exit codes: 0 success, 1 input/usage error, 2 solver did not converge,
3 a verification failed.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .ambiguity import stability_check
from .oracle import MAX_GRID_VERTICES, curvature_bound, grid_maximize_G, simplex_lattice
from .props import run_props
from .scenarios import (
    ScenarioError,
    dumps,
    example_41,
    example_42_truncated,
    example_43_tree,
    load_report,
    load_scenario,
    save_report,
    save_scenario,
    solution_report,
)
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    EstimatorSolution,
    objective_G,
    solve_mmse,
    verify_saddle,
)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    tolerance: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    seed: int = 42
    parallel: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max-iter must be >= 1")


def default_tolerance() -> float:
    env = os.environ.get("MMSE_TOL")
    if env is None:
        return DEFAULT_TOL
    try:
        return float(env)
    except ValueError:
        raise SystemExit(f"error: MMSE_TOL={env!r} is not a number")


def _config(args) -> RunConfig:
    tol = args.tol if args.tol is not None else default_tolerance()
    return RunConfig(tol, args.max_iter, args.seed, args.parallel)


def _fmt(values) -> str:
    return "(" + ", ".join(f"{v:.10g}" for v in values) + ")"


def cmd_estimate(args) -> int:
    cfg = _config(args)
    scen = load_scenario(args.scenario)
    sol = solve_mmse(scen.xi, scen.ambiguity, scen.partition, tol=cfg.tolerance, max_iter=cfg.max_iter)
    saddle = verify_saddle(sol, scen.xi, scen.ambiguity, scen.partition, tol=max(cfg.tolerance, 1e-8))
    out = Path(args.out) if args.out else Path(Path(args.scenario).stem + ".report.json")
    save_report(out, solution_report(scen, sol, saddle, cfg.tolerance, cfg.max_iter))
    print(f"scenario   {scen.name or args.scenario}")
    print(f"eta_hat    {_fmt(sol.eta_blocks)}  (per block)")
    print(f"w_hat      {_fmt(sol.w_hat)}")
    print(f"alpha      {sol.alpha:.12g}")
    print(f"gap        {sol.gap:.3g}  (tol {cfg.tolerance:g}, {sol.iterations} iterations)")
    print(f"saddle     {'pass' if saddle.passed else 'FAIL'}  "
          f"(left {saddle.left_margin:.3g}, right {saddle.right_margin:.3g})")
    print(f"report     {out}")
    if not sol.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK if saddle.passed else EXIT_VERIFY


def cmd_verify(args) -> int:
    cfg = _config(args)
    scen = load_scenario(args.scenario)
    rep = load_report(args.report)
    blocks = np.asarray(rep["eta_hat"], dtype=float)
    if blocks.shape != (scen.partition.n_blocks,):
        raise ScenarioError(f"{args.report}: eta_hat has {blocks.size} blocks, scenario has "
                            f"{scen.partition.n_blocks}")
    w = np.asarray(rep["w_hat"], dtype=float)
    if w.shape != (scen.ambiguity.k,):
        raise ScenarioError(f"{args.report}: w_hat has {w.size} entries, scenario has {scen.ambiguity.k} vertices")
    sol = EstimatorSolution(blocks[scen.partition.labels], w, float(rep["alpha"]), float(rep["gap"]),
                            int(rep.get("iterations", 0)), bool(rep.get("converged", True)), scen.partition)
    saddle = verify_saddle(sol, scen.xi, scen.ambiguity, scen.partition, tol=max(cfg.tolerance, 1e-8))
    print(f"left margin   {saddle.left_margin:.3g}  (worst vertex {saddle.worst_vertex})")
    print(f"right margin  {saddle.right_margin:.3g}  (best competitor {saddle.worst_competitor})")
    print("saddle point certified" if saddle.passed else "saddle point NOT certified")
    return EXIT_OK if saddle.passed else EXIT_VERIFY


def cmd_stability(args) -> int:
    cfg = _config(args)
    scen = load_scenario(args.scenario)
    partitions = [scen.partition] if not args.filtration else (scen.filtration or [scen.partition])
    worst = "stable"
    for t, c in enumerate(partitions):
        rep = stability_check(scen.ambiguity, c, sample_count=max(args.samples, scen.ambiguity.k),
                              tol=cfg.tolerance, seed=cfg.seed)
        label = f"F_{t}" if args.filtration else "partition"
        print(f"{label:10s} {rep.verdict:12s} worst residual {rep.worst_violation:.3g} "
              f"over {rep.checked_points} points")
        if rep.verdict == "violated" or (rep.verdict == "inconclusive" and worst == "stable"):
            worst = rep.verdict
    return EXIT_VERIFY if worst == "violated" else EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    scen = load_scenario(args.scenario)
    a, c, xi = scen.ambiguity, scen.partition, scen.xi
    if a.k > MAX_GRID_VERTICES:
        raise ScenarioError(f"grid oracle needs at most {MAX_GRID_VERTICES} vertices, scenario has {a.k}")
    grid = grid_maximize_G(xi, a, c, args.grid)
    sol = solve_mmse(xi, a, c, tol=cfg.tolerance, max_iter=cfg.max_iter)
    bound = curvature_bound(xi, a, c, grid.best_w) * (a.k - 1) * grid.grid_step**2
    diff = sol.alpha - grid.best_value
    print(f"grid best   {grid.best_value:.12g} at {_fmt(grid.best_w)}  ({grid.points} points, step {grid.grid_step:g})")
    print(f"solver      {sol.alpha:.12g} at {_fmt(sol.w_hat)}")
    print(f"difference  {diff:.3g}  (allowed [{-cfg.tolerance:.3g}, {bound:.3g}])")
    if args.csv:
        W = simplex_lattice(a.k, int(round(1 / grid.grid_step)))
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"w{j}" for j in range(a.k)] + ["G"])
            for w in W:
                writer.writerow([f"{x:.17g}" for x in w] + [f"{objective_G(w, xi, a, c):.17g}"])
    return EXIT_OK if -cfg.tolerance <= diff <= bound + 1e-12 else EXIT_VERIFY


def cmd_scenario(args) -> int:
    out = Path(args.out) if args.out else Path(f"{args.name}.json")
    if args.name == "ex41":
        scen = example_41()
    elif args.name == "ex42":
        scen, closure = example_42_truncated(args.N)
        closure_path = out.with_name(out.stem + ".closure.json")
        doc = {k: (list(v) if isinstance(v, tuple) else v) for k, v in closure.__dict__.items()}
        closure_path.write_text(dumps(doc), encoding="utf-8")
        print(f"closure    {closure_path}  (lambda* = {closure.lambda_star:.10g}, "
              f"{'feasible' if closure.feasible else 'outside [0, 1]'})")
    else:
        scen, _ = example_43_tree(args.depth, args.tilt)
    save_scenario(out, scen)
    print(f"scenario   {out}  ({scen.space.size} atoms, {scen.ambiguity.k} vertices)")
    return EXIT_OK


def cmd_props(args) -> int:
    cfg = _config(args)
    if args.cases < 1:
        raise ValueError("--cases must be >= 1")
    summary = run_props(args.cases, seed=cfg.seed, tol=cfg.tolerance, max_iter=cfg.max_iter,
                        parallel=cfg.parallel, inject_bug=args.inject_bug)
    for line in summary.lines():
        print(line)
    print("FAILED" if summary.failed else f"all properties hold on {args.cases} cases (seed {cfg.seed})")
    return EXIT_VERIFY if summary.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="absolute tolerance (default $MMSE_TOL or 1e-9)")
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--parallel", action="store_true")

    p = argparse.ArgumentParser(prog="mmse", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("estimate", parents=[common], help="solve for the minimum mean square estimator")
    s.add_argument("scenario")
    s.add_argument("--out", help="report path (default <scenario>.report.json)")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("verify", parents=[common], help="certify a saved report as a saddle point")
    s.add_argument("scenario")
    s.add_argument("report")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("stability", parents=[common], help="sampled stability check of the ambiguity set")
    s.add_argument("scenario")
    s.add_argument("--samples", type=int, default=256)
    s.add_argument("--filtration", action="store_true", help="check every partition of the filtration")
    s.set_defaults(func=cmd_stability)

    s = sub.add_parser("oracle", parents=[common], help="compare the solver with a simplex grid search")
    s.add_argument("scenario")
    s.add_argument("--grid", type=float, default=1e-2, help="lattice spacing")
    s.add_argument("--csv", help="write G on the lattice to this CSV file")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("scenario", parents=[common], help="write a built-in scenario file")
    s.add_argument("name", choices=["ex41", "ex42", "tree"])
    s.add_argument("--N", type=int, default=40)
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--tilt", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_scenario)

    s = sub.add_parser("props", parents=[common], help="randomized property suite")
    s.add_argument("--cases", type=int, default=200)
    s.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_props)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
