"""Command line interface: ``jamgraph simulate | fit | fit-dag | eval | screen-report``.

Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 numerical failure.
"""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .basis import BasisSpec, expand, standardize
from .dag import CausalOrdering, dag_lambda_max, fit_dag_path
from .errors import (ConstantColumn, DataParseError, DegenerateComponent, DimensionMismatch,
                     NonFinite, RankDeficient, ZeroResidual)
from .evaluation import aggregate, confusion, roc_svg
from .screening import fit_screened_path, marginal_graph
from .selection import fit_path, lambda_grid, lambda_max
from .simulate import gen_coeffs, moralize, random_dag, replicate_blocks, sample
from .solver import EDGE_TOL, SolverOptions

log = logging.getLogger("jamgraph")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class ConfigError(ValueError):
    pass


def default_threads():
    try:
        return max(1, int(os.environ.get("JAMGRAPH_THREADS", "1")))
    except ValueError:
        return 1


def _add_solver_args(p):
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--degrees", default="1,2,3", help="polynomial powers, e.g. 1,2,3")
    p.add_argument("--nlambda", type=int, default=100, help="grid size")
    p.add_argument("--ratio", type=float, default=0.01, help="smallest / largest penalty")
    p.add_argument("--lambda", dest="lambdas", type=float, nargs="+",
                   help="explicit penalties (overrides the grid)")
    p.add_argument("--tol", type=float, default=1e-7, help="function-space change tolerance")
    p.add_argument("--obj-tol", type=float, default=1e-10, help="relative objective change tolerance")
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.add_argument("--edge-tol", type=float, default=EDGE_TOL)
    p.add_argument("--kkt-tol", type=float, default=1e-6)
    p.add_argument("--no-active-set", action="store_true", help="always sweep every pair")
    p.add_argument("--no-standardize", action="store_true", help="fit on raw columns")
    p.add_argument("--lenient", action="store_true",
                   help="drop dependent basis columns instead of failing")
    p.add_argument("--df-convention", choices=("nscaled", "literal"), default="nscaled")
    p.add_argument("--threads", type=int, default=default_threads())
    p.add_argument("--backend", choices=("auto", "numba", "numpy"), default="auto")


def build_parser():
    parser = argparse.ArgumentParser(prog="jamgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate data from a random DAG")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--edges", type=int, default=80)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--scheme", choices=("cubic", "linear"), default="cubic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", type=int, default=1, help="replicate the DAG this many times")
    p.add_argument("--clone-coeffs", action="store_true",
                   help="reuse block coefficients instead of redrawing them")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate an undirected graph")
    _add_solver_args(p)
    p.add_argument("--lambda2", type=float, default=0.0, help="screening threshold in [0, 1]")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-dag", help="estimate a DAG under a known ordering")
    _add_solver_args(p)
    p.add_argument("--ordering", required=True, help="CSV/JSON list of names or 1-based indices")
    p.set_defaults(func=cmd_fit_dag)

    p = sub.add_parser("eval", help="score estimated graphs against the truth")
    p.add_argument("--data", help="data CSV (for variable names)")
    p.add_argument("--truth", help="truth edge list")
    p.add_argument("--est", nargs="*", default=[], help="estimated edge lists")
    p.add_argument("--path-edges", help="path_edges.csv from fit / fit-dag")
    p.add_argument("--replicates", help="directory of replicate run directories")
    p.add_argument("--truth-name", default="truth_moral.csv")
    p.add_argument("--run-name", default="fit", help="fit output subdirectory in each replicate")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=default_threads())
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("screen-report", help="marginal screening graph and components")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--degrees", default="1,2,3")
    p.add_argument("--lambda2", type=float, required=True)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_screen_report)
    return parser


def _load_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for action in parser._subparsers._group_actions:
        for subparser in action.choices.values():
            subparser.set_defaults(**cfg)


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    if args.d < 2 or args.n < 2 or args.blocks < 1:
        raise ConfigError("need d >= 2, n >= 2 and blocks >= 1")
    spec = gen_coeffs(random_dag(args.d, args.edges, args.seed, args.scheme))
    if args.blocks > 1:
        spec = replicate_blocks(spec, args.blocks, args.clone_coeffs)
    X = sample(spec, args.n)
    out = _outdir(args.out)
    io.write_data(out / "data.csv", X)
    io.write_edges(out / "truth_directed.csv", spec.graph(), X.names)
    io.write_edges(out / "truth_moral.csv", moralize(spec), X.names)
    io.write_json(out / "dag.json", spec.to_json())
    log.info("wrote %s (n=%d, d=%d, %d edges)", out, X.n, X.d, len(spec.edges))
    return 0


def _prepare(args):
    if args.nlambda < 2 and not args.lambdas:
        raise ConfigError("--nlambda must be at least 2")
    if not 0 < args.ratio < 1:
        raise ConfigError("--ratio must lie in (0, 1)")
    try:
        spec = BasisSpec.parse(args.degrees)
    except ValueError as exc:
        raise ConfigError(f"--degrees: {exc}") from None
    X = io.read_data(args.data)
    if not args.no_standardize:
        X = standardize(X)
    design = expand(X, spec, strict=not args.lenient)
    opts = SolverOptions(tol=args.tol, obj_tol=args.obj_tol, max_sweeps=args.max_sweeps,
                         active_set=not args.no_active_set, backend=args.backend)
    return X, design, opts


def _grid(args, lmax):
    if args.lambdas:
        grid = np.array(sorted(set(args.lambdas), reverse=True))
        if grid[-1] <= 0:
            raise ConfigError("--lambda values must be positive")
        return grid
    if lmax <= 0:
        raise ConfigError("lambda_max is zero; nothing to fit")
    return lambda_grid(lmax, args.nlambda, args.ratio)


def _write_path_outputs(out, path, design, X, args):
    rows = path.rows(args.edge_tol)
    io.write_rows(out / "path.csv", rows)
    sel = path.selected
    io.write_edges(out / "edges.csv", sel.graph(args.edge_tol), X.names)
    io.write_path_edges(out / "path_edges.csv", path.fits, X.names, args.edge_tol)
    io.write_json(out / "coefficients.json", io.coefficients_json(design, X, sel, args.edge_tol))
    kkt = [float(v) for v in path.kkt]
    io.write_json(out / "kkt.json", {
        "tolerance": args.kkt_tol,
        "max": max(kkt),
        "certified": bool(max(kkt) <= args.kkt_tol),
        "lambda": [float(v) for v in path.lambdas],
        "kkt": kkt,
        "converged": [bool(f.converged) for f in path.fits],
        "sweeps": [int(f.sweeps) for f in path.fits],
    })
    io.write_json(out / "selection.json", {
        "selected_index": path.selected_index,
        "lambda": float(path.lambdas[path.selected_index]),
        "edge_count": rows[path.selected_index]["edge_count"],
        "df_convention": path.df_convention,
        "alternative_selected_index": path.selected_index_alt,
    })


def cmd_fit(args):
    if not 0.0 <= args.lambda2 <= 1.0:
        raise ConfigError("--lambda2 must lie in [0, 1]")
    X, design, opts = _prepare(args)
    grid = _grid(args, lambda_max(design, X))
    out = _outdir(args.out)
    if args.lambda2 > 0:
        path, report = fit_screened_path(design, X, grid, args.lambda2, opts, args.threads,
                                         df_convention=args.df_convention)
        _write_screen_report(out, report, X.names)
    else:
        path = fit_path(design, X, grid, opts, kkt_tol=args.kkt_tol,
                        df_convention=args.df_convention)
    _write_path_outputs(out, path, design, X, args)
    log.info("fit %d penalties; selected index %d", len(grid), path.selected_index)
    return 0


def cmd_fit_dag(args):
    X, design, opts = _prepare(args)
    ordering = CausalOrdering(io.read_ordering(args.ordering, X.names))
    grid = _grid(args, dag_lambda_max(design, X, ordering))
    path = fit_dag_path(design, X, ordering, grid, opts, args.threads, kkt_tol=args.kkt_tol,
                        df_convention=args.df_convention)
    out = _outdir(args.out)
    _write_path_outputs(out, path, design, X, args)
    return 0


def _write_screen_report(out, report, names):
    membership = report.membership()
    io.write_rows(out / "components.csv",
                  [{"variable": names[j], "component_id": int(membership[j])} for j in range(len(names))])
    rho = np.asarray(report.rho)
    io.write_rows(out / "rho.csv",
                  [dict(variable=names[j], **{names[k]: float(rho[j, k]) for k in range(len(names))})
                   for j in range(len(names))], ["variable", *names])
    io.write_edges(out / "marginal_edges.csv", report.marginal_graph, names)


def cmd_screen_report(args):
    if not 0.0 <= args.lambda2 <= 1.0:
        raise ConfigError("--lambda2 must lie in [0, 1]")
    try:
        spec = BasisSpec.parse(args.degrees)
    except ValueError as exc:
        raise ConfigError(f"--degrees: {exc}") from None
    X = io.read_data(args.data)
    if not args.no_standardize:
        X = standardize(X)
    report = marginal_graph(expand(X, spec, strict=not args.lenient), args.lambda2)
    _write_screen_report(_outdir(args.out), report, X.names)
    return 0


def _names_from(path):
    with open(path, newline="") as fh:
        return tuple(h.strip() for h in fh.readline().strip().split(","))


def _roc_for_run(data_csv, truth_csv, run_dir):
    names = _names_from(data_csv)
    truth = io.read_edges(truth_csv, names)
    rows = io.read_rows(Path(run_dir) / "path.csv")
    graphs = io.read_path_edges(Path(run_dir) / "path_edges.csv", names, len(rows))
    table = []
    for row, g in zip(rows, graphs):
        if g.directed and not truth.directed:
            g = g.undirected()
        c = confusion(g, truth)
        table.append((float(row["lambda"]), c.tp, c.fp, len(g), float(row["bic_total"])))
    return np.array(table, dtype=[("lambda", "f8"), ("tp", "i8"), ("fp", "i8"),
                                  ("edge_count", "i8"), ("bic_total", "f8")])


def cmd_eval(args):
    out = _outdir(args.out)
    did = False
    if args.est or args.path_edges:
        if not (args.data and args.truth):
            raise ConfigError("--est/--path-edges need --data and --truth")
        names = _names_from(args.data)
        truth = io.read_edges(args.truth, names)
    if args.est:
        rows = []
        for est_path in args.est:
            est = io.read_edges(est_path, names)
            if est.directed and not truth.directed:
                est = est.undirected()
            c = confusion(est, truth)
            rows.append({"estimate": str(est_path), "tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn})
        io.write_rows(out / "confusion.csv", rows)
        did = True
    if args.path_edges:
        table = _roc_for_run(args.data, args.truth, Path(args.path_edges).parent)
        _write_roc(out, [table])
        did = True
    if args.replicates:
        runs = sorted(p for p in Path(args.replicates).iterdir() if (p / "data.csv").is_file())
        if not runs:
            raise ConfigError(f"no replicate directories under {args.replicates}")

        def one(rep):
            return _roc_for_run(rep / "data.csv", rep / args.truth_name, rep / args.run_name)

        if args.threads > 1:
            with ThreadPoolExecutor(args.threads) as pool:
                tables = list(pool.map(one, runs))
        else:
            tables = [one(rep) for rep in runs]
        _write_roc(out, tables)
        did = True
    if not did:
        raise ConfigError("nothing to evaluate: give --est, --path-edges or --replicates")
    return 0


def _write_roc(out, tables):
    agg = aggregate(tables)
    io.write_rows(out / "roc.csv", agg)
    (out / "roc.svg").write_text(roc_svg({"estimate": (agg["fp_mean"], agg["tp_mean"])}))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _load_config(parser, argv)
    except ConfigError as exc:
        print(f"jamgraph: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"jamgraph: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFinite as exc:
        print(f"jamgraph: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataParseError, ConstantColumn, RankDeficient, DimensionMismatch, ZeroResidual,
            DegenerateComponent, OSError) as exc:
        print(f"jamgraph: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"jamgraph: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
