"""Command-line entry point.

Run:
  python -m simquery experiment run --config experiments/gaussians.yml
  python -m simquery bounds theorem2 --n 20 --c 2 --delta 0.5
  python -m simquery check cut --g hidden.csv --gtilde sampled.csv --eps 0.1
  python -m simquery sample clus2k --dataset gaussians --k 4 --m 500 --out trajectory.csv

Exit codes: 0 success, 2 bad config or input, 3 approximation check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from simquery._helpers import configure_logging, edge_count
from simquery.bounds import (
    MAX_EXHAUSTIVE_CUT_VERTICES,
    BoundInputs,
    appendixc_cmin_lower,
    appendixc_cut_budget,
    appendixc_observable_budget,
    check_cut_approximation,
    check_spectral_approximation,
    sample_cut_approximation,
    theorem1_budget,
    theorem2_lower_budget,
    theorem4_cluster_budget,
)
from simquery.clus2k import Clus2kConfig, clus2k_run
from simquery.datasets import gaussian_blobs, rbf_similarity, two_half_circles
from simquery.experiment import load_config, run_experiment, write_outputs
from simquery.graph import Graph, read_graph_csv, write_graph_csv
from simquery.sampling import (
    QueryOracle,
    component_join_proposal,
    mixed_adaptive_without_replacement,
    uniform_without_replacement,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK_FAILED = 3


def _print(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simquery", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest="command", required=True)

    experiment = commands.add_parser("experiment", help="Run a budget sweep")
    experiment_cmds = experiment.add_subparsers(dest="action", required=True)
    run = experiment_cmds.add_parser("run")
    run.add_argument("--config", required=True, help="Flat YAML experiment config")

    bounds = commands.add_parser("bounds", help="Evaluate query budgets")
    bound_cmds = bounds.add_subparsers(dest="bound", required=True)
    t1 = bound_cmds.add_parser("theorem1", help="Spectral approximation budget")
    t1.add_argument("--n", type=int, required=True)
    t1.add_argument("--min-degree", type=float, required=True)
    t1.add_argument("--lambda2", type=float, required=True)
    t1.add_argument("--eps", type=float, required=True)
    t1.add_argument("--delta", type=float, required=True)
    t2 = bound_cmds.add_parser("theorem2", help="Lower threshold for cut approximation")
    t2.add_argument("--n", type=int, required=True)
    t2.add_argument("--c", type=float, required=True)
    t2.add_argument("--delta", type=float, required=True)
    t4 = bound_cmds.add_parser("theorem4", help="Cluster separation budget")
    t4.add_argument("--n", type=int, required=True)
    t4.add_argument("--c-in", type=float, required=True)
    t4.add_argument("--c-out", type=float, required=True)
    t4.add_argument("--ell", type=int, required=True)
    t4.add_argument("--delta", type=float, required=True)
    ac = bound_cmds.add_parser("appendixc", help="Cut approximation budget and min-cut lower bound")
    ac.add_argument("--n", type=int, required=True)
    ac.add_argument("--eps", type=float, required=True)
    ac.add_argument("--delta", type=float, required=True)
    ac.add_argument("--c", type=float, help="Known minimum cut")
    ac.add_argument("--p", type=float, help="Observed sampling probability m / C(n, 2)")
    ac.add_argument("--c-tilde", type=float, help="Minimum cut of the rescaled sampled graph")

    check = commands.add_parser("check", help="Verify an approximation between two graph files")
    check.add_argument("kind", choices=["cut", "spectral"])
    check.add_argument("--g", required=True, help="Hidden graph CSV")
    check.add_argument("--gtilde", required=True, help="Approximating graph CSV")
    check.add_argument("--eps", type=float, required=True)
    check.add_argument("--samples", type=int, default=10_000, help="Random cuts when n is too large to enumerate")
    check.add_argument("--seed", type=int, default=0)

    sample = commands.add_parser("sample", help="Sample edges of a graph and log the trajectory")
    sample.add_argument("scheme", choices=["uniform", "clus2k", "cjoin"])
    source = sample.add_mutually_exclusive_group(required=True)
    source.add_argument("--graph", help="Hidden graph CSV")
    source.add_argument("--dataset", choices=["gaussians", "half-circles"])
    sample.add_argument("--n-per-class", type=int, default=50)
    sample.add_argument("--noise-std", type=float, default=1.0)
    sample.add_argument("--dataset-seed", type=int, default=0)
    sample.add_argument("--m", type=int, required=True)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--k", type=int, default=2)
    sample.add_argument("--recluster-period", type=int, default=1)
    sample.add_argument("--mode", choices=["normalized", "unnormalized"], default="unnormalized")
    sample.add_argument("--out", help="Trajectory CSV")
    sample.add_argument("--graph-out", help="Sampled graph CSV")
    return parser


def _bounds(args: argparse.Namespace) -> dict:
    if args.bound == "theorem1":
        inp = BoundInputs(n=args.n, min_degree=args.min_degree, lambda2=args.lambda2, epsilon=args.eps, delta=args.delta)
        return {"bound": "theorem1", "inputs": inp.to_dict(), "m": theorem1_budget(inp)}
    if args.bound == "theorem2":
        return {
            "bound": "theorem2",
            "inputs": {"n": args.n, "c": args.c, "delta": args.delta},
            "threshold": theorem2_lower_budget(args.n, args.c, args.delta),
        }
    if args.bound == "theorem4":
        inp = BoundInputs(n=args.n, c_in=args.c_in, c_out=args.c_out, ell=args.ell, delta=args.delta)
        return {"bound": "theorem4", "inputs": inp.to_dict(), "m": theorem4_cluster_budget(inp)}

    inp = BoundInputs(
        n=args.n, epsilon=args.eps, delta=args.delta, c=args.c, p_observed=args.p, c_tilde_observed=args.c_tilde
    )
    out: dict = {"bound": "appendixc", "inputs": inp.to_dict(), "totalEdges": edge_count(args.n)}
    if args.c is not None:
        out["m"] = appendixc_cut_budget(inp)
    if args.p is not None and args.c_tilde is not None:
        out["cLower"] = appendixc_cmin_lower(args.p, args.c_tilde, args.delta)
        out["mObservable"] = appendixc_observable_budget(inp)
    if len(out) == 3:
        raise ValueError("appendixc needs --c, or --p with --c-tilde")
    return out


def _check(args: argparse.Namespace) -> dict:
    G = read_graph_csv(args.g)
    G_tilde = read_graph_csv(args.gtilde)
    if args.kind == "spectral":
        return check_spectral_approximation(G, G_tilde, args.eps).to_dict()
    if G.n > MAX_EXHAUSTIVE_CUT_VERTICES:
        logger.warning("n=%d is too large to enumerate cuts; checking %d random cuts", G.n, args.samples)
        return sample_cut_approximation(G, G_tilde, args.eps, n_cuts=args.samples, seed=args.seed).to_dict()
    return check_cut_approximation(G, G_tilde, args.eps).to_dict()


def verify_bounds_command(args: argparse.Namespace) -> int:
    """Print a bound evaluation or approximation check as JSON; returns the exit code."""
    try:
        report = _bounds(args) if args.command == "bounds" else _check(args)
    except (OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    _print(report)
    if args.command == "check" and not report["holds"]:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _hidden_graph(args: argparse.Namespace) -> Graph:
    if args.graph:
        return read_graph_csv(args.graph)
    if args.dataset == "gaussians":
        points = gaussian_blobs(args.n_per_class, std=args.noise_std, seed=args.dataset_seed)
    else:
        points = two_half_circles(args.n_per_class, noise_std=args.noise_std, seed=args.dataset_seed)
    return rbf_similarity(points.points)


def sample_command(args: argparse.Namespace) -> int:
    try:
        hidden = _hidden_graph(args)
        oracle = QueryOracle(hidden)
        if args.scheme == "uniform":
            sampled = uniform_without_replacement(oracle, args.m, args.seed)
        elif args.scheme == "cjoin":
            sampled = mixed_adaptive_without_replacement(oracle, component_join_proposal, args.m, args.seed)
        else:
            cfg = Clus2kConfig(k=args.k, recluster_period=args.recluster_period, mode=args.mode, seed=args.seed)
            sampled = clus2k_run(oracle, args.m, cfg).sampled
    except (OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG

    if args.out:
        sampled.trajectory.to_csv(args.out)
    if args.graph_out:
        write_graph_csv(sampled.graph, args.graph_out)
    _print(
        {
            "scheme": sampled.scheme,
            "n": sampled.n,
            "m": sampled.m,
            "observed": int(len(sampled.edge_ids)),
            "sources": sampled.trajectory.source_counts(),
        }
    )
    return EXIT_OK


def experiment_command(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        results = run_experiment(cfg)
    except (OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    write_outputs(cfg, results)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "experiment":
        return experiment_command(args)
    if args.command == "sample":
        return sample_command(args)
    return verify_bounds_command(args)


if __name__ == "__main__":
    sys.exit(main())
