"""Command-line pipeline: reduce, cluster, tune, sample, evaluate, synth.

Exit codes: 0 success, 2 input/validation error, 3 feasibility problem or
degraded output. Every command writes a ``<output>.manifest.json`` sidecar
recording parameters, input digests, and timestamps; all numbers in the
outputs come straight from the library operations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data, report, sampling, synth, tsne
from .dbscan import ClusterParams, dbscan, tune_dbscan
from .errors import ProxyGroupsError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _write_trace(trace: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iter,kl\n")
        for it, kl in enumerate(trace):
            fh.write(f"{it},{kl!r}\n")


def cmd_reduce(args) -> int:
    params = tsne.TsneParams(
        perplexity=args.perplexity,
        iterations=args.iterations,
        early_exaggeration_factor=args.early_exaggeration,
        early_exaggeration_iters=args.early_exaggeration_iters,
        learning_rate=args.learning_rate,
        momentum_initial=args.momentum_initial,
        momentum_final=args.momentum_final,
        momentum_switch_iter=args.momentum_switch_iter,
        theta=args.theta,
        seed=args.seed,
        init=args.init,
    )
    matrix = data.load_embeddings(args.input, args.format)
    result = tsne.run_tsne(matrix, params)
    data.save_coordinates(result.coords, args.out)
    trace_path = args.trace_out or _default_trace_path(args.out)
    _write_trace(result.kl_trace, trace_path)
    manifest = report.build_manifest(
        "reduce",
        parameters={
            "perplexity": params.perplexity,
            "iterations": params.iterations,
            "early_exaggeration_factor": params.early_exaggeration_factor,
            "early_exaggeration_iters": params.early_exaggeration_iters,
            "learning_rate": params.learning_rate,
            "momentum_initial": params.momentum_initial,
            "momentum_final": params.momentum_final,
            "momentum_switch_iter": params.momentum_switch_iter,
            "theta": params.theta,
            "init": params.init,
        },
        inputs={"embeddings": args.input},
        seeds={"tsne": params.seed},
    )
    report.write_manifest_sidecar(manifest, [args.out, trace_path], args.out)
    return EXIT_OK


def _default_trace_path(out: str) -> str:
    root, ext = os.path.splitext(out)
    return f"{root}_trace{ext or '.csv'}"


def cmd_cluster(args) -> int:
    coords = data.load_coordinates(args.coords)
    assignment = dbscan(coords, ClusterParams(eps=args.eps, min_samples=args.min_samples))
    data.save_assignment(assignment, args.out)
    manifest = report.build_manifest(
        "cluster",
        parameters={"eps": args.eps, "min_samples": args.min_samples},
        inputs={"coordinates": args.coords},
    )
    report.write_manifest_sidecar(manifest, [args.out], args.out)
    print(f"clusters={assignment.n_clusters} noise={assignment.noise_count}")
    return EXIT_OK


def cmd_tune(args) -> int:
    coords = data.load_coordinates(args.coords)
    result = tune_dbscan(coords, args.eps_grid, args.min_samples_grid, args.k_min, args.k_max)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("eps,min_samples,k,noise\n")
        for e in result.entries:
            fh.write(f"{e.eps!r},{e.min_samples},{e.k},{e.noise}\n")
    manifest = report.build_manifest(
        "tune",
        parameters={
            "eps_grid": args.eps_grid,
            "min_samples_grid": args.min_samples_grid,
            "k_min": args.k_min,
            "k_max": args.k_max,
        },
        inputs={"coordinates": args.coords},
    )
    report.write_manifest_sidecar(manifest, [args.out], args.out)
    if not result.feasible:
        print(
            f"infeasible: no grid point reaches {args.k_min}..{args.k_max} clusters",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    c = result.chosen
    print(f"chosen eps={c.eps} min_samples={c.min_samples} k={c.k} noise={c.noise}")
    return EXIT_OK


def cmd_sample(args) -> int:
    plan = sampling.SamplingPlan(
        fraction=args.fraction, seed=args.seed, include_noise=args.include_noise
    )
    inputs = {}
    if args.method == "cluster":
        if not args.assignment:
            print("assignment: --assignment is required for --method cluster", file=sys.stderr)
            return EXIT_INVALID
        assignment = data.load_assignment(args.assignment)
        inputs["assignment"] = args.assignment
        subset = sampling.cluster_balanced_sample(assignment, plan)
        cluster_of = {i: int(c) for i, c in zip(assignment.ids, assignment.labels)}
    else:
        if args.assignment:
            assignment = data.load_assignment(args.assignment)
            inputs["assignment"] = args.assignment
            ids = assignment.ids
            cluster_of = {i: int(c) for i, c in zip(assignment.ids, assignment.labels)}
        elif args.coords:
            coords = data.load_coordinates(args.coords)
            inputs["coordinates"] = args.coords
            ids = coords.ids
            cluster_of = None
        else:
            print("assignment: --method random needs --assignment or --coords", file=sys.stderr)
            return EXIT_INVALID
        subset = sampling.random_sample(ids, plan)
    data.save_subset(subset, cluster_of, args.out)
    manifest = report.build_manifest(
        "sample",
        parameters={
            "method": args.method,
            "fraction": args.fraction,
            "include_noise": args.include_noise,
        },
        inputs=inputs,
        seeds={"sample": args.seed},
    )
    report.write_manifest_sidecar(manifest, [args.out], args.out)
    if subset.shortfall:
        print(f"shortfall: {subset.shortfall} samples short of target", file=sys.stderr)
    print(f"selected={len(subset)}")
    return EXIT_OK


def _subset_plan_echo(subset_path: str) -> dict | None:
    """Reproducible sampling parameters from the subset's manifest sidecar."""
    sidecar = f"{subset_path}.manifest.json"
    if not os.path.exists(sidecar):
        return None
    try:
        with open(sidecar, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    if manifest.get("command") != "sample":
        return None
    return {"parameters": manifest.get("parameters"), "seeds": manifest.get("seeds")}


def cmd_evaluate(args) -> int:
    assignment = data.load_assignment(args.assignment)
    table = data.load_metadata(args.metadata)
    inputs = {"assignment": args.assignment, "metadata": args.metadata}
    subsets = {}
    subset_plans = {}
    for spec_item in args.subset or []:
        if "=" not in spec_item:
            print(f"subset: expected NAME=PATH, got {spec_item!r}", file=sys.stderr)
            return EXIT_INVALID
        name, path = spec_item.split("=", 1)
        subsets[name] = data.load_subset_ids(path)
        subset_plans[name] = _subset_plan_echo(path)
        inputs[f"subset:{name}"] = path

    manifest = report.build_manifest(
        "evaluate",
        parameters={
            "baseline": args.baseline,
            "age_bins": list(args.age_bins),
            "kde_grid_size": args.kde_grid_size,
        },
        inputs=inputs,
    )
    rep, curves, degraded = report.build_report(
        assignment,
        table,
        manifest,
        subsets=subsets,
        subset_plans=subset_plans,
        baseline=args.baseline,
        age_bin_edges=args.age_bins,
        kde_grid_size=args.kde_grid_size,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.dump_json(rep))
        fh.write("\n")
    outputs = [args.out]
    kde_dir = args.kde_dir or os.path.dirname(os.path.abspath(args.out))
    os.makedirs(kde_dir, exist_ok=True)
    for (name, gender), curve in curves.items():
        path = os.path.join(kde_dir, f"kde_{name}_{gender}.csv")
        report.save_kde_curve(curve, path)
        outputs.append(path)
    report.write_manifest_sidecar(manifest, outputs, args.out)
    if degraded:
        print("degraded: gender or age entirely missing from metadata", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_synth(args) -> int:
    config = synth.SynthConfig(
        n=args.n,
        modes=args.modes,
        dim=args.dim,
        gender_split=args.gender_split,
        purity=args.purity,
        separation=args.separation,
        seed=args.seed,
        with_outcomes=args.with_outcomes,
    )
    dataset = synth.generate(config)
    data.save_embeddings(dataset.matrix, args.out_embeddings, args.format)
    data.save_metadata(dataset.metadata, args.out_metadata, order=dataset.matrix.ids)
    outputs = [args.out_embeddings, args.out_metadata]
    if args.modes_out:
        with open(args.modes_out, "w", encoding="utf-8", newline="") as fh:
            fh.write("id,mode\n")
            for i, m in zip(dataset.matrix.ids, dataset.modes):
                fh.write(f"{i},{int(m)}\n")
        outputs.append(args.modes_out)
    manifest = report.build_manifest(
        "synth",
        parameters={
            "n": config.n,
            "modes": config.modes,
            "dim": config.dim,
            "gender_split": config.gender_split,
            "purity": config.purity,
            "separation": config.separation,
            "with_outcomes": config.with_outcomes,
        },
        inputs={},
        seeds={"synth": config.seed},
    )
    report.write_manifest_sidecar(manifest, outputs, args.out_embeddings)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxygroups",
        description="Proxy demographic groups from embeddings: reduce, cluster, sample, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="t-SNE reduction of an embedding file to 2-D")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "femb"], default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--early-exaggeration", type=float, default=12.0)
    p.add_argument("--early-exaggeration-iters", type=int, default=250)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--momentum-initial", type=float, default=0.5)
    p.add_argument("--momentum-final", type=float, default=0.8)
    p.add_argument("--momentum-switch-iter", type=int, default=250)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=["pca", "random"], default="pca")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("cluster", help="DBSCAN over reduced coordinates")
    p.add_argument("--coords", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--min-samples", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("tune", help="grid-search DBSCAN parameters for a cluster-count band")
    p.add_argument("--coords", required=True)
    p.add_argument("--eps-grid", type=_float_list, required=True)
    p.add_argument("--min-samples-grid", type=_int_list, required=True)
    p.add_argument("--k-min", type=int, default=15)
    p.add_argument("--k-max", type=int, default=25)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("sample", help="draw a subset (cluster-balanced or uniform random)")
    p.add_argument("--method", choices=["cluster", "random"], required=True)
    p.add_argument("--assignment", default=None)
    p.add_argument("--coords", default=None)
    p.add_argument("--fraction", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-noise", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="compositions, representation gaps, fairness criteria, KDE")
    p.add_argument("--assignment", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--subset", action="append", metavar="NAME=PATH")
    p.add_argument("--baseline", default=None)
    p.add_argument("--age-bins", type=_int_list, default=[0, 15, 30, 45, 60, 75, 90])
    p.add_argument("--kde-grid-size", type=int, default=512)
    p.add_argument("--kde-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted groups")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--modes", type=int, default=12)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--gender-split", type=float, default=0.7)
    p.add_argument("--purity", type=float, default=0.95)
    p.add_argument("--separation", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "femb"], default=None)
    p.add_argument("--out-embeddings", required=True)
    p.add_argument("--out-metadata", required=True)
    p.add_argument("--modes-out", default=None)
    p.add_argument("--with-outcomes", action="store_true")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ProxyGroupsError as exc:
        print(str(exc), file=sys.stderr)
        code = EXIT_INVALID
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        code = EXIT_INVALID
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
