"""Report assembly and run manifests.

The report JSON is fully deterministic: reruns on identical inputs produce
identical bytes. Volatile run information (timestamps) therefore lives in a
``<output>.manifest.json`` sidecar, which lists every artifact the command
emitted; the report embeds the reproducible manifest fields (command,
parameters, input digests, version, seeds).
"""

from __future__ import annotations

import hashlib
import json
import time
from typing import Mapping, Sequence

from ._version import __version__
from .data import ClusterAssignment, MetadataTable
from .dbscan import DEFAULT_AGE_BIN_EDGES, cluster_composition
from .fairness import (
    GapResult,
    attribute_proportions,
    demographic_parity_gap,
    equalized_odds_gap,
    gap_improvement,
    group_outcomes,
    predictive_parity_gap,
    representation_gap,
)
from .kde import KdeCurve, kde

SCHEMA_VERSION = 1


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(
    command: str,
    parameters: Mapping[str, object],
    inputs: Mapping[str, str],
    seeds: Mapping[str, int] | None = None,
) -> dict:
    """Deterministic manifest: parameters, input digests, tool version, seeds."""
    return {
        "command": command,
        "tool": "proxygroups",
        "version": __version__,
        "parameters": dict(parameters),
        "inputs": {
            name: {"path": str(path), "sha256": file_digest(path)}
            for name, path in inputs.items()
        },
        "seeds": dict(seeds or {}),
    }


def write_manifest_sidecar(manifest: dict, outputs: Sequence[str], primary_output: str) -> str:
    """Write the full manifest (with timestamps) next to the primary output."""
    sidecar = dict(manifest)
    sidecar["outputs"] = [str(p) for p in outputs]
    sidecar["created_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    path = f"{primary_output}.manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_json(sidecar))
        fh.write("\n")
    return path


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def _gap_dict(result: GapResult) -> dict:
    return {
        "value": result.value,
        "excluded": [str(k) for k in result.excluded],
    }


def _metrics_block(grouping: dict[str, object], table: MetadataTable) -> dict:
    outcomes = group_outcomes(grouping, table)
    eo = equalized_odds_gap(outcomes)
    return {
        "demographic_parity_gap": _gap_dict(demographic_parity_gap(outcomes)),
        "equalized_odds": {
            "tpr_gap": _gap_dict(eo.tpr_gap),
            "fpr_gap": _gap_dict(eo.fpr_gap),
        },
        "predictive_parity_gap": _gap_dict(predictive_parity_gap(outcomes)),
    }


def _subset_entry(name: str, ids, table: MetadataTable, per_cluster_take, plan=None) -> dict:
    props = attribute_proportions(table, ids)
    return {
        "name": name,
        "size": len(ids),
        "gender_proportions": props or None,
        "gender_gap": representation_gap(table, ids),
        "per_cluster_take": (
            {str(k): int(v) for k, v in sorted(per_cluster_take.items())}
            if per_cluster_take is not None
            else None
        ),
        "plan": plan,
    }


def build_report(
    assignment: ClusterAssignment,
    table: MetadataTable,
    manifest: dict,
    subsets: Mapping[str, Sequence[str]] | None = None,
    subset_takes: Mapping[str, Mapping[int, int] | None] | None = None,
    subset_plans: Mapping[str, dict | None] | None = None,
    baseline: str | None = None,
    age_bin_edges: Sequence[int] = DEFAULT_AGE_BIN_EDGES,
    kde_grid_size: int = 512,
) -> tuple[dict, dict[tuple[str, str], KdeCurve], bool]:
    """Assemble the evaluation report.

    Returns (report, kde curves keyed by (subset, gender), degraded flag).
    The report is degraded when gender or age is entirely unknown; fairness
    criteria are included only when labels and predictions exist.
    ``subset_plans`` echoes each subset's sampling parameters when known.
    """
    subsets = dict(subsets or {})
    subset_takes = dict(subset_takes or {})
    subset_plans = dict(subset_plans or {})

    compositions = cluster_composition(assignment, table, age_bin_edges)
    clusters_block = {
        "count": assignment.n_clusters,
        "noise": assignment.noise_count,
        "per_cluster": [
            {
                "cluster": c.cluster_id,
                "size": c.size,
                "known_gender": c.known_gender,
                "female_proportion": c.female_proportion,
                "male_proportion": c.male_proportion,
                "missing_gender": c.missing_gender,
                "age_bin_edges": list(age_bin_edges),
                "age_histogram": list(c.age_histogram),
                "missing_age": c.missing_age,
            }
            for c in compositions
        ],
    }

    population_entry = _subset_entry("population", assignment.ids, table, None)
    entries = [
        _subset_entry(name, ids, table, subset_takes.get(name), subset_plans.get(name))
        for name, ids in subsets.items()
    ]

    improvements = []
    if baseline is None and "random" in subsets:
        baseline = "random"
    if baseline is not None and baseline in subsets:
        base_gap = representation_gap(table, subsets[baseline])
        for name, ids in subsets.items():
            if name == baseline:
                continue
            method_gap = representation_gap(table, ids)
            improvements.append(
                {
                    "baseline": baseline,
                    "method": name,
                    "attribute": "gender",
                    "baseline_gap": base_gap,
                    "method_gap": method_gap,
                    "improvement": (
                        gap_improvement(base_gap, method_gap)
                        if base_gap is not None and method_gap is not None
                        else None
                    ),
                }
            )

    has_outcomes = any(
        r.label is not None and r.prediction is not None for r in table.records.values()
    )
    metrics = None
    if has_outcomes:
        by_cluster = _metrics_block(
            {i: int(c) for i, c in zip(assignment.ids, assignment.labels)}, table
        )
        gender_grouping = {
            i: table.get(i).gender
            for i in assignment.ids
            if table.get(i) is not None and table.get(i).gender is not None
        }
        by_gender = _metrics_block(gender_grouping, table) if gender_grouping else None
        metrics = {"by_cluster": by_cluster, "by_gender": by_gender}

    curves: dict[tuple[str, str], KdeCurve] = {}
    kde_block = None
    facets = [("population", assignment.ids)] + list(subsets.items())
    curve_entries = []
    for name, ids in facets:
        for gender in ("F", "M"):
            ages = [
                table.get(i).age
                for i in ids
                if table.get(i) is not None
                and table.get(i).gender == gender
                and table.get(i).age is not None
            ]
            if not ages:
                continue
            curve = kde(ages, grid_size=kde_grid_size)
            curves[(name, gender)] = curve
            curve_entries.append(
                {
                    "subset": name,
                    "gender": gender,
                    "n": len(ages),
                    "bandwidth": curve.bandwidth,
                    "file": f"kde_{name}_{gender}.csv",
                    "grid": curve.grid.tolist(),
                    "density": curve.density.tolist(),
                }
            )
    if curve_entries:
        kde_block = {"attribute": "age", "curves": curve_entries}

    any_gender = any(r.gender is not None for r in table.records.values())
    any_age = any(r.age is not None for r in table.records.values())
    degraded = not (any_gender and any_age)

    report = {
        "schema_version": SCHEMA_VERSION,
        "manifest": manifest,
        "clusters": clusters_block,
        "subsets": {
            "population": population_entry,
            "entries": entries,
            "improvements": improvements,
        },
        "metrics": metrics,
        "kde": kde_block,
    }
    return report, curves, degraded


def save_kde_curve(curve: KdeCurve, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("x,density\n")
        for x, d in zip(curve.grid, curve.density):
            fh.write(f"{x!r},{d!r}\n")
