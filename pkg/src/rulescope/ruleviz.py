"""Rule-population interpretation: merging fold populations, binary
specified/ignored encoding, rule clustering, and the feature co-occurrence
network."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import _svg
from .data import CONTINUOUS, FeatureDescriptor
from .lcs import Rule
from .ftcluster import (
    Dendrogram,
    ElbowResult,
    SignificanceResult,
    cut_clusters,
    elbow_curve,
    export_clustermap,
    export_dendrogram_json,
    export_elbow,
    export_pvalues_csv,
    pearson_distance_matrix,
    significance_test,
    ward_linkage,
)


@dataclass
class MergedPopulation:
    """Fold populations deduplicated by (condition, class).

    Statistics of duplicate rules are combined as numerosity-weighted means;
    ``provenance`` lists the contributing fold indices per merged rule.
    """

    rules: list[Rule]
    provenance: list[list[int]]


def _validate_schema(rule: Rule, features: list[FeatureDescriptor]) -> None:
    for f, spec in rule.condition.items():
        if not 0 <= f < len(features):
            raise ValueError(f"rule references feature index {f} outside the schema")
        is_interval = isinstance(spec, tuple)
        if is_interval != (features[f].kind == CONTINUOUS):
            raise ValueError(
                f"rule spec on {features[f].name!r} does not match its {features[f].kind} kind"
            )


def merge_populations(
    pops: list[list[Rule]], features: list[FeatureDescriptor]
) -> MergedPopulation:
    """Merge fold rule populations into one deduplicated set."""
    merged: dict[tuple, Rule] = {}
    folds: dict[tuple, list[int]] = {}
    for fold, pop in enumerate(pops):
        for rule in pop:
            _validate_schema(rule, features)
            key = rule.key()
            if key not in merged:
                merged[key] = Rule(
                    condition=dict(rule.condition),
                    klass=rule.klass,
                    numerosity=rule.numerosity,
                    match_count=rule.match_count,
                    correct_count=rule.correct_count,
                    accuracy=rule.accuracy,
                    fitness=rule.fitness,
                    avg_match_set_size=rule.avg_match_set_size,
                    ga_timestamp=rule.ga_timestamp,
                    init_timestamp=rule.init_timestamp,
                )
                folds[key] = [fold]
            else:
                keep = merged[key]
                w_old = keep.numerosity
                w_new = rule.numerosity
                total = w_old + w_new
                keep.accuracy = (keep.accuracy * w_old + rule.accuracy * w_new) / total
                keep.fitness = (keep.fitness * w_old + rule.fitness * w_new) / total
                keep.avg_match_set_size = (
                    keep.avg_match_set_size * w_old + rule.avg_match_set_size * w_new
                ) / total
                keep.match_count += rule.match_count
                keep.correct_count += rule.correct_count
                keep.numerosity = total
                folds[key].append(fold)
    keys = sorted(merged)
    return MergedPopulation(
        rules=[merged[k] for k in keys],
        provenance=[folds[k] for k in keys],
    )


@dataclass
class RuleEncoding:
    """Binary rules-by-features matrix: 1 where a rule specifies the feature."""

    matrix: np.ndarray
    classes: list[int]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int8)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.classes):
            raise ValueError("encoding row count must equal class count")
        if len(self.matrix) and (self.matrix.sum(axis=1) < 1).any():
            raise ValueError("every rule must specify at least one feature")


def encode_rules(pop: MergedPopulation, n_features: int) -> RuleEncoding:
    """One row per macro-rule; numerosity is not expanded."""
    matrix = np.zeros((len(pop.rules), n_features), dtype=np.int8)
    for r, rule in enumerate(pop.rules):
        for f in rule.condition:
            matrix[r, f] = 1
    return RuleEncoding(matrix=matrix, classes=[rule.klass for rule in pop.rules])


@dataclass
class CoOccurrenceNetwork:
    """Symmetric co-specification counts; the diagonal counts specifications."""

    feature_names: list[str]
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        p = len(self.feature_names)
        if self.counts.shape != (p, p):
            raise ValueError("counts must be a square feature-by-feature matrix")
        if (self.counts != self.counts.T).any():
            raise ValueError("counts must be symmetric")


def co_occurrence(
    pop: MergedPopulation,
    feature_names: list[str],
    numerosity_weighted: bool = False,
) -> CoOccurrenceNetwork:
    """Count pairwise co-specification over macro-rules.

    Macro-rules count once by default; pass ``numerosity_weighted`` to count
    each micro-copy.
    """
    p = len(feature_names)
    counts = np.zeros((p, p), dtype=np.int64)
    for rule in pop.rules:
        w = rule.numerosity if numerosity_weighted else 1
        specs = sorted(rule.condition)
        for a_i, f in enumerate(specs):
            counts[f, f] += w
            for g in specs[a_i + 1 :]:
                counts[f, g] += w
                counts[g, f] += w
    return CoOccurrenceNetwork(feature_names=list(feature_names), counts=counts)


def export_network(
    net: CoOccurrenceNetwork,
    dot_path,
    json_path,
    svg_path,
    edge_threshold: int = 1,
    linear_diameter: bool = False,
) -> None:
    """Write DOT, JSON, and circular-layout SVG renderings of the network.

    ``edge_threshold`` hides weaker edges from the SVG only; DOT and JSON
    always carry every nonzero edge.
    """
    p = len(net.feature_names)
    diag = [int(net.counts[f, f]) for f in range(p)]
    nodes = [f for f in range(p) if diag[f] > 0]
    edges = [
        (f, g, int(net.counts[f, g]))
        for f in range(p)
        for g in range(f + 1, p)
        if net.counts[f, g] > 0
    ]

    with open(dot_path, "w") as fh:
        fh.write("graph cooccurrence {\n")
        fh.write("  node [shape=circle];\n")
        for f in nodes:
            fh.write(f'  "{net.feature_names[f]}" [count={diag[f]}];\n')
        for f, g, c in edges:
            fh.write(
                f'  "{net.feature_names[f]}" -- "{net.feature_names[g]}" [count={c}];\n'
            )
        fh.write("}\n")

    doc = {
        "nodes": [{"feature": net.feature_names[f], "count": diag[f]} for f in nodes],
        "edges": [
            {"a": net.feature_names[f], "b": net.feature_names[g], "count": c}
            for f, g, c in edges
        ],
    }
    with open(json_path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")

    index = {f: k for k, f in enumerate(nodes)}
    svg_edges = [
        (index[f], index[g], c) for f, g, c in edges if c >= edge_threshold
    ]
    svg = _svg.network_svg(
        [net.feature_names[f] for f in nodes],
        [diag[f] for f in nodes],
        svg_edges,
        title="feature co-occurrence",
        linear_diameter=linear_diameter,
    )
    with open(svg_path, "w") as fh:
        fh.write(svg)


def export_encoding_csv(enc: RuleEncoding, feature_names: list[str], class_names: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rule_id", "class"] + list(feature_names))
        for r in range(enc.matrix.shape[0]):
            writer.writerow(
                [r, class_names[enc.classes[r]]] + enc.matrix[r].astype(int).tolist()
            )


def cluster_rules(
    enc: RuleEncoding,
    alpha: float,
    n_sim: int,
    seed: int,
    outdir=None,
    class_names: list[str] | None = None,
    feature_names: list[str] | None = None,
    min_leaf: int = 5,
) -> tuple[Dendrogram, SignificanceResult, ElbowResult]:
    """Cluster the binary rule encoding exactly like the instance phase.

    With ``outdir`` set, clustermaps and elbow artifacts are written there
    (rule_clustermap_c{c}.svg, rule_elbow.csv/svg, rule_pvalues.csv,
    rule_dendrogram.json).
    """
    if enc.matrix.shape[0] < 2:
        raise ValueError("need at least 2 rules to cluster")
    data = enc.matrix.astype(np.float64)
    row_dend = ward_linkage(pearson_distance_matrix(data))
    col_dend = ward_linkage(pearson_distance_matrix(data.T))
    sig = significance_test(row_dend, data, alpha=alpha, n_sim=n_sim, seed=seed, min_leaf=min_leaf)
    elbow = elbow_curve(data, row_dend, sig)
    if outdir is not None:
        from pathlib import Path

        outdir = Path(outdir)
        names = feature_names or [str(j) for j in range(data.shape[1])]
        class_band = None
        if class_names is not None:
            class_band = [class_names[c] for c in enc.classes]
        for c in range(1, sig.k_max + 1):
            assignment = cut_clusters(row_dend, sig, c)
            export_clustermap(
                data,
                row_dend,
                col_dend,
                assignment,
                outdir / f"rule_clustermap_c{c}.svg",
                col_labels=names,
                true_subgroups=class_band,
                title=f"rule clustermap (c={c}; right band = rule class)",
            )
        export_elbow(elbow, outdir / "rule_elbow.csv", outdir / "rule_elbow.svg", title="rule elbow")
        export_pvalues_csv(row_dend, sig, outdir / "rule_pvalues.csv")
        export_dendrogram_json({"rules": row_dend, "features": col_dend}, outdir / "rule_dendrogram.json")
    return row_dend, sig, elbow
