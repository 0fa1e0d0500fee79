"""Feature-tracking interpretation: normalization, merging, hierarchical
clustering, Monte-Carlo cluster significance, cluster cuts, elbow
recommendation, per-cluster audits, and clustermap export.

Clustering uses Pearson-correlation distance between rows and Ward linkage
computed by the Lance-Williams recurrence on squared distances.  Significance
follows a Monte-Carlo scheme: each dendrogram node is compared against
same-shape data drawn from a diagonal-Gaussian fit of its rows, using the
two-group cluster index (within-split / total sum of squares) of its top
split.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster
from scipy.cluster.hierarchy import linkage as _scipy_linkage
from scipy.spatial.distance import squareform

from . import _svg
from .data import CvSplit
from .lcs import FeatureTrackingMatrix

DEFAULT_MIN_LEAF = 5


# ---------------------------------------------------------------------------
# Feature-tracking score preparation
# ---------------------------------------------------------------------------


def ft_normalize(ft: FeatureTrackingMatrix) -> FeatureTrackingMatrix:
    """Scale each row by its own maximum; all-zero rows stay zero."""
    mat = ft.matrix.copy()
    peaks = mat.max(axis=1)
    nz = peaks > 0.0
    mat[nz] = mat[nz] / peaks[nz, None]
    return FeatureTrackingMatrix(list(ft.ids), mat)


def ft_merge(
    per_fold: list[FeatureTrackingMatrix],
    splits: list[CvSplit],
    instance_ids: list[str],
) -> FeatureTrackingMatrix:
    """Average each instance's rows across the folds whose training set held it."""
    if not per_fold:
        raise ValueError("no fold matrices to merge")
    p = per_fold[0].matrix.shape[1]
    sums = np.zeros((len(instance_ids), p))
    counts = np.zeros(len(instance_ids))
    pos = {iid: i for i, iid in enumerate(instance_ids)}
    for ft in per_fold:
        for r, iid in enumerate(ft.ids):
            i = pos[iid]
            sums[i] += ft.matrix[r]
            counts[i] += 1
    if (counts == 0).any():
        missing = [instance_ids[i] for i in np.where(counts == 0)[0][:5]]
        raise ValueError(f"instance(s) missing from every fold matrix: {missing}")
    return FeatureTrackingMatrix(list(instance_ids), sums / counts[:, None])


# ---------------------------------------------------------------------------
# Distances and Ward linkage
# ---------------------------------------------------------------------------


def pearson_distance_matrix(rows: np.ndarray) -> np.ndarray:
    """d(i,j) = 1 - pearson(i,j); constant rows are distance 0 only to an
    identical constant row and 1 to everything else."""
    rows = np.asarray(rows, dtype=np.float64)
    m = rows.shape[0]
    if m < 2:
        raise ValueError("need at least 2 rows")
    centered = rows - rows.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    const = norms == 0.0
    safe = np.where(const, 1.0, norms)
    unit = centered / safe[:, None]
    r = unit @ unit.T
    np.clip(r, -1.0, 1.0, out=r)
    D = 1.0 - r
    D = (D + D.T) / 2.0
    D[D < 1e-12] = 0.0  # snap float fuzz so identical rows sit at exactly 0
    if const.any():
        D[const, :] = 1.0
        D[:, const] = 1.0
        const_idx = np.where(const)[0]
        for i in const_idx:
            same = const & (np.abs(rows - rows[i]).sum(axis=1) == 0.0)
            D[i, same] = 0.0
            D[same, i] = 0.0
    np.fill_diagonal(D, 0.0)
    return D


@dataclass
class Dendrogram:
    """Binary merge tree; leaves are 0..m-1 and internal node k has id m+k.

    ``merges`` rows are (left_id, right_id, height, size) with left < right.
    """

    n_leaves: int
    merges: np.ndarray

    def __post_init__(self):
        self.merges = np.asarray(self.merges, dtype=np.float64)
        if self.merges.shape != (self.n_leaves - 1, 4):
            raise ValueError("merge table must have m-1 rows of 4 columns")

    @property
    def root(self) -> int:
        return self.n_leaves + len(self.merges) - 1

    def children(self, node: int) -> tuple[int, int]:
        row = self.merges[node - self.n_leaves]
        return int(row[0]), int(row[1])

    def height(self, node: int) -> float:
        if node < self.n_leaves:
            return 0.0
        return float(self.merges[node - self.n_leaves, 2])

    def size(self, node: int) -> int:
        if node < self.n_leaves:
            return 1
        return int(self.merges[node - self.n_leaves, 3])

    def parents(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for k in range(len(self.merges)):
            node = self.n_leaves + k
            out[int(self.merges[k, 0])] = node
            out[int(self.merges[k, 1])] = node
        return out

    def members(self, node: int) -> list[int]:
        """Leaf indices under a node, in leaf display order (left before right)."""
        ordered: list[int] = []
        stack = [node]
        while stack:
            u = stack.pop()
            if u < self.n_leaves:
                ordered.append(u)
            else:
                left, right = self.children(u)
                stack.extend((right, left))
        return ordered

    def leaves_order(self) -> list[int]:
        return self.members(self.root)

    def to_json(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "nodes": [
                {
                    "id": self.n_leaves + k,
                    "left": int(self.merges[k, 0]),
                    "right": int(self.merges[k, 1]),
                    "height": float(self.merges[k, 2]),
                    "size": int(self.merges[k, 3]),
                }
                for k in range(len(self.merges))
            ],
        }


def _pair_values(S: np.ndarray, i: int, idx: np.ndarray) -> np.ndarray:
    vals = np.empty(len(idx))
    lower = idx < i
    vals[lower] = S[idx[lower], i]
    vals[~lower] = S[i, idx[~lower]]
    return vals


def _pair_set(S: np.ndarray, i: int, idx: np.ndarray, vals: np.ndarray) -> None:
    lower = idx < i
    S[idx[lower], i] = vals[lower]
    S[i, idx[~lower]] = vals[~lower]


def ward_linkage(D: np.ndarray) -> Dendrogram:
    """Agglomerate by the Ward criterion (Lance-Williams on squared distances).

    Ties pick the lexicographically smallest active (i, j) slot pair, so the
    merge sequence is deterministic.
    """
    D = np.asarray(D, dtype=np.float64)
    m = D.shape[0]
    if D.ndim != 2 or D.shape[1] != m:
        raise ValueError("distance matrix must be square")
    if not np.allclose(D, D.T, atol=1e-12) or np.abs(np.diag(D)).max() > 1e-12:
        raise ValueError("distance matrix must be symmetric with a zero diagonal")
    if m < 2:
        raise ValueError("need at least 2 items")

    # Upper-triangle storage of squared distances; inf marks dead slots.
    S = np.full((m, m), np.inf)
    iu = np.triu_indices(m, k=1)
    S[iu] = (D**2)[iu]
    sizes = np.ones(m, dtype=np.int64)
    cid = np.arange(m)
    alive = np.ones(m, dtype=bool)
    merges = np.zeros((m - 1, 4))
    for step in range(m - 1):
        flat = np.argmin(S)
        i, j = np.unravel_index(flat, S.shape)  # first occurrence: smallest (i, j)
        h = float(np.sqrt(S[i, j]))
        left, right = int(cid[i]), int(cid[j])
        if left > right:
            left, right = right, left
        ni, nj = sizes[i], sizes[j]
        merges[step] = (left, right, h, ni + nj)
        alive[j] = False
        others = np.where(alive)[0]
        others = others[others != i]
        if others.size:
            sik = _pair_values(S, i, others)
            sjk = _pair_values(S, j, others)
            nk = sizes[others]
            total = ni + nj + nk
            new = ((ni + nk) * sik + (nj + nk) * sjk - nk * S[i, j]) / total
            _pair_set(S, i, others, new)
        S[j, :] = np.inf
        S[:, j] = np.inf
        sizes[i] = ni + nj
        cid[i] = m + step
    return Dendrogram(m, merges)


# ---------------------------------------------------------------------------
# Monte-Carlo cluster significance
# ---------------------------------------------------------------------------


@dataclass
class SignificanceResult:
    alpha: float
    n_sim: int
    min_leaf: int
    pvalues: dict[int, float]
    terminal_nodes: list[int]
    k_max: int


def _cluster_index(rows: np.ndarray, labels: np.ndarray) -> float:
    total = float(((rows - rows.mean(axis=0)) ** 2).sum())
    if total <= 1e-300:
        return 1.0
    within = 0.0
    for g in np.unique(labels):
        grp = rows[labels == g]
        within += float(((grp - grp.mean(axis=0)) ** 2).sum())
    return within / total


def _null_top_split_index(sim: np.ndarray) -> float:
    D = pearson_distance_matrix(sim)
    Z = _scipy_linkage(squareform(D, checks=False), method="ward")
    labels = fcluster(Z, t=2, criterion="maxclust")
    if len(np.unique(labels)) < 2:
        return 1.0
    return _cluster_index(sim, labels)


def significance_test(
    dend: Dendrogram,
    data: np.ndarray,
    alpha: float = 0.05,
    n_sim: int = 100,
    seed: int = 0,
    min_leaf: int = DEFAULT_MIN_LEAF,
) -> SignificanceResult:
    """Top-down Monte-Carlo test of every dendrogram split.

    A node's observed top-split cluster index is compared with the best top
    split of ``n_sim`` datasets drawn from a diagonal Gaussian fitted to the
    node's rows; recursion continues only below significant nodes.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if n_sim < 20:
        raise ValueError("n_sim must be >= 20")
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] != dend.n_leaves:
        raise ValueError("data rows must match dendrogram leaves")
    pvalues: dict[int, float] = {}
    terminal: list[int] = []
    stack = [dend.root]
    while stack:
        node = stack.pop()
        if node < dend.n_leaves or dend.size(node) < 2 * min_leaf:
            terminal.append(node)
            continue
        members = np.array(dend.members(node))
        rows = data[members]
        left, right = dend.children(node)
        left_set = set(dend.members(left))
        labels = np.array([0 if i in left_set else 1 for i in members])
        observed = _cluster_index(rows, labels)
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, node]))
        mu = rows.mean(axis=0)
        sd = rows.std(axis=0)
        hits = 0
        for _ in range(n_sim):
            sim = rng.normal(mu, sd, size=rows.shape)
            if _null_top_split_index(sim) <= observed:
                hits += 1
        p = (1.0 + hits) / (n_sim + 1.0)
        pvalues[node] = p
        if p < alpha:
            stack.append(right)
            stack.append(left)
        else:
            terminal.append(node)
    first_leaf = {node: dend.members(node)[0] for node in terminal}
    leaf_pos = {leaf: k for k, leaf in enumerate(dend.leaves_order())}
    terminal.sort(key=lambda node: leaf_pos[first_leaf[node]])
    return SignificanceResult(
        alpha=alpha,
        n_sim=n_sim,
        min_leaf=min_leaf,
        pvalues=pvalues,
        terminal_nodes=terminal,
        k_max=len(terminal),
    )


# ---------------------------------------------------------------------------
# Cluster cuts, distortion, elbow
# ---------------------------------------------------------------------------


@dataclass
class ClusterAssignment:
    n_clusters: int
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        uniq = np.unique(self.labels)
        if len(uniq) != self.n_clusters or uniq.min() != 0 or uniq.max() != self.n_clusters - 1:
            raise ValueError("labels must be contiguous 0..c-1 and cover every item")


def cut_clusters(dend: Dendrogram, sig: SignificanceResult, c: int) -> ClusterAssignment:
    """Merge sibling terminal clusters bottom-up until ``c`` remain.

    Labels follow dendrogram leaf order, so cluster 0 holds the leftmost leaf.
    """
    if not 1 <= c <= sig.k_max:
        raise ValueError(f"c must lie in [1, {sig.k_max}], got {c}")
    frontier = set(sig.terminal_nodes)
    parents = dend.parents()
    while len(frontier) > c:
        best: tuple[float, int] | None = None
        for node in frontier:
            parent = parents.get(node)
            if parent is None:
                continue
            left, right = dend.children(parent)
            sibling = right if node == left else left
            if sibling in frontier:
                cand = (dend.height(parent), parent)
                if best is None or cand < best:
                    best = cand
        if best is None:
            raise RuntimeError("no sibling pair found in frontier")
        parent = best[1]
        left, right = dend.children(parent)
        frontier.discard(left)
        frontier.discard(right)
        frontier.add(parent)
    leaf_pos = {leaf: k for k, leaf in enumerate(dend.leaves_order())}
    ordered = sorted(frontier, key=lambda node: leaf_pos[dend.members(node)[0]])
    labels = np.zeros(dend.n_leaves, dtype=np.int64)
    for k, node in enumerate(ordered):
        for leaf in dend.members(node):
            labels[leaf] = k
    return ClusterAssignment(n_clusters=c, labels=labels)


def distortion(data: np.ndarray, assignment: ClusterAssignment) -> float:
    """Sum of squared Euclidean distances of rows to their cluster centroid."""
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] != len(assignment.labels):
        raise ValueError("assignment does not cover all rows")
    total = 0.0
    for g in range(assignment.n_clusters):
        grp = data[assignment.labels == g]
        if len(grp):
            total += float(((grp - grp.mean(axis=0)) ** 2).sum())
    return total


@dataclass
class ElbowResult:
    curve: list[tuple[int, float]]
    recommended_c: int


def elbow_recommend(curve: list[tuple[int, float]]) -> int:
    """Shear the curve so its endpoints are level, pick the lowest point.

    Equivalent to rotating the plot about the origin until the first and last
    points share a y coordinate; ties resolve to the smallest cluster count.
    """
    if len(curve) < 2:
        if not curve:
            raise ValueError("empty elbow curve")
        return curve[0][0]
    cs = [c for c, _ in curve]
    ds = [d for _, d in curve]
    if any(b <= a for a, b in zip(cs, cs[1:])):
        raise ValueError("cluster counts must be strictly ascending")
    slope = (ds[-1] - ds[0]) / (cs[-1] - cs[0])
    best_c = cs[0]
    best_y = None
    for c, d in curve:
        y = d - slope * (c - cs[0])
        if best_y is None or y < best_y - 1e-12:
            best_y = y
            best_c = c
    return best_c


def build_elbow(
    curve: list[tuple[int, float]], n_rows: int, search_cap: int | None = None
) -> ElbowResult:
    """Wrap a distortion curve with its recommendation.

    The full curve is kept; ``search_cap`` restricts only the recommendation
    search.  Very large significant-cluster counts come with a long flat
    distortion tail that tilts the shear baseline, so by default the search
    stops at sqrt(row count).
    """
    if search_cap is None:
        search_cap = max(2, int(np.ceil(np.sqrt(n_rows))))
    prefix = curve[: max(2, min(search_cap, len(curve)))]
    return ElbowResult(curve=list(curve), recommended_c=elbow_recommend(prefix))


def elbow_curve(
    data: np.ndarray,
    dend: Dendrogram,
    sig: SignificanceResult,
    search_cap: int | None = None,
) -> ElbowResult:
    """Distortion for every cut from 1 to k_max plus the recommendation."""
    curve = []
    for c in range(1, sig.k_max + 1):
        assignment = cut_clusters(dend, sig, c)
        curve.append((c, distortion(data, assignment)))
    return build_elbow(curve, data.shape[0], search_cap)


# ---------------------------------------------------------------------------
# Per-cluster audit
# ---------------------------------------------------------------------------


def within_cluster_stats(
    assignment: ClusterAssignment,
    per_instance_correct,
    class_labels,
    true_subgroups=None,
) -> list[dict]:
    """Size, held-out accuracy, and composition for each cluster.

    ``per_instance_correct`` entries may be None when an instance has no
    held-out prediction; such instances do not count toward accuracy.
    """
    out = []
    for g in range(assignment.n_clusters):
        rows = np.where(assignment.labels == g)[0]
        known = [per_instance_correct[i] for i in rows if per_instance_correct[i] is not None]
        acc = (sum(1 for k in known if k) / len(known)) if known else float("nan")
        classes: dict[str, int] = {}
        for i in rows:
            classes[class_labels[i]] = classes.get(class_labels[i], 0) + 1
        entry = {
            "cluster": g,
            "size": int(len(rows)),
            "test_accuracy": acc,
            "classes": dict(sorted(classes.items())),
        }
        if true_subgroups is not None:
            subs: dict[str, int] = {}
            for i in rows:
                subs[true_subgroups[i]] = subs.get(true_subgroups[i], 0) + 1
            entry["true_subgroups"] = dict(sorted(subs.items()))
        out.append(entry)
    return out


def write_cluster_stats_csv(stats: list[dict], path) -> None:
    class_keys = sorted({k for s in stats for k in s["classes"]})
    sub_keys = sorted({k for s in stats for k in s.get("true_subgroups", {})})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["cluster", "size", "test_accuracy"]
        header += [f"class_{k}" for k in class_keys]
        header += [f"true_{k}" for k in sub_keys]
        writer.writerow(header)
        for s in stats:
            acc = s["test_accuracy"]
            row = [s["cluster"], s["size"], "" if acc != acc else f"{acc:.6f}"]
            row += [s["classes"].get(k, 0) for k in class_keys]
            row += [s.get("true_subgroups", {}).get(k, 0) for k in sub_keys]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def export_clustermap(
    data: np.ndarray,
    row_dend: Dendrogram,
    col_dend: Dendrogram,
    assignment: ClusterAssignment,
    svg_path,
    col_labels=None,
    true_subgroups=None,
    title: str = "",
) -> None:
    """Write the heatmap SVG for one cluster count."""
    row_order = row_dend.leaves_order()
    col_order = col_dend.leaves_order()
    if col_labels is None:
        col_labels = [str(j) for j in range(data.shape[1])]
    svg = _svg.heatmap_svg(
        data,
        row_order,
        col_order,
        col_labels,
        found_labels=assignment.labels,
        true_labels=list(true_subgroups) if true_subgroups is not None else None,
        title=title,
    )
    with open(svg_path, "w") as fh:
        fh.write(svg)


def export_elbow(elbow: ElbowResult, csv_path, svg_path, title: str = "") -> None:
    cs = [c for c, _ in elbow.curve]
    ds = [d for _, d in elbow.curve]
    slope = (ds[-1] - ds[0]) / (cs[-1] - cs[0]) if len(cs) > 1 else 0.0
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["c", "distortion", "sheared_y", "recommended"])
        for c, d in elbow.curve:
            y = d - slope * (c - cs[0])
            writer.writerow([c, f"{d:.9g}", f"{y:.9g}", int(c == elbow.recommended_c)])
    with open(svg_path, "w") as fh:
        fh.write(_svg.elbow_svg(elbow.curve, elbow.recommended_c, title=title))


def export_dendrogram_json(dends: dict[str, Dendrogram], path) -> None:
    doc = {name: d.to_json() for name, d in dends.items()}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def export_pvalues_csv(dend: Dendrogram, sig: SignificanceResult, path) -> None:
    terminal = set(sig.terminal_nodes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "size", "p_value", "significant", "terminal"])
        for node in sorted(set(sig.pvalues) | terminal):
            p = sig.pvalues.get(node)
            writer.writerow(
                [
                    node,
                    dend.size(node),
                    "" if p is None else f"{p:.6f}",
                    "" if p is None else int(p < sig.alpha),
                    int(node in terminal),
                ]
            )
