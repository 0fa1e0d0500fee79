"""Pipeline orchestration and command-line interface.

Four phases: (1) cross-validated modeling with expert-knowledge weighting,
(2) feature-tracking clustering and clustermap export, (3) rule-population
clustering, (4) co-occurrence network export.  Output content is a pure
function of (config, seed); wall-clock timings go to a separate
``timings.json`` so that the rest of the output tree is byte-reproducible
regardless of worker count.

Exit codes: 0 success, 2 config error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, data, ftcluster, lcs, relief, ruleviz

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class ConfigError(ValueError):
    """Invalid configuration file or flag combination."""


@dataclass
class PipelineConfig:
    out: str
    dataset: dict | None = None
    generator: dict | None = None
    n_folds: int = 10
    lcs: lcs.Hyperparams = field(default_factory=lcs.Hyperparams)
    multisurf_subsample: int | None = None
    alpha: float = 0.05
    n_sim: int = 100
    min_leaf: int = 5
    compaction: bool = False
    numerosity_weighted_network: bool = False
    edge_threshold: int = 1
    phase3_max_rules: int = 2000
    phases: tuple[int, ...] = (1, 2, 3, 4)
    workers: int = 1
    seed: int = 0

    def validate(self) -> None:
        if (self.dataset is None) == (self.generator is None):
            raise ConfigError("config must provide exactly one of 'dataset' or 'generator'")
        if self.n_folds < 2:
            raise ConfigError("n_folds must be >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.n_sim < 20:
            raise ConfigError("n_sim must be >= 20")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.edge_threshold < 0:
            raise ConfigError("edge_threshold must be >= 0")
        if self.phase3_max_rules < 2:
            raise ConfigError("phase3_max_rules must be >= 2")
        phases = list(self.phases)
        if not phases or sorted(phases) != phases or len(set(phases)) != len(phases):
            raise ConfigError(f"phases must be strictly ascending, got {phases}")
        if any(p not in (1, 2, 3, 4) for p in phases):
            raise ConfigError(f"phases must be within 1..4, got {phases}")
        if phases != list(range(phases[0], phases[-1] + 1)):
            raise ConfigError(f"phases must be contiguous, got {phases}")
        try:
            self.lcs.validate()
        except ValueError as exc:
            raise ConfigError(f"lcs hyperparameters: {exc}") from None


_CONFIG_KEYS = {
    "out", "dataset", "generator", "n_folds", "lcs", "multisurf_subsample",
    "alpha", "n_sim", "min_leaf", "compaction", "numerosity_weighted_network",
    "edge_threshold", "phase3_max_rules", "phases", "workers", "seed",
}


def load_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    kwargs = dict(doc)
    if "lcs" in kwargs:
        if not isinstance(kwargs["lcs"], dict):
            raise ConfigError("'lcs' must be an object of hyperparameters")
        try:
            kwargs["lcs"] = lcs.Hyperparams(**kwargs["lcs"])
        except TypeError as exc:
            raise ConfigError(f"lcs hyperparameters: {exc}") from None
    if "phases" in kwargs:
        kwargs["phases"] = tuple(int(p) for p in kwargs["phases"])
    if "out" not in kwargs:
        kwargs["out"] = "rulescope_out"
    try:
        cfg = PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def _build_dataset(cfg: PipelineConfig) -> data.Dataset:
    if cfg.dataset is not None:
        spec = dict(cfg.dataset)
        path = spec.pop("path", None)
        if path is None:
            raise ConfigError("dataset config requires a 'path'")
        class_column = spec.pop("class_column", "Class")
        kwargs = {
            "id_column": spec.pop("id_column", None),
            "true_cluster_column": spec.pop("true_cluster_column", None),
            "discrete_limit": spec.pop("discrete_limit", 10),
        }
        missing = spec.pop("missing_values", None)
        if missing is not None:
            kwargs["missing_values"] = tuple(missing)
        if spec:
            raise ConfigError(f"unknown dataset keys {sorted(spec)}")
        return data.load_dataset(path, class_column, **kwargs)
    spec = dict(cfg.generator)
    kind = spec.pop("kind", None)
    seed = int(spec.pop("seed", cfg.seed))
    try:
        if kind == "mux":
            return data.generate_mux(int(spec.pop("address_bits")), int(spec.pop("n_instances")), seed)
        if kind == "xor":
            return data.generate_xor(
                int(spec.pop("n_features")),
                int(spec.pop("n_interacting", 2)),
                int(spec.pop("n_instances")),
                float(spec.pop("label_noise", 0.0)),
                seed,
            )
        if kind == "univariate":
            return data.generate_univariate(
                int(spec.pop("n_features")),
                int(spec.pop("n_instances")),
                float(spec.pop("penetrance_gap")),
                seed,
            )
        if kind == "hetero":
            models = spec.pop("models")
            proportions = spec.pop("proportions")
            if len(models) != len(proportions):
                raise ConfigError("hetero generator: models and proportions differ in length")
            subgens = [(dict(m), float(q)) for m, q in zip(models, proportions)]
            return data.generate_heterogeneous(
                subgens,
                int(spec.pop("n_instances")),
                seed,
                n_features=int(spec.pop("n_features", 20)),
            )
    except KeyError as exc:
        raise ConfigError(f"generator {kind!r} missing key {exc.args[0]!r}") from None
    raise ConfigError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# Canonical file writers
# ---------------------------------------------------------------------------


def _write_json(doc, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_weights_csv(w: relief.FeatureWeights, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "score", "normalized"])
        for name, s, nv in zip(w.feature_names, w.scores, w.normalized):
            writer.writerow([name, f"{s:.9g}", f"{nv:.9g}"])


def _write_predictions_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id", "true", "predicted", "correct"])
        writer.writerows(rows)


def _write_dataset_with_clusters(ds: data.Dataset, labels, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["InstanceID"] + ds.feature_names + ["Class"]
        if ds.true_subgroups is not None:
            header.append("TrueSubgroup")
        header.append("clusterID")
        writer.writerow(header)
        for i in range(ds.n_instances):
            row = [ds.instance_ids[i]]
            row += [ds.features[j].decode(ds.X[i, j]) for j in range(ds.n_features)]
            row.append(ds.class_names[ds.y[i]])
            if ds.true_subgroups is not None:
                row.append(ds.true_subgroups[i])
            row.append(int(labels[i]))
            writer.writerow(row)


def _write_ft_csv(ft: lcs.FeatureTrackingMatrix, feature_names, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id"] + list(feature_names))
        for iid, row in zip(ft.ids, ft.matrix):
            writer.writerow([iid] + [f"{v:.9g}" for v in row])


# ---------------------------------------------------------------------------
# Phase 1: cross-validated modeling
# ---------------------------------------------------------------------------


def _fold_job(args):
    ds, split, hp_base, subsample, master_seed = args
    fold = split.fold_index
    fold_seed = master_seed + fold
    train = ds.subset(list(split.train_ids))
    test = ds.subset(list(split.test_ids))
    weights = relief.normalize_weights(relief.multisurf(train, subsample, seed=fold_seed))
    hp = replace(hp_base, seed=fold_seed)
    model = lcs.fit(train, hp, weights)
    preds = lcs.predict_batch(model, test.X)
    ba = lcs.balanced_accuracy(preds.tolist(), test.y.tolist())
    pred_rows = [
        (
            test.instance_ids[i],
            test.class_names[test.y[i]],
            test.class_names[preds[i]],
            int(preds[i] == test.y[i]),
        )
        for i in range(test.n_instances)
    ]
    return fold, weights, model, pred_rows, ba


def _run_phase1(ds, splits, cfg: PipelineConfig, outdir: Path):
    jobs = [(ds, sp, cfg.lcs, cfg.multisurf_subsample, cfg.seed) for sp in splits]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_fold_job, jobs))
    else:
        results = [_fold_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    phase_dir = outdir / "phase1"
    phase_dir.mkdir(parents=True, exist_ok=True)
    _write_json(
        {
            "n_folds": cfg.n_folds,
            "seed": cfg.seed,
            "folds": [
                {"fold": sp.fold_index, "train_ids": list(sp.train_ids), "test_ids": list(sp.test_ids)}
                for sp in splits
            ],
        },
        phase_dir / "folds.json",
    )
    models = []
    accuracies = []
    for fold, weights, model, pred_rows, ba in results:
        fold_dir = phase_dir / f"fold_{fold}"
        fold_dir.mkdir(exist_ok=True)
        _write_weights_csv(weights, fold_dir / "weights.csv")
        lcs.save_model(model, fold_dir / "model.json")
        lcs.export_rules_csv(model.population, model.features, model.class_names, fold_dir / "rules.csv")
        _write_predictions_csv(pred_rows, fold_dir / "predictions.csv")
        models.append(model)
        accuracies.append(ba)
    summary = {
        "fold_balanced_accuracy": [round(a, 9) for a in accuracies],
        "mean_balanced_accuracy": round(statistics.mean(accuracies), 9),
        "stdev_balanced_accuracy": round(statistics.stdev(accuracies), 9)
        if len(accuracies) > 1
        else 0.0,
    }
    return models, summary


def _load_phase1(ds, cfg: PipelineConfig, outdir: Path):
    """Resume support: reload splits and per-fold models from phase1 outputs."""
    phase_dir = outdir / "phase1"
    required = [phase_dir / "folds.json"]
    required += [phase_dir / f"fold_{i}" / "model.json" for i in range(cfg.n_folds)]
    required += [phase_dir / f"fold_{i}" / "predictions.csv" for i in range(cfg.n_folds)]
    missing = [str(p) for p in required if not p.exists()]
    if missing:
        raise data.DataError(
            "cannot resume: missing phase 1 outputs: " + ", ".join(missing)
        )
    with open(phase_dir / "folds.json") as fh:
        doc = json.load(fh)
    if doc.get("n_folds") != cfg.n_folds:
        raise data.DataError(
            f"phase 1 outputs were built with n_folds={doc.get('n_folds')}, "
            f"config says {cfg.n_folds}"
        )
    splits = [
        data.CvSplit(e["fold"], tuple(e["train_ids"]), tuple(e["test_ids"]))
        for e in doc["folds"]
    ]
    models = [lcs.load_model(phase_dir / f"fold_{i}" / "model.json") for i in range(cfg.n_folds)]
    return splits, models


def _correctness_by_row(ds, cfg: PipelineConfig, outdir: Path):
    """Per-instance held-out correctness from the fold prediction files."""
    correct: dict[str, bool] = {}
    for i in range(cfg.n_folds):
        path = outdir / "phase1" / f"fold_{i}" / "predictions.csv"
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                correct[row["instance_id"]] = row["correct"] == "1"
    return [correct.get(iid) for iid in ds.instance_ids]


# ---------------------------------------------------------------------------
# Phase 2: feature-tracking clustering
# ---------------------------------------------------------------------------


def _run_phase2(ds, splits, models, cfg: PipelineConfig, outdir: Path):
    phase_dir = outdir / "phase2"
    phase_dir.mkdir(parents=True, exist_ok=True)
    normalized = [ftcluster.ft_normalize(m.ft) for m in models]
    merged = ftcluster.ft_merge(normalized, splits, ds.instance_ids)
    _write_ft_csv(merged, ds.feature_names, phase_dir / "ft_merged.csv")

    row_dend = ftcluster.ward_linkage(ftcluster.pearson_distance_matrix(merged.matrix))
    col_dend = ftcluster.ward_linkage(ftcluster.pearson_distance_matrix(merged.matrix.T))
    ftcluster.export_dendrogram_json(
        {"instances": row_dend, "features": col_dend}, phase_dir / "dendrogram.json"
    )
    sig = ftcluster.significance_test(
        row_dend,
        merged.matrix,
        alpha=cfg.alpha,
        n_sim=cfg.n_sim,
        seed=cfg.seed,
        min_leaf=cfg.min_leaf,
    )
    ftcluster.export_pvalues_csv(row_dend, sig, phase_dir / "pvalues.csv")

    correct_by_row = _correctness_by_row(ds, cfg, outdir)
    class_by_row = [ds.class_names[c] for c in ds.y]
    curve = []
    for c in range(1, sig.k_max + 1):
        assignment = ftcluster.cut_clusters(row_dend, sig, c)
        curve.append((c, ftcluster.distortion(merged.matrix, assignment)))
        with open(phase_dir / f"clusters_c{c}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", "cluster"])
            for i, iid in enumerate(ds.instance_ids):
                writer.writerow([iid, int(assignment.labels[i])])
        stats = ftcluster.within_cluster_stats(
            assignment, correct_by_row, class_by_row, ds.true_subgroups
        )
        ftcluster.write_cluster_stats_csv(stats, phase_dir / f"cluster_stats_c{c}.csv")
        ftcluster.export_clustermap(
            merged.matrix,
            row_dend,
            col_dend,
            assignment,
            phase_dir / f"clustermap_c{c}.svg",
            col_labels=ds.feature_names,
            true_subgroups=ds.true_subgroups,
            title=f"feature tracking clustermap (c={c})",
        )
        _write_dataset_with_clusters(
            ds, assignment.labels, phase_dir / f"dataset_clusterID_c{c}.csv"
        )
    elbow = ftcluster.build_elbow(curve, ds.n_instances)
    ftcluster.export_elbow(
        elbow, phase_dir / "elbow.csv", phase_dir / "elbow.svg", title="feature tracking elbow"
    )
    return {
        "k_max": sig.k_max,
        "recommended_c": elbow.recommended_c,
        "n_instances": ds.n_instances,
    }


# ---------------------------------------------------------------------------
# Phases 3 and 4: rule-set clustering and co-occurrence network
# ---------------------------------------------------------------------------


def _merged_population(ds, splits, models, cfg: PipelineConfig) -> ruleviz.MergedPopulation:
    pops = []
    for sp, model in zip(splits, models):
        pop = model.population
        if cfg.compaction:
            train = ds.subset(list(sp.train_ids))
            pop = lcs.compact(pop, train, theta_sub=cfg.lcs.theta_sub)
        pops.append(pop)
    return ruleviz.merge_populations(pops, models[0].features)


def _run_phase3(ds, splits, models, cfg: PipelineConfig, outdir: Path):
    phase_dir = outdir / "phase3"
    phase_dir.mkdir(parents=True, exist_ok=True)
    merged = _merged_population(ds, splits, models, cfg)
    lcs.export_rules_csv(
        merged.rules, models[0].features, models[0].class_names, phase_dir / "rules_merged.csv"
    )
    pool = merged
    if len(merged.rules) > cfg.phase3_max_rules:
        # Clustering cost grows with the square of the rule count; keep the
        # highest-numerosity (then most accurate) rules for the visual phase.
        order = sorted(
            range(len(merged.rules)),
            key=lambda r: (
                -merged.rules[r].numerosity,
                -merged.rules[r].accuracy,
                merged.rules[r].key(),
            ),
        )[: cfg.phase3_max_rules]
        order.sort()
        pool = ruleviz.MergedPopulation(
            rules=[merged.rules[r] for r in order],
            provenance=[merged.provenance[r] for r in order],
        )
    enc = ruleviz.encode_rules(pool, ds.n_features)
    ruleviz.export_encoding_csv(
        enc, ds.feature_names, models[0].class_names, phase_dir / "rule_encoding.csv"
    )
    _, sig, elbow = ruleviz.cluster_rules(
        enc,
        alpha=cfg.alpha,
        n_sim=cfg.n_sim,
        seed=cfg.seed,
        outdir=phase_dir,
        class_names=models[0].class_names,
        feature_names=ds.feature_names,
        min_leaf=cfg.min_leaf,
    )
    return merged, {
        "k_max": sig.k_max,
        "recommended_c": elbow.recommended_c,
        "n_rules_merged": len(merged.rules),
        "n_rules_clustered": len(pool.rules),
    }


def _run_phase4(ds, merged: ruleviz.MergedPopulation, cfg: PipelineConfig, outdir: Path):
    phase_dir = outdir / "phase4"
    phase_dir.mkdir(parents=True, exist_ok=True)
    net = ruleviz.co_occurrence(
        merged, ds.feature_names, numerosity_weighted=cfg.numerosity_weighted_network
    )
    ruleviz.export_network(
        net,
        phase_dir / "network.dot",
        phase_dir / "network.json",
        phase_dir / "network.svg",
        edge_threshold=cfg.edge_threshold,
    )
    n_nodes = int((np.diag(net.counts) > 0).sum())
    n_edges = int((np.triu(net.counts, k=1) > 0).sum())
    return {"n_nodes": n_nodes, "n_edges": n_edges}


# ---------------------------------------------------------------------------
# Pipeline driver
# ---------------------------------------------------------------------------


def _config_doc(cfg: PipelineConfig) -> dict:
    doc = asdict(cfg)
    doc["lcs"] = asdict(cfg.lcs)
    doc["phases"] = list(cfg.phases)
    # Where the tree lives and how many workers built it are execution
    # environment, not modeling inputs; keeping them out makes the whole
    # output tree byte-comparable across runs.
    del doc["out"]
    del doc["workers"]
    return doc


def run_pipeline(cfg: PipelineConfig) -> int:
    cfg.validate()
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ds = _build_dataset(cfg)
    splits = None
    models = None
    merged_pop = None

    summary_path = outdir / "run_summary.json"
    if summary_path.exists():
        with open(summary_path) as fh:
            summary = json.load(fh)
    else:
        summary = {}
    summary["config"] = _config_doc(cfg)
    summary.setdefault("phases_completed", [])
    timings: dict[str, float] = {}

    if cfg.phases[0] > 1:
        splits, models = _load_phase1(ds, cfg, outdir)

    for phase in cfg.phases:
        t0 = time.time()
        logger.info("phase %d starting", phase)
        if phase == 1:
            splits = data.cv_partition(ds, cfg.n_folds, cfg.seed)
            models, phase_summary = _run_phase1(ds, splits, cfg, outdir)
            summary["phase1"] = phase_summary
        elif phase == 2:
            summary["phase2"] = _run_phase2(ds, splits, models, cfg, outdir)
        elif phase == 3:
            merged_pop, phase_summary = _run_phase3(ds, splits, models, cfg, outdir)
            summary["phase3"] = phase_summary
        elif phase == 4:
            if merged_pop is None:
                merged_pop = _merged_population(ds, splits, models, cfg)
            summary["phase4"] = _run_phase4(ds, merged_pop, cfg, outdir)
        timings[f"phase{phase}_seconds"] = round(time.time() - t0, 3)
        if phase not in summary["phases_completed"]:
            summary["phases_completed"].append(phase)
        summary["phases_completed"].sort()
        _write_json(summary, summary_path)
        logger.info("phase %d done in %.1fs", phase, timings[f"phase{phase}_seconds"])

    # Timings are observational, never part of the deterministic contract.
    _write_json(timings, outdir / "timings.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def report(outdir) -> None:
    outdir = Path(outdir)
    summary_path = outdir / "run_summary.json"
    if not summary_path.exists():
        raise data.DataError(f"no run summary at {summary_path}")
    with open(summary_path) as fh:
        summary = json.load(fh)

    print(f"run summary: {outdir}")
    phase1 = summary.get("phase1")
    if phase1:
        print("\nfold balanced accuracies:")
        for i, a in enumerate(phase1["fold_balanced_accuracy"]):
            print(f"  fold {i}: {a:.4f}")
        print(f"  mean: {phase1['mean_balanced_accuracy']:.4f}"
              f"  stdev: {phase1['stdev_balanced_accuracy']:.4f}")
    phase2 = summary.get("phase2")
    if phase2:
        print(f"\nsignificant clusters (k_max): {phase2['k_max']}")
        print(f"recommended cluster count: {phase2['recommended_c']}")
        ft_path = outdir / "phase2" / "ft_merged.csv"
        if ft_path.exists():
            with open(ft_path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)[1:]
                mat = np.array([[float(v) for v in row[1:]] for row in reader])
            means = mat.mean(axis=0)
            order = np.argsort(-means)[: min(10, len(header))]
            print("\ntop features by mean merged feature-tracking score:")
            for j in order:
                print(f"  {header[j]}: {means[j]:.4f}")
        stats_path = outdir / "phase2" / f"cluster_stats_c{phase2['recommended_c']}.csv"
        if stats_path.exists():
            print(f"\nper-cluster held-out accuracy (c={phase2['recommended_c']}):")
            with open(stats_path, newline="") as fh:
                for row in csv.DictReader(fh):
                    acc = row["test_accuracy"] or "n/a"
                    print(f"  cluster {row['cluster']}: size={row['size']} accuracy={acc}")
    phase3 = summary.get("phase3")
    if phase3:
        print(f"\nmerged rules: {phase3['n_rules_merged']}"
              f" (clustered: {phase3['n_rules_clustered']},"
              f" recommended c: {phase3['recommended_c']})")
    phase4 = summary.get("phase4")
    if phase4:
        print(f"co-occurrence network: {phase4['n_nodes']} nodes, {phase4['n_edges']} edges")


# ---------------------------------------------------------------------------
# Dataset generation commands
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    if args.generator == "mux":
        ds = data.generate_mux(args.address_bits, args.instances, args.seed)
    elif args.generator == "xor":
        ds = data.generate_xor(args.features, args.interacting, args.instances, args.noise, args.seed)
    elif args.generator == "univariate":
        ds = data.generate_univariate(args.features, args.instances, args.gap, args.seed)
    elif args.generator == "hetero":
        try:
            models = json.loads(args.models_json)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--models-json is not valid JSON: {exc}") from None
        proportions = [float(x) for x in args.proportions.split(",")]
        if len(proportions) != len(models):
            raise ConfigError("--proportions count must match --models-json entries")
        ds = data.generate_heterogeneous(
            list(zip(models, proportions)), args.instances, args.seed, n_features=args.features
        )
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown generator {args.generator!r}")
    data.save_dataset(ds, args.out)
    print(f"wrote {ds.n_instances} instances x {ds.n_features} features to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulescope",
        description="Rule-population modeling and interpretation pipeline",
    )
    parser.add_argument("--version", action="version", version=f"rulescope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run pipeline phases")
    run_p.add_argument("--config", required=True, help="JSON config file")
    run_p.add_argument("--phases", help="comma list, e.g. 1,2,3,4 (default from config)")
    run_p.add_argument("--out", help="output directory (overrides config)")
    run_p.add_argument("--seed", type=int, help="master seed (overrides config)")
    run_p.add_argument("--workers", type=int, help="phase 1 worker processes")
    run_p.add_argument("--compaction", action="store_true", help="compact rules before phase 3")

    rep_p = sub.add_parser("report", help="summarize a finished run")
    rep_p.add_argument("--out", required=True, help="output directory of the run")

    gen_p = sub.add_parser("generate", help="emit a synthetic benchmark CSV")
    gen_sub = gen_p.add_subparsers(dest="generator", required=True)
    mux_p = gen_sub.add_parser("mux")
    mux_p.add_argument("--address-bits", type=int, required=True)
    mux_p.add_argument("--instances", type=int, required=True)
    xor_p = gen_sub.add_parser("xor")
    xor_p.add_argument("--features", type=int, required=True)
    xor_p.add_argument("--interacting", type=int, default=2)
    xor_p.add_argument("--instances", type=int, required=True)
    xor_p.add_argument("--noise", type=float, default=0.0)
    uni_p = gen_sub.add_parser("univariate")
    uni_p.add_argument("--features", type=int, required=True)
    uni_p.add_argument("--instances", type=int, required=True)
    uni_p.add_argument("--gap", type=float, required=True)
    het_p = gen_sub.add_parser("hetero")
    het_p.add_argument("--models-json", required=True,
                       help='e.g. [{"kind":"univariate","penetrance_gap":1.0},...]')
    het_p.add_argument("--proportions", required=True, help="comma list summing to 1")
    het_p.add_argument("--features", type=int, default=20)
    het_p.add_argument("--instances", type=int, required=True)
    for p in (mux_p, xor_p, uni_p, het_p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="CSV path to write")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.phases:
                try:
                    cfg.phases = tuple(int(p) for p in args.phases.split(","))
                except ValueError:
                    raise ConfigError(f"bad --phases value {args.phases!r}") from None
            if args.out:
                cfg.out = args.out
            if args.seed is not None:
                cfg.seed = args.seed
            if args.workers is not None:
                cfg.workers = args.workers
            if args.compaction:
                cfg.compaction = True
            return run_pipeline(cfg)
        if args.command == "report":
            report(args.out)
            return EXIT_OK
        if args.command == "generate":
            return _cmd_generate(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except data.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        logger.exception("pipeline failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
