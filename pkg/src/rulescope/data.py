"""Dataset model, CSV ingestion, stratified cross-validation, and synthetic benchmarks.

Instances are stored as a float64 matrix with NaN marking missing cells.
Discrete string categories are encoded as integer codes (the descriptor keeps
the category list for decoding); numeric values are stored as-is.  Class
labels are integer codes into ``class_names``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

DISCRETE = "discrete"
CONTINUOUS = "continuous"


class DataError(ValueError):
    """Raised for malformed input data or invalid partition requests."""


@dataclass(frozen=True)
class FeatureDescriptor:
    """Typed description of a single feature column.

    ``domain`` holds the sorted observed values for discrete features and the
    (min, max) pair for continuous ones.  ``categories`` is set only for
    non-numeric discrete columns, in which case matrix cells hold the index
    into it.
    """

    name: str
    kind: str
    domain: tuple
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise DataError(f"unknown feature kind {self.kind!r}")
        if self.kind == CONTINUOUS:
            lo, hi = self.domain
            if not lo <= hi:
                raise DataError(f"feature {self.name}: range min {lo} > max {hi}")
        elif not self.domain:
            raise DataError(f"feature {self.name}: empty discrete value set")

    @property
    def value_range(self) -> float:
        """Width of the observed domain; discrete features count as width 1."""
        if self.kind == CONTINUOUS:
            lo, hi = self.domain
            return float(hi - lo)
        return 1.0

    @property
    def n_states(self) -> int:
        """Observed state count (continuous features count as 2 states)."""
        return len(self.domain) if self.kind == DISCRETE else 2

    def decode(self, value: float) -> str:
        """Render an encoded cell back to its original textual value."""
        if math.isnan(value):
            return ""
        if self.categories is not None:
            return self.categories[int(value)]
        if float(value).is_integer():
            return str(int(value))
        return repr(float(value))


@dataclass
class Dataset:
    """Instance-by-feature table with class labels and optional true subgroups."""

    features: list[FeatureDescriptor]
    X: np.ndarray
    y: np.ndarray
    class_names: list[str]
    instance_ids: list[str]
    true_subgroups: list[str] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        m, p = self.X.shape
        if p != len(self.features):
            raise DataError(f"matrix has {p} columns but {len(self.features)} descriptors")
        if len(self.y) != m or len(self.instance_ids) != m:
            raise DataError("row count mismatch between matrix, labels, and ids")
        if len(set(self.instance_ids)) != m:
            raise DataError("duplicate instance ids")
        if len(set(self.y.tolist())) < 2:
            raise DataError("dataset must contain at least 2 distinct class labels")
        if self.true_subgroups is not None and len(self.true_subgroups) != m:
            raise DataError("true_subgroups must cover every instance")

    @property
    def n_instances(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def label_of(self, row: int) -> str:
        return self.class_names[self.y[row]]

    def subset(self, ids: list[str]) -> "Dataset":
        """Row subset in the given id order; descriptors and class codes are shared."""
        pos = {iid: i for i, iid in enumerate(self.instance_ids)}
        try:
            rows = [pos[i] for i in ids]
        except KeyError as exc:
            raise DataError(f"unknown instance id {exc.args[0]!r}") from None
        sub_true = [self.true_subgroups[r] for r in rows] if self.true_subgroups else None
        return Dataset(
            features=self.features,
            X=self.X[rows],
            y=self.y[rows],
            class_names=self.class_names,
            instance_ids=list(ids),
            true_subgroups=sub_true,
        )


@dataclass(frozen=True)
class CvSplit:
    """One cross-validation fold: disjoint train/test id sets."""

    fold_index: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def _fmt_cell(value: float, desc: FeatureDescriptor) -> str:
    return desc.decode(value)


def save_dataset(ds: Dataset, path) -> None:
    """Write a dataset as CSV (InstanceID, features..., Class[, TrueSubgroup])."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["InstanceID"] + ds.feature_names + ["Class"]
        if ds.true_subgroups is not None:
            header.append("TrueSubgroup")
        writer.writerow(header)
        for i in range(ds.n_instances):
            row = [ds.instance_ids[i]]
            row += [_fmt_cell(ds.X[i, j], ds.features[j]) for j in range(ds.n_features)]
            row.append(ds.class_names[ds.y[i]])
            if ds.true_subgroups is not None:
                row.append(ds.true_subgroups[i])
            writer.writerow(row)


def load_dataset(
    path,
    class_column: str,
    id_column: str | None = None,
    true_cluster_column: str | None = None,
    discrete_limit: int = 10,
    missing_values: tuple[str, ...] = ("", "NA"),
) -> Dataset:
    """Load a CSV with a header row into a typed Dataset.

    Columns are typed continuous when numeric with more than ``discrete_limit``
    unique non-missing values; non-numeric columns are always discrete.  A
    column mixing numeric and non-numeric values is rejected with a
    row/column report.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    if class_column not in header:
        raise DataError(f"{path}: class column {class_column!r} not in header")
    special = {class_column}
    if id_column is not None:
        if id_column not in header:
            raise DataError(f"{path}: id column {id_column!r} not in header")
        special.add(id_column)
    if true_cluster_column is not None:
        if true_cluster_column not in header:
            raise DataError(f"{path}: true-cluster column {true_cluster_column!r} not in header")
        special.add(true_cluster_column)

    width = len(header)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {r + 2} has {len(row)} cells, expected {width}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    col_idx = {name: j for j, name in enumerate(header)}
    missing = set(missing_values)

    class_labels = [row[col_idx[class_column]] for row in rows]
    if any(v in missing for v in class_labels):
        raise DataError(f"{path}: missing value in class column")
    class_names = sorted(set(class_labels))
    class_code = {c: k for k, c in enumerate(class_names)}
    y = np.array([class_code[v] for v in class_labels], dtype=np.int64)

    if id_column is not None:
        ids = [row[col_idx[id_column]] for row in rows]
        if len(set(ids)) != len(ids):
            raise DataError(f"{path}: duplicate ids in column {id_column!r}")
    else:
        ids = [str(i) for i in range(len(rows))]

    true_subgroups = None
    if true_cluster_column is not None:
        true_subgroups = [row[col_idx[true_cluster_column]] for row in rows]

    feature_cols = [name for name in header if name not in special]
    m = len(rows)
    X = np.full((m, len(feature_cols)), np.nan)
    features = []
    for j, name in enumerate(feature_cols):
        raw = [row[col_idx[name]] for row in rows]
        parsed: list[float | None] = []
        numeric = True
        bad_row = -1
        for r, cell in enumerate(raw):
            if cell in missing:
                parsed.append(None)
                continue
            try:
                parsed.append(float(cell))
            except ValueError:
                numeric = False
                bad_row = r
                break
        present = [c for c in raw if c not in missing]
        if not present:
            raise DataError(f"{path}: column {name!r} has no observed values")
        if numeric:
            values = sorted({v for v in parsed if v is not None})
            if len(values) <= discrete_limit:
                desc = FeatureDescriptor(name, DISCRETE, tuple(values))
            else:
                desc = FeatureDescriptor(name, CONTINUOUS, (values[0], values[-1]))
            for r, v in enumerate(parsed):
                if v is not None:
                    X[r, j] = v
        else:
            # Non-numeric: demand the whole column be categorical.
            cats = sorted(set(present))
            for r, cell in enumerate(raw):
                if cell in missing:
                    continue
                try:
                    float(cell)
                except ValueError:
                    continue
                raise DataError(
                    f"{path}: column {name!r} mixes numeric and non-numeric values "
                    f"(first non-numeric at row {bad_row + 2}, numeric at row {r + 2})"
                )
            code = {c: k for k, c in enumerate(cats)}
            for r, cell in enumerate(raw):
                if cell not in missing:
                    X[r, j] = code[cell]
            desc = FeatureDescriptor(name, DISCRETE, tuple(range(len(cats))), tuple(cats))
        features.append(desc)

    return Dataset(features, X, y, class_names, ids, true_subgroups)


def cv_partition(ds: Dataset, n: int, seed: int) -> list[CvSplit]:
    """Stratified n-fold partition, deterministic for a fixed seed."""
    if n < 2:
        raise DataError(f"need at least 2 folds, got {n}")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, c in enumerate(ds.y.tolist()):
        by_class.setdefault(c, []).append(i)
    for c, members in sorted(by_class.items()):
        if len(members) < n:
            raise DataError(
                f"class {ds.class_names[c]!r} has {len(members)} instances, fewer than {n} folds"
            )
    # Deal each class evenly; class remainders go to the lightest folds so
    # fold totals stay as equal as possible.
    test_rows: list[list[int]] = [[] for _ in range(n)]
    for c, members in sorted(by_class.items()):
        order = rng.permutation(len(members))
        shuffled = [members[k] for k in order]
        base, extra = divmod(len(shuffled), n)
        lightest = sorted(range(n), key=lambda f: (len(test_rows[f]), f))
        take = 0
        for rank, f in enumerate(lightest):
            count = base + (1 if rank < extra else 0)
            test_rows[f].extend(shuffled[take : take + count])
            take += count
    splits = []
    all_ids = ds.instance_ids
    for f in range(n):
        test = sorted(test_rows[f])
        test_set = set(test)
        train = [i for i in range(ds.n_instances) if i not in test_set]
        splits.append(
            CvSplit(
                fold_index=f,
                train_ids=tuple(all_ids[i] for i in train),
                test_ids=tuple(all_ids[i] for i in test),
            )
        )
    return splits


# ---------------------------------------------------------------------------
# Synthetic benchmark generators
# ---------------------------------------------------------------------------


def mux_class(bits, a: int) -> int:
    """Multiplexer output: the register bit selected by the address bits.

    The first address bit is the most significant, so address value
    v = sum(bits[i] << (a-1-i)) and the output is bits[a + v].
    """
    bits = list(bits)
    if len(bits) != a + (1 << a):
        raise DataError(f"expected {a + (1 << a)} bits for a={a}, got {len(bits)}")
    v = 0
    for i in range(a):
        v = (v << 1) | int(bits[i])
    return int(bits[a + v])


def generate_mux(address_bits: int, n_instances: int, seed: int) -> Dataset:
    """Uniform random multiplexer dataset with true subgroups by address value."""
    a = address_bits
    if a < 1:
        raise DataError("address_bits must be >= 1")
    if a > 20:
        raise DataError(f"address_bits={a} would require {1 << a} register features")
    if n_instances < 1:
        raise DataError("n_instances must be >= 1")
    rng = np.random.default_rng(seed)
    p = a + (1 << a)
    X = rng.integers(0, 2, size=(n_instances, p)).astype(np.float64)
    weights = 1 << np.arange(a - 1, -1, -1)
    addr = (X[:, :a].astype(np.int64) * weights).sum(axis=1)
    y = X[np.arange(n_instances), a + addr].astype(np.int64)
    names = [f"A{i}" for i in range(a)] + [f"R{r}" for r in range(1 << a)]
    features = [FeatureDescriptor(nm, DISCRETE, (0.0, 1.0)) for nm in names]
    return Dataset(
        features,
        X,
        y,
        ["0", "1"],
        [str(i) for i in range(n_instances)],
        true_subgroups=[str(int(v)) for v in addr],
    )


def _noise_names(n: int, start: int = 0) -> list[str]:
    return [f"N{i}" for i in range(start, start + n)]


def generate_xor(
    n_features: int,
    n_interacting: int,
    n_instances: int,
    label_noise: float,
    seed: int,
) -> Dataset:
    """Parity (XOR) dataset over 2 or 3 interacting binary features.

    The class is the parity of the interacting features, independently
    flipped with probability ``label_noise``; the best achievable accuracy is
    therefore 1 - label_noise.
    """
    if n_interacting not in (2, 3):
        raise DataError(f"n_interacting must be 2 or 3, got {n_interacting}")
    if not n_interacting < n_features:
        raise DataError("n_features must exceed n_interacting")
    if not 0 <= label_noise < 0.5:
        raise DataError("label_noise must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n_instances, n_features)).astype(np.float64)
    parity = X[:, :n_interacting].astype(np.int64).sum(axis=1) % 2
    flips = rng.random(n_instances) < label_noise
    y = np.where(flips, 1 - parity, parity)
    names = [f"M{i}P{i + 1}" for i in range(n_interacting)]
    names += _noise_names(n_features - n_interacting)
    features = [FeatureDescriptor(nm, DISCRETE, (0.0, 1.0)) for nm in names]
    return Dataset(features, X, y, ["0", "1"], [str(i) for i in range(n_instances)])


def generate_univariate(
    n_features: int,
    n_instances: int,
    penetrance_gap: float,
    seed: int,
) -> Dataset:
    """Single predictive binary feature M0P1 plus uniform binary noise features.

    P(class=1 | M0P1=1) = 0.5 + gap/2 and P(class=1 | M0P1=0) = 0.5 - gap/2,
    so the best achievable accuracy is 0.5 + gap/2.
    """
    if not 0 < penetrance_gap <= 1:
        raise DataError("penetrance_gap must lie in (0, 1]")
    if n_features < 1:
        raise DataError("n_features must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n_instances, n_features)).astype(np.float64)
    p1 = 0.5 + penetrance_gap / 2.0
    p0 = 0.5 - penetrance_gap / 2.0
    prob = np.where(X[:, 0] == 1.0, p1, p0)
    y = (rng.random(n_instances) < prob).astype(np.int64)
    names = ["M0P1"] + _noise_names(n_features - 1)
    features = [FeatureDescriptor(nm, DISCRETE, (0.0, 1.0)) for nm in names]
    return Dataset(features, X, y, ["0", "1"], [str(i) for i in range(n_instances)])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def generate_heterogeneous(
    subgenerators: list[tuple[dict, float]],
    n_instances: int,
    seed: int,
    n_features: int = 20,
) -> Dataset:
    """Concatenate subgroup blocks, each following its own generating model.

    Every subgroup shares one feature schema: the union of all model features
    (named M<model>P<k> with a running k) plus shared noise features.  Within
    a subgroup only its own model features carry signal; all other features
    are uniform random, so instances consistent with several models can occur.

    Supported model specs:
      {"kind": "univariate", "penetrance_gap": g}
      {"kind": "xor", "n_interacting": 2 or 3, "label_noise": x}
    """
    if not subgenerators:
        raise DataError("need at least one subgenerator")
    total = sum(prop for _, prop in subgenerators)
    if abs(total - 1.0) > 1e-9:
        raise DataError(f"proportions must sum to 1, got {total}")

    model_cols: list[list[int]] = []
    names: list[str] = []
    counter = 1
    for k, (spec, _) in enumerate(subgenerators):
        kind = spec.get("kind")
        if kind == "univariate":
            width = 1
        elif kind == "xor":
            width = int(spec.get("n_interacting", 2))
            if width not in (2, 3):
                raise DataError(f"subgenerator {k}: n_interacting must be 2 or 3")
        else:
            raise DataError(f"subgenerator {k}: unknown kind {kind!r}")
        cols = []
        for _ in range(width):
            cols.append(len(names))
            names.append(f"M{k}P{counter}")
            counter += 1
        model_cols.append(cols)
    n_model = len(names)
    if n_features < n_model + 1:
        raise DataError(
            f"n_features={n_features} too small for {n_model} model features plus noise"
        )
    names += _noise_names(n_features - n_model)

    sizes = [_round_half_up(prop * n_instances) for _, prop in subgenerators]
    sizes[0] += n_instances - sum(sizes)
    if min(sizes) < 1:
        raise DataError("a subgroup proportion rounds to zero instances")

    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n_instances, n_features)).astype(np.float64)
    y = np.zeros(n_instances, dtype=np.int64)
    subgroup = []
    row = 0
    for k, ((spec, _), size) in enumerate(zip(subgenerators, sizes)):
        block = slice(row, row + size)
        cols = model_cols[k]
        if spec["kind"] == "univariate":
            gap = float(spec["penetrance_gap"])
            if not 0 < gap <= 1:
                raise DataError(f"subgenerator {k}: penetrance_gap must lie in (0, 1]")
            vals = X[block, cols[0]]
            prob = np.where(vals == 1.0, 0.5 + gap / 2.0, 0.5 - gap / 2.0)
            y[block] = (rng.random(size) < prob).astype(np.int64)
        else:
            noise = float(spec.get("label_noise", 0.0))
            if not 0 <= noise < 0.5:
                raise DataError(f"subgenerator {k}: label_noise must lie in [0, 0.5)")
            parity = X[block][:, cols].astype(np.int64).sum(axis=1) % 2
            flips = rng.random(size) < noise
            y[block] = np.where(flips, 1 - parity, parity)
        subgroup.extend([str(k)] * size)
        row += size

    features = [FeatureDescriptor(nm, DISCRETE, (0.0, 1.0)) for nm in names]
    return Dataset(
        features,
        X,
        y,
        ["0", "1"],
        [str(i) for i in range(n_instances)],
        true_subgroups=subgroup,
    )
