import numpy as np
import pytest

from rulescope.data import (
    CONTINUOUS,
    DISCRETE,
    Dataset,
    FeatureDescriptor,
    generate_univariate,
    generate_xor,
)
from rulescope.relief import FeatureWeights, multisurf, normalize_weights

from oracles import brute_multisurf


def random_mixed_dataset(rng, n=30, p=8, missing_rate=0.05):
    """Random dataset mixing discrete and continuous features, with missing cells."""
    kinds = [DISCRETE if rng.random() < 0.5 else CONTINUOUS for _ in range(p)]
    X = np.empty((n, p))
    features = []
    for j, kind in enumerate(kinds):
        if kind == DISCRETE:
            vals = rng.integers(0, 3, size=n).astype(float)
            X[:, j] = vals
            features.append(FeatureDescriptor(f"f{j}", DISCRETE, (0.0, 1.0, 2.0)))
        else:
            vals = rng.uniform(-2.0, 5.0, size=n)
            X[:, j] = vals
            features.append(
                FeatureDescriptor(f"f{j}", CONTINUOUS, (float(vals.min()), float(vals.max())))
            )
    holes = rng.random((n, p)) < missing_rate
    X[holes] = np.nan
    y = rng.integers(0, 2, size=n)
    y[0], y[1] = 0, 1  # force both classes
    return Dataset(features, X, y, ["0", "1"], [str(i) for i in range(n)])


def oracle_scores(ds):
    X = [[None if np.isnan(v) else float(v) for v in row] for row in ds.X]
    is_cont = [f.kind == CONTINUOUS for f in ds.features]
    ranges = [f.value_range for f in ds.features]
    return brute_multisurf(X, ds.y.tolist(), is_cont, ranges, len(ds.class_names))


class TestMultisurfOracle:
    def test_matches_brute_force_on_random_data(self):
        rng = np.random.default_rng(77)
        for _ in range(10):
            ds = random_mixed_dataset(rng)
            got = multisurf(ds, None, seed=0).scores
            want = oracle_scores(ds)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_xor_top_two(self):
        ds = generate_xor(20, 2, 1600, 0.0, seed=10)
        scores = multisurf(ds, None, seed=0).scores
        top2 = set(np.argsort(-scores)[:2].tolist())
        assert top2 == {0, 1}

    def test_univariate_top_feature(self):
        ds = generate_univariate(20, 800, 1.0, seed=11)
        scores = multisurf(ds, None, seed=0).scores
        assert int(np.argmax(scores)) == 0


class TestMultisurfProperties:
    def test_constant_feature_scores_zero(self):
        rng = np.random.default_rng(1)
        ds = random_mixed_dataset(rng, missing_rate=0.0)
        X = ds.X.copy()
        X[:, 3] = 1.0
        feats = list(ds.features)
        feats[3] = FeatureDescriptor("f3", DISCRETE, (1.0,))
        ds2 = Dataset(feats, X, ds.y, ds.class_names, ds.instance_ids)
        scores = multisurf(ds2, None, seed=0).scores
        assert scores[3] == 0.0

    def test_instance_permutation_invariant(self):
        rng = np.random.default_rng(2)
        ds = random_mixed_dataset(rng, missing_rate=0.0)
        perm = rng.permutation(ds.n_instances)
        ds2 = Dataset(
            ds.features,
            ds.X[perm],
            ds.y[perm],
            ds.class_names,
            [ds.instance_ids[i] for i in perm],
        )
        a = multisurf(ds, None, seed=0).scores
        b = multisurf(ds2, None, seed=0).scores
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_added_constant_feature_leaves_others_unchanged(self):
        rng = np.random.default_rng(3)
        ds = random_mixed_dataset(rng, missing_rate=0.0)
        base = multisurf(ds, None, seed=0).scores
        X = np.hstack([ds.X, np.full((ds.n_instances, 1), 2.0)])
        feats = list(ds.features) + [FeatureDescriptor("const", DISCRETE, (2.0,))]
        ds2 = Dataset(feats, X, ds.y, ds.class_names, ds.instance_ids)
        grown = multisurf(ds2, None, seed=0).scores
        np.testing.assert_allclose(grown[:-1], base, atol=1e-9)
        assert grown[-1] == 0.0

    def test_shuffled_labels_sanity(self):
        # With labels shuffled, the truly predictive feature should win top
        # rank about as often as any of the 8 features, i.e. rarely.
        ds = generate_univariate(8, 60, 1.0, seed=12)
        tops = 0
        for rep in range(20):
            rng = np.random.default_rng(1000 + rep)
            y = ds.y.copy()
            rng.shuffle(y)
            if len(set(y.tolist())) < 2:
                continue
            shuffled = Dataset(ds.features, ds.X, y, ds.class_names, ds.instance_ids)
            scores = multisurf(shuffled, None, seed=0).scores
            tops += int(np.argmax(scores) == 0)
        assert tops <= 5

    def test_subsample_draws_without_replacement(self):
        ds = generate_univariate(8, 200, 1.0, seed=13)
        w_full = multisurf(ds, None, seed=0)
        w_sub = multisurf(ds, 50, seed=0)
        assert w_sub.scores.shape == w_full.scores.shape
        assert int(np.argmax(w_sub.scores)) == 0

    def test_single_class_fatal(self):
        ds = generate_univariate(5, 50, 1.0, seed=14)
        y = np.zeros(ds.n_instances, dtype=np.int64)
        with pytest.raises(Exception):
            bad = Dataset(ds.features, ds.X, y, ds.class_names, ds.instance_ids)
            multisurf(bad, None, seed=0)


class TestNormalizeWeights:
    def test_minmax_then_sum(self):
        w = normalize_weights(FeatureWeights(["a", "b", "c"], np.array([-1.0, 0.0, 3.0])))
        np.testing.assert_allclose(w.normalized, [0.0, 0.2, 0.8], atol=1e-12)

    def test_all_equal_uniform(self):
        w = normalize_weights(FeatureWeights(["a", "b", "c", "d"], np.full(4, 0.7)))
        np.testing.assert_allclose(w.normalized, [0.25] * 4, atol=1e-12)

    def test_sums_to_one(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            scores = rng.normal(size=rng.integers(2, 30))
            w = normalize_weights(FeatureWeights([f"f{i}" for i in range(len(scores))], scores))
            assert abs(float(w.normalized.sum()) - 1.0) < 1e-9
            assert (w.normalized >= 0).all()
