import numpy as np
import pytest

from rulescope.data import (
    CONTINUOUS,
    DISCRETE,
    Dataset,
    FeatureDescriptor,
    cv_partition,
    generate_mux,
)
from rulescope.lcs import (
    Hyperparams,
    ModelFormatError,
    Rule,
    balanced_accuracy,
    compact,
    compute_rsl,
    cover,
    delete,
    fit,
    ft_update,
    load_model,
    matches,
    predict,
    predict_batch,
    run_ga,
    save_model,
    subsumes,
)
from rulescope.relief import FeatureWeights, multisurf, normalize_weights


def binary_features(names):
    return [FeatureDescriptor(n, DISCRETE, (0.0, 1.0)) for n in names]


def small_dataset(n=60, p=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, p)).astype(float)
    y = X[:, 0].astype(np.int64)
    return Dataset(binary_features([f"f{i}" for i in range(p)]), X, y,
                   ["0", "1"], [str(i) for i in range(n)])


def uniform_ek(p):
    return normalize_weights(FeatureWeights([f"f{i}" for i in range(p)], np.zeros(p)))


class TestComputeRsl:
    def test_binary_20_features(self):
        ds = small_dataset(n=50, p=20)
        assert compute_rsl(ds, 2000) == 11

    def test_cap_at_feature_count(self):
        ds = small_dataset(n=50, p=3)
        assert compute_rsl(ds, 1000) == 3

    def test_override(self):
        ds = small_dataset(n=50, p=20)
        m = fit(ds, Hyperparams(iterations=50, N=50, rsl_override=4, seed=1), uniform_ek(20))
        assert m.rsl == 4


class TestMatches:
    def test_discrete_hit(self):
        r = Rule(condition={0: 1.0}, klass=1)
        assert matches(r, np.array([1.0, 0.0]))

    def test_interval_miss(self):
        r = Rule(condition={1: (0.2, 0.6)}, klass=0)
        assert not matches(r, np.array([0.0, 0.7]))

    def test_missing_satisfies(self):
        r = Rule(condition={0: 1.0}, klass=1)
        assert matches(r, np.array([np.nan, 0.0]))


class TestCover:
    def test_covered_rule_matches_and_classifies_seed(self):
        rng = np.random.default_rng(5)
        ds = small_dataset(p=6)
        ek = uniform_ek(6).normalized
        for i in range(20):
            rule = cover(ds.X[i], int(ds.y[i]), ek, None, rsl=4, rng=rng,
                         features=ds.features, iteration=3)
            assert matches(rule, ds.X[i])
            assert rule.klass == ds.y[i]
            assert rule.numerosity == 1
            assert (rule.match_count, rule.correct_count) == (1, 1)

    def test_specified_count_bounded(self):
        rng = np.random.default_rng(6)
        ds = small_dataset(p=8)
        ek = uniform_ek(8).normalized
        for _ in range(10_000):
            rule = cover(ds.X[0], 1, ek, None, rsl=5, rng=rng, features=ds.features)
            assert 1 <= len(rule.condition) <= 5

    def test_continuous_cover_brackets_value(self):
        feats = [FeatureDescriptor("c0", CONTINUOUS, (0.0, 10.0))] + binary_features(["f1"])
        rng = np.random.default_rng(7)
        x = np.array([4.2, 1.0])
        for _ in range(50):
            rule = cover(x, 0, np.array([0.5, 0.5]), None, rsl=2, rng=rng, features=feats)
            if 0 in rule.condition:
                lo, hi = rule.condition[0]
                assert lo <= 4.2 <= hi
                assert 1.0 <= hi - lo <= 10.0  # half-width within [0.1, 0.5] of range


class TestFtUpdate:
    def test_single_step(self):
        row = np.array([0.5])
        rules = [Rule(condition={0: 1.0}, klass=1, fitness=1.0, numerosity=1)]
        out = ft_update(row, rules, beta=0.1)
        assert abs(out[0] - 0.55) < 1e-15

    def test_unspecified_feature_untouched(self):
        row = np.array([0.3, 0.9])
        rules = [Rule(condition={0: 1.0}, klass=1, fitness=0.5, numerosity=2)]
        out = ft_update(row, rules, beta=0.1)
        assert out[1] == 0.9
        assert out[0] > 0.3

    def test_closed_form_recursion(self):
        row = np.array([0.0])
        rules = [Rule(condition={0: 1.0}, klass=1, fitness=1.0, numerosity=1)]
        for k in range(1, 101):
            row = ft_update(row, rules, beta=0.1)
            assert abs(row[0] - (1.0 - 0.9**k)) < 1e-12

    def test_zero_fitness_correct_set_no_update(self):
        row = np.array([0.4])
        rules = [Rule(condition={0: 1.0}, klass=1, fitness=0.0, numerosity=3)]
        out = ft_update(row, rules, beta=0.1)
        assert out[0] == 0.4

    def test_empty_correct_set(self):
        row = np.array([0.4])
        assert ft_update(row, [], beta=0.1)[0] == 0.4


class TestSubsumes:
    def general(self, **kw):
        base = dict(condition={0: 1.0}, klass=1, match_count=50, accuracy=1.0, fitness=1.0)
        base.update(kw)
        return Rule(**base)

    def test_strict_subset_subsumed(self):
        g = self.general()
        s = Rule(condition={0: 1.0, 2: 0.0}, klass=1)
        assert subsumes(g, s)

    def test_different_class(self):
        g = self.general()
        s = Rule(condition={0: 1.0, 2: 0.0}, klass=0)
        assert not subsumes(g, s)

    def test_low_accuracy_blocks(self):
        g = self.general(accuracy=0.9)
        s = Rule(condition={0: 1.0, 2: 0.0}, klass=1)
        assert not subsumes(g, s)

    def test_inexperienced_blocks(self):
        g = self.general(match_count=5)
        s = Rule(condition={0: 1.0, 2: 0.0}, klass=1)
        assert not subsumes(g, s)

    def test_wider_interval_subsumes_equal_condition(self):
        g = Rule(condition={0: (0.0, 1.0)}, klass=1, match_count=50, accuracy=1.0)
        s = Rule(condition={0: (0.2, 0.8)}, klass=1)
        assert subsumes(g, s)
        assert not subsumes(s, g)

    def test_identical_condition_not_subsumed(self):
        g = self.general()
        s = Rule(condition={0: 1.0}, klass=1)
        assert not subsumes(g, s)


class TestDelete:
    def rules(self, sizes):
        return [
            Rule(condition={0: 1.0}, klass=0, numerosity=n, avg_match_set_size=1.0,
                 match_count=1, accuracy=1.0, fitness=1.0)
            for n in sizes
        ]

    def test_noop_when_under_cap(self):
        pop = self.rules([3, 4])
        out = delete(pop, 10, np.random.default_rng(0))
        assert sum(r.numerosity for r in out) == 7

    def test_trims_to_cap(self):
        rng = np.random.default_rng(1)
        out = delete(self.rules([5, 9, 4]), 12, rng)
        assert sum(r.numerosity for r in out) == 12

    def test_single_overfull_rule(self):
        out = delete(self.rules([13]), 10, np.random.default_rng(2))
        assert len(out) == 1 and out[0].numerosity == 10


class TestPredict:
    def test_single_matching_rule(self):
        ds = small_dataset()
        m = _model(ds, [Rule(condition={0: 1.0}, klass=1, fitness=0.5, numerosity=1)])
        klass, votes = predict(m, np.array([1.0, 0, 0, 0]))
        assert klass == 1

    def test_empty_match_set_majority(self):
        ds = small_dataset()
        m = _model(ds, [Rule(condition={0: 1.0}, klass=1, fitness=0.5)])
        klass, votes = predict(m, np.array([0.0, 0, 0, 0]))
        assert klass == m.majority_class
        assert votes == {}

    def test_vote_argmax(self):
        ds = small_dataset()
        m = _model(ds, [
            Rule(condition={0: 1.0}, klass=0, fitness=1.0, numerosity=2),
            Rule(condition={1: 0.0}, klass=1, fitness=1.0, numerosity=4),
        ])
        klass, votes = predict(m, np.array([1.0, 0, 0, 0]))
        assert votes == {0: 2.0, 1: 4.0}
        assert klass == 1

    def test_exact_tie_majority(self):
        ds = small_dataset()
        m = _model(ds, [
            Rule(condition={0: 1.0}, klass=0, fitness=1.0, numerosity=2),
            Rule(condition={1: 0.0}, klass=1, fitness=1.0, numerosity=2),
        ])
        klass, _ = predict(m, np.array([1.0, 0, 0, 0]))
        assert klass == m.majority_class

    def test_batch_agrees_with_scalar(self):
        ds = small_dataset(n=80, p=4, seed=3)
        ek = normalize_weights(multisurf(ds, None, seed=0))
        m = fit(ds, Hyperparams(iterations=2000, N=100, nu=10, seed=4), ek)
        batch = predict_batch(m, ds.X)
        for i in range(ds.n_instances):
            assert batch[i] == predict(m, ds.X[i])[0]


def _model(ds, rules):
    from rulescope.lcs import FeatureTrackingMatrix, Model

    counts = np.bincount(ds.y)
    return Model(
        population=rules,
        ft=FeatureTrackingMatrix(ds.instance_ids, np.zeros_like(ds.X)),
        hyperparams=Hyperparams(),
        features=ds.features,
        class_names=ds.class_names,
        majority_class=int(np.argmax(counts)),
        rsl=ds.n_features,
    )


class TestBalancedAccuracy:
    def test_all_correct(self):
        assert balanced_accuracy([0, 1, 0], [0, 1, 0]) == 1.0

    def test_majority_on_imbalanced(self):
        truth = [0] * 80 + [1] * 20
        assert balanced_accuracy([0] * 100, truth) == 0.5

    def test_mean_of_recalls(self):
        truth = [0] * 10 + [1] * 10
        preds = [0] * 9 + [1] + [1] * 7 + [0] * 3
        assert abs(balanced_accuracy(preds, truth) - 0.8) < 1e-12

    def test_unknown_prediction_fatal(self):
        with pytest.raises(ValueError, match="absent"):
            balanced_accuracy([0, 2], [0, 1])


class TestRunGa:
    def setup_method(self):
        self.ds = small_dataset(p=4)
        self.hp = Hyperparams(chi=0.0, mu=0.0, theta_sub=20, acc_sub=0.99)
        self.ek = uniform_ek(4).normalized

    def test_degenerate_parameters_do_not_grow_macro(self):
        parent = Rule(condition={0: 1.0}, klass=1, fitness=1.0, accuracy=1.0,
                      match_count=50, numerosity=1)
        pop = [parent]
        rng = np.random.default_rng(0)
        out = run_ga([parent], pop, self.ds.X[0], self.ek, None, self.hp, 10, rng,
                     self.ds.features, rsl=3)
        assert len(out) == 1
        assert out[0].numerosity == 3  # both offspring absorbed

    def test_offspring_identical_to_other_rule_absorbed(self):
        a = Rule(condition={0: 1.0}, klass=1, fitness=1.0, accuracy=1.0, numerosity=1)
        pop = [a]
        rng = np.random.default_rng(1)
        out = run_ga([a], pop, self.ds.X[0], self.ek, None, self.hp, 5, rng,
                     self.ds.features, rsl=3)
        assert len(out) == 1 and out[0].numerosity == 3

    def test_repair_respects_rsl_over_many_events(self):
        # 5000 GA calls produce 10^4 offspring; none may exceed the limit
        hp = Hyperparams(chi=1.0, mu=0.5)
        rng = np.random.default_rng(2)
        x = self.ds.X[0]
        a = Rule(condition={0: x[0], 1: x[1]}, klass=1, fitness=1.0)
        b = Rule(condition={2: x[2], 3: x[3]}, klass=1, fitness=0.9)
        for _ in range(5000):
            out = run_ga([a, b], [a, b], x, self.ek, None, hp, 5, rng,
                         self.ds.features, rsl=3)
            for r in out:
                assert 1 <= len(r.condition) <= 3

    def test_parents_timestamp_updated(self):
        parent = Rule(condition={0: 1.0}, klass=1, fitness=1.0, ga_timestamp=0)
        run_ga([parent], [parent], self.ds.X[0], self.ek, None, self.hp, 42,
               np.random.default_rng(3), self.ds.features, rsl=3)
        assert parent.ga_timestamp == 42


class TestFit:
    def test_deterministic(self):
        ds = small_dataset(n=100, p=5, seed=9)
        ek = normalize_weights(multisurf(ds, None, seed=0))
        hp = Hyperparams(iterations=3000, N=200, nu=10, seed=17)
        m1 = fit(ds, hp, ek)
        m2 = fit(ds, Hyperparams(iterations=3000, N=200, nu=10, seed=17), ek)
        assert [r.key() for r in m1.population] == [r.key() for r in m2.population]
        assert [r.numerosity for r in m1.population] == [r.numerosity for r in m2.population]
        np.testing.assert_array_equal(m1.ft.matrix, m2.ft.matrix)

    def test_invariants_after_fit(self):
        ds = small_dataset(n=100, p=5, seed=10)
        ek = normalize_weights(multisurf(ds, None, seed=0))
        m = fit(ds, Hyperparams(iterations=4000, N=150, nu=10, seed=3), ek)
        micro = sum(r.numerosity for r in m.population)
        assert micro <= 150
        for r in m.population:
            assert r.correct_count <= r.match_count
            assert 0.0 <= r.accuracy <= 1.0
            assert r.fitness == r.accuracy**10
        assert np.isfinite(m.ft.matrix).all()
        assert (m.ft.matrix >= 0.0).all()
        assert (m.ft.matrix <= 1.0 + 1e-12).all()

    def test_learning_curve_on_mux(self):
        ds = generate_mux(2, 500, seed=21)
        splits = cv_partition(ds, 10, seed=21)
        train = ds.subset(list(splits[0].train_ids))
        ek = normalize_weights(multisurf(train, None, seed=0))
        m = fit(train, Hyperparams(iterations=20000, N=500, nu=10, seed=2), ek)
        accs = [a for _, a in m.training_log]
        assert accs[-1] - accs[0] >= 0.3
        peak = accs[0]
        for a in accs[1:]:
            assert a >= peak - 0.1  # windowed noise allowance
            peak = max(peak, a)

    def test_single_class_fatal(self):
        ds = small_dataset()
        with pytest.raises(Exception):
            bad = Dataset(ds.features, ds.X, np.zeros(len(ds.y), dtype=np.int64),
                          ds.class_names, ds.instance_ids)
            fit(bad, Hyperparams(iterations=10, N=10), uniform_ek(4))


class TestCompact:
    def test_perfect_rule_kept(self):
        ds = small_dataset(n=40, p=4, seed=2)
        perfect0 = Rule(condition={0: 0.0}, klass=0, accuracy=1.0, fitness=1.0,
                        match_count=100, correct_count=100, numerosity=5)
        perfect1 = Rule(condition={0: 1.0}, klass=1, accuracy=1.0, fitness=1.0,
                        match_count=100, correct_count=100, numerosity=5)
        out = compact([perfect0, perfect1], ds)
        assert len(out) == 2

    def test_redundant_rule_dropped(self):
        ds = small_dataset(n=40, p=4, seed=2)
        strong = Rule(condition={0: 1.0}, klass=1, accuracy=1.0, fitness=1.0,
                      match_count=100, correct_count=100, numerosity=9)
        shadow = Rule(condition={0: 1.0, 1: 1.0}, klass=1, accuracy=1.0, fitness=1.0,
                      match_count=60, correct_count=60, numerosity=1)
        out = compact([strong, shadow], ds)
        assert [r.key() for r in out] == [strong.key()]

    def test_inexperienced_dropped(self):
        ds = small_dataset(n=40, p=4, seed=2)
        rook = Rule(condition={0: 1.0}, klass=1, accuracy=1.0, match_count=2)
        assert compact([rook], ds) == []

    def test_accuracy_retained_on_mux(self):
        ds = generate_mux(2, 300, seed=30)
        ek = normalize_weights(multisurf(ds, None, seed=0))
        m = fit(ds, Hyperparams(iterations=12000, N=400, nu=10, seed=6), ek)
        before = balanced_accuracy(predict_batch(m, ds.X).tolist(), ds.y.tolist())
        m.population = compact(m.population, ds)
        after = balanced_accuracy(predict_batch(m, ds.X).tolist(), ds.y.tolist())
        assert after >= before - 0.01


class TestSerialization:
    def _trained(self):
        ds = small_dataset(n=60, p=4, seed=8)
        ek = normalize_weights(multisurf(ds, None, seed=0))
        return fit(ds, Hyperparams(iterations=1500, N=80, nu=5, seed=12), ek), ds

    def test_round_trip_bytes(self, tmp_path):
        m, _ = self._trained()
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(m, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_loaded_predicts_identically(self, tmp_path):
        m, ds = self._trained()
        path = tmp_path / "m.json"
        save_model(m, path)
        back = load_model(path)
        np.testing.assert_array_equal(predict_batch(m, ds.X), predict_batch(back, ds.X))

    def test_truncated_file_fatal(self, tmp_path):
        m, _ = self._trained()
        path = tmp_path / "m.json"
        save_model(m, path)
        path.write_bytes(path.read_bytes()[:200])
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_version_mismatch_fatal(self, tmp_path):
        m, _ = self._trained()
        path = tmp_path / "m.json"
        save_model(m, path)
        import json

        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)
