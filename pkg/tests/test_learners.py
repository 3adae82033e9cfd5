"""Tree-ensemble learners: oracles, determinism, probability contracts."""

import numpy as np
import pytest

from landfuse.learners import (
    GradientBoostedTrees,
    LearnerSpec,
    RandomForest,
    TrainingError,
    grid_search,
    load_model,
    reference_grid,
    resolve_max_attributes,
    save_model,
    stratified_fold_ids,
    train,
    train_one_vs_all,
)
from landfuse.rng import substream


def blobs(rng, n_per_class=200, centers=((0, 0), (5, 0), (0, 5)), sigma=1.0):
    """Gaussian blobs with 5-sigma separation: linearly separable labels."""
    rows = []
    labels = []
    for k, center in enumerate(centers):
        rows.append(rng.normal(center, sigma, (n_per_class, len(center))))
        labels.extend([f"c{k}"] * n_per_class)
    return np.vstack(rows), np.array(labels, dtype=object)


# ---------------------------------------------------------------------------
# independent CART oracle (slow exhaustive split search, same tie rule:
# first feature then first boundary wins)

class NaiveCart:
    def __init__(self, n_classes, min_samples_leaf=1):
        self.n_classes = n_classes
        self.min_leaf = min_samples_leaf

    def fit(self, X, y):
        self.root = self._grow(X, y)
        return self

    def _grow(self, X, y):
        counts = np.bincount(y, minlength=self.n_classes).astype(float)
        n = len(y)
        node = {"value": counts / n}
        if counts.max() == n or n < 2 * self.min_leaf:
            return node
        best = None
        for f in range(X.shape[1]):
            vals = np.unique(X[:, f])
            for lo, hi in zip(vals[:-1], vals[1:]):
                thr = lo + 0.5 * (hi - lo)
                if thr >= hi:
                    thr = lo
                left = X[:, f] <= thr
                nl = int(left.sum())
                nr = n - nl
                if nl < self.min_leaf or nr < self.min_leaf:
                    continue
                cl = np.bincount(y[left], minlength=self.n_classes).astype(float)
                cr = counts - cl
                score = (cl ** 2).sum() / nl + (cr ** 2).sum() / nr
                if best is None or score > best[0]:
                    best = (score, f, thr, left)
        if best is None:
            return node
        score, f, thr, left = best
        if (score - (counts ** 2).sum() / n) / n <= 1e-12:
            return node
        node.update(feature=f, threshold=thr,
                    left=self._grow(X[left], y[left]),
                    right=self._grow(X[~left], y[~left]))
        return node

    def predict_one(self, x):
        node = self.root
        while "feature" in node:
            node = node["left"] if x[node["feature"]] <= node["threshold"] \
                else node["right"]
        return int(np.argmax(node["value"]))

    def predict(self, X):
        return np.array([self.predict_one(x) for x in X])


class TestTrain:
    def test_blobs_training_accuracy(self):
        rng = np.random.default_rng(0)
        X, y = blobs(rng)
        for family in ("random-forest", "gradient-boosted-trees"):
            spec = LearnerSpec(family, {"n_estimators": 20}, seed=1)
            model = train(spec, X, ["f0", "f1"], y)
            assert np.mean(model.predict(X) == y) >= 0.99

    def test_blobs_test_accuracy(self):
        rng = np.random.default_rng(1)
        X, y = blobs(rng, n_per_class=300)
        Xt, yt = blobs(np.random.default_rng(2), n_per_class=100)
        for family in ("random-forest", "gradient-boosted-trees"):
            spec = LearnerSpec(family, {"n_estimators": 20}, seed=1)
            model = train(spec, X, ["f0", "f1"], y)
            assert np.mean(model.predict(Xt) == yt) >= 0.95

    def test_constant_features_give_prior_probabilities(self):
        rng = np.random.default_rng(3)
        X = np.ones((200, 3))
        y = np.array(["maj"] * 180 + ["min"] * 20, dtype=object)
        model = train(LearnerSpec("random-forest", {"n_estimators": 30}, seed=2),
                      X, list("abc"), y)
        probs = model.predict_proba(X[:5])
        maj = model.classes.index("maj")
        assert np.all(model.predict(X[:5]) == "maj")
        assert np.allclose(probs[:, maj], 0.9, atol=0.05)

    def test_single_class_rejected(self):
        X = np.random.default_rng(4).normal(0, 1, (10, 2))
        with pytest.raises(TrainingError, match="single class"):
            train(LearnerSpec("random-forest"), X, ["a", "b"],
                  np.array(["x"] * 10, dtype=object))

    def test_same_seed_identical_predictions(self):
        rng = np.random.default_rng(5)
        X, y = blobs(rng, n_per_class=60)
        Xt = rng.normal(2, 3, (100, 2))
        for family in ("random-forest", "gradient-boosted-trees"):
            spec = LearnerSpec(family, {"n_estimators": 10}, seed=9)
            p1 = train(spec, X, ["a", "b"], y).predict_proba(Xt)
            p2 = train(spec, X, ["a", "b"], y).predict_proba(Xt)
            assert np.array_equal(p1, p2)

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(6)
        X, y = blobs(rng, n_per_class=50)
        Xt = rng.normal(2, 3, (50, 2))
        perm = rng.permutation(len(y))
        for family in ("random-forest", "gradient-boosted-trees"):
            spec = LearnerSpec(family, {"n_estimators": 8}, seed=3)
            p1 = train(spec, X, ["a", "b"], y).predict_proba(Xt)
            p2 = train(spec, X[perm], ["a", "b"], y[perm]).predict_proba(Xt)
            assert np.array_equal(p1, p2)

    def test_unknown_hyperparameter_rejected(self):
        with pytest.raises(TrainingError, match="unknown hyperparameters"):
            train(LearnerSpec("random-forest", {"bogus": 1}),
                  np.zeros((4, 1)), ["a"], np.array(["x", "y", "x", "y"]))


class TestPredictProba:
    def test_simplex_property(self):
        rng = np.random.default_rng(7)
        X, y = blobs(rng, n_per_class=80)
        Xt = rng.normal(1, 4, (1000, 2))
        for family in ("random-forest", "gradient-boosted-trees"):
            model = train(LearnerSpec(family, {"n_estimators": 10}, seed=4),
                          X, ["a", "b"], y)
            probs = model.predict_proba(Xt)
            assert np.all(probs >= 0.0)
            assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_pure_region_probability_one(self):
        rng = np.random.default_rng(8)
        X, y = blobs(rng, centers=((0, 0), (50, 50)), n_per_class=100)
        model = train(LearnerSpec("random-forest", {"n_estimators": 15}, seed=5),
                      X, ["a", "b"], y)
        probs = model.predict_proba(np.array([[0.0, 0.0]]))
        assert probs[0, model.classes.index("c0")] == pytest.approx(1.0)

    def test_schema_mismatch_rejected(self):
        rng = np.random.default_rng(9)
        X, y = blobs(rng, n_per_class=30)
        model = train(LearnerSpec("random-forest", {"n_estimators": 3}, seed=6),
                      X, ["a", "b"], y)
        with pytest.raises(TrainingError):
            model.predict_proba(np.zeros((2, 5)))
        with pytest.raises(TrainingError):
            model.predict_proba(np.zeros((2, 2)), feature_names=["x", "y"])


class TestForestMatchesCartOracle:
    def test_single_tree_reproduces_naive_cart(self):
        rng = np.random.default_rng(10)
        X = rng.normal(0, 2, (150, 4))
        labels = (X[:, 0] + 0.7 * X[:, 2] > 0).astype(int) \
            + (X[:, 1] > 1.0).astype(int)
        y = np.array([f"c{v}" for v in labels], dtype=object)
        spec = LearnerSpec("random-forest",
                           {"n_estimators": 1, "bootstrap": False,
                            "max_attributes": None, "max_depth": None},
                           seed=7)
        model = train(spec, X, list("abcd"), y)
        codes = np.array([model.classes.index(v) for v in y])
        # the oracle sees the same canonicalized row order the model trains on
        order = np.lexsort((codes,) + tuple(X[:, j]
                                            for j in range(X.shape[1] - 1, -1, -1)))
        oracle = NaiveCart(n_classes=len(model.classes)).fit(X[order], codes[order])
        Xt = rng.normal(0, 2, (500, 4))
        mine = np.array([model.classes.index(v) for v in model.predict(Xt)])
        assert np.array_equal(mine, oracle.predict(Xt))


class TestBoosting:
    def test_train_loss_non_increasing(self):
        rng = np.random.default_rng(11)
        X, y = blobs(rng, n_per_class=80)
        spec = LearnerSpec("gradient-boosted-trees",
                           {"n_estimators": 30, "learning_rate": 0.1}, seed=8)
        model = train(spec, X, ["a", "b"], y)
        losses = model.impl.train_loss_
        assert len(losses) == 30
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_binary_loss_non_increasing(self):
        rng = np.random.default_rng(12)
        X, y = blobs(rng, centers=((0, 0), (3, 3)), n_per_class=100)
        model = train(LearnerSpec("gradient-boosted-trees",
                                  {"n_estimators": 25, "learning_rate": 0.2}),
                      X, ["a", "b"], y)
        losses = model.impl.train_loss_
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


class TestMaxAttributes:
    def test_rules(self):
        assert resolve_max_attributes("sqrt", 100) == 10
        assert resolve_max_attributes("log2", 64) == 6
        assert resolve_max_attributes(0.2, 50) == 10
        assert resolve_max_attributes(0.2, 3) == 1   # floor, at least one
        assert resolve_max_attributes(None, 5) is None
        assert resolve_max_attributes(7, 5) == 5

    def test_bad_rules_rejected(self):
        with pytest.raises(TrainingError):
            resolve_max_attributes(1.5, 10)
        with pytest.raises(TrainingError):
            resolve_max_attributes("cubic", 10)


class TestGridSearch:
    def test_single_candidate(self):
        rng = np.random.default_rng(13)
        X, y = blobs(rng, n_per_class=40)
        spec = LearnerSpec("gradient-boosted-trees",
                           grid={"n_estimators": [5]}, cv_folds=3, seed=1)
        result = grid_search(spec, X, ["a", "b"], y)
        assert len(result.scores) == 1
        assert result.best.hyperparams["n_estimators"] == 5

    def test_deep_concept_prefers_deeper_trees(self):
        rng = np.random.default_rng(14)
        X = rng.uniform(0, 1, (400, 3))
        # depth-3 XOR-ish concept: no depth-1 stump can express it
        labels = ((X[:, 0] > 0.5) ^ (X[:, 1] > 0.5) ^ (X[:, 2] > 0.5))
        y = np.where(labels, "pos", "neg").astype(object)
        spec = LearnerSpec("random-forest",
                           {"n_estimators": 12},
                           grid={"max_depth": [1, None]}, cv_folds=4, seed=2)
        result = grid_search(spec, X, list("abc"), y)
        assert result.best.hyperparams["max_depth"] is None
        shallow, deep = result.scores
        assert deep.mean_score > shallow.mean_score

    def test_score_table_is_exhaustive(self):
        rng = np.random.default_rng(15)
        X, y = blobs(rng, n_per_class=30)
        spec = LearnerSpec("gradient-boosted-trees",
                           grid={"n_estimators": [3, 5], "learning_rate": [0.5, 0.1, 0.05]},
                           cv_folds=2, seed=3)
        result = grid_search(spec, X, ["a", "b"], y)
        assert len(result.scores) == 6
        combos = [tuple(s.hyperparams.items()) for s in result.scores]
        assert len(set(combos)) == 6

    def test_class_smaller_than_folds_rejected(self):
        labels = np.array(["a"] * 10 + ["b"] * 3, dtype=object)
        with pytest.raises(TrainingError, match="fewer than"):
            stratified_fold_ids(labels, 5, substream(0, "grid-search"))

    def test_reference_grids_shape(self):
        rf = reference_grid("random-forest")
        assert len(rf["n_estimators"]) == 5
        assert len(rf["max_attributes"]) == 3
        assert len(rf["max_depth"]) == 6
        gbt = reference_grid("gradient-boosted-trees")
        assert len(gbt["n_estimators"]) == 5
        assert len(gbt["learning_rate"]) == 5


class TestOneVsAll:
    def test_one_model_per_class(self):
        rng = np.random.default_rng(16)
        X, y = blobs(rng, n_per_class=40)
        ova = train_one_vs_all(
            LearnerSpec("gradient-boosted-trees", {"n_estimators": 5}),
            X, ["a", "b"], y, classes=["c0", "c1", "c2"])
        assert set(ova.models.keys()) == {"c0", "c1", "c2"}

    def test_pure_region_probabilities(self):
        rng = np.random.default_rng(17)
        X, y = blobs(rng, centers=((0, 0), (40, 0), (0, 40)), n_per_class=80)
        ova = train_one_vs_all(
            LearnerSpec("gradient-boosted-trees", {"n_estimators": 25}),
            X, ["a", "b"], y, classes=["c0", "c1", "c2"])
        probs = ova.prob_per_class(np.array([[0.0, 0.0]]))
        assert probs[0, 0] > 0.9
        assert probs[0, 1] < 0.1 and probs[0, 2] < 0.1

    def test_probabilities_not_normalized_across_classes(self):
        rng = np.random.default_rng(18)
        X, y = blobs(rng, n_per_class=50)
        ova = train_one_vs_all(
            LearnerSpec("gradient-boosted-trees", {"n_estimators": 8}),
            X, ["a", "b"], y, classes=["c0", "c1", "c2"])
        probs = ova.prob_per_class(rng.normal(2, 3, (50, 2)))
        assert np.all(probs >= 0.0) and np.all(probs <= 1.0)
        sums = probs.sum(axis=1)
        assert not np.allclose(sums, 1.0, atol=1e-3)


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(19)
        X, y = blobs(rng, n_per_class=40)
        Xt = rng.normal(1, 3, (100, 2))
        for family in ("random-forest", "gradient-boosted-trees"):
            model = train(LearnerSpec(family, {"n_estimators": 5}, seed=11),
                          X, ["a", "b"], y)
            path = tmp_path / f"{family}.json"
            save_model(model, path)
            loaded = load_model(path)
            assert np.array_equal(model.predict_proba(Xt),
                                  loaded.predict_proba(Xt))
            path2 = tmp_path / f"{family}2.json"
            save_model(loaded, path2)
            assert path.read_bytes() == path2.read_bytes()

    def test_manifest_slice_embedded(self, tmp_path):
        rng = np.random.default_rng(20)
        X, y = blobs(rng, n_per_class=30)
        model = train(LearnerSpec("random-forest", {"n_estimators": 3}),
                      X, ["width", "height"], y)
        path = tmp_path / "m.json"
        save_model(model, path)
        assert load_model(path).feature_names == ("width", "height")
