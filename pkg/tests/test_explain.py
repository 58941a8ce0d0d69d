import numpy as np
import pytest
from pytest import approx

from speechscore.corpus import FeatureMatrix
from speechscore.explain import (DegenerateCover, brute_force_shap,
                                 gain_importance, pdp, shap_base_value,
                                 shap_summary, tree_shap)
from speechscore.learners import TreeEnsembleModel, fit_gbt, fit_single_tree
from speechscore.trees import Tree, TreeParams


def manual_tree(feature, threshold, left_value, right_value,
                cover=(10.0, 5.0, 5.0)):
    """Single split: x[feature] <= threshold -> left_value else right_value."""
    return Tree(feature=np.array([feature, -1, -1]),
                threshold=np.array([threshold, 0.0, 0.0]),
                left=np.array([1, -1, -1]), right=np.array([2, -1, -1]),
                cover=np.array(cover, dtype=float),
                gain=np.array([1.0, 0.0, 0.0]),
                value=np.array([0.0, left_value, right_value]))


def leaf_tree(value, cover=8.0):
    return Tree(feature=np.array([-1]), threshold=np.array([0.0]),
                left=np.array([-1]), right=np.array([-1]),
                cover=np.array([cover]), gain=np.array([0.0]),
                value=np.array([value], dtype=float))


def wrap(trees, names, kind="single_tree", base=0.0, lr=1.0):
    return TreeEnsembleModel(kind=kind, task="regression", trees=trees,
                             base_score=base, learning_rate=lr,
                             feature_names=names)


def random_tree(rng, n_features, max_depth=3):
    feature, threshold, left, right, cover, gain, value = [], [], [], [], [], [], []

    def grow(depth, cov):
        idx = len(feature)
        for arr in (feature, threshold, left, right, cover, gain, value):
            arr.append(0)
        feature[idx], left[idx], right[idx] = -1, -1, -1
        threshold[idx] = 0.0
        cover[idx] = cov
        gain[idx] = 0.0
        value[idx] = 0.0
        if depth >= max_depth or (depth > 0 and rng.random() < 0.3):
            value[idx] = float(rng.normal())
            return idx
        feature[idx] = int(rng.integers(0, n_features))
        threshold[idx] = float(rng.uniform(-1, 1))
        gain[idx] = float(rng.uniform(0, 1))
        frac = rng.uniform(0.2, 0.8)
        left[idx] = grow(depth + 1, cov * frac)
        right[idx] = grow(depth + 1, cov * (1 - frac))
        return idx

    grow(0, float(rng.uniform(10, 100)))
    return Tree(feature=np.array(feature), threshold=np.array(threshold),
                left=np.array(left), right=np.array(right),
                cover=np.array(cover, dtype=float),
                gain=np.array(gain, dtype=float),
                value=np.array(value, dtype=float))


class TestGainImportance:
    def test_single_feature_tree(self):
        model = wrap([manual_tree(3, 0.0, -1.0, 1.0)],
                     [f"f{i}" for i in range(5)])
        ranking = gain_importance(model)
        assert ranking.entries[0] == ("f3", 1.0)
        assert sum(v for _, v in ranking.entries) == approx(1.0)

    def test_leaf_only_flagged(self):
        model = wrap([leaf_tree(2.0)], ["f0"])
        ranking = gain_importance(model)
        assert ranking.entries == []
        assert "importance_no_splits" in ranking.flags

    def test_additive_symmetry(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(500, 2))
        y = X[:, 0] + X[:, 1]
        model = fit_gbt(X, y, n_stages=30, params=TreeParams(max_depth=2),
                        feature_names=["a", "b"])
        ranking = dict(gain_importance(model).entries)
        assert abs(ranking["a"] - ranking["b"]) < 0.1

    def test_split_count_method(self):
        model = wrap([manual_tree(1, 0.0, 0.0, 1.0)], ["x", "y"])
        ranking = gain_importance(model, method="split_count")
        assert ranking.entries[0] == ("y", 1.0)


class TestPdp:
    def _background(self, values, columns):
        values = np.asarray(values, dtype=float)
        return FeatureMatrix(response_ids=[f"r{i}" for i in range(len(values))],
                             columns=columns, groups=["FF"] * len(columns),
                             values=values)

    def test_constant_model_flat(self):
        model = wrap([leaf_tree(3.0)], ["x0"])
        bg = self._background(np.linspace(0, 1, 30).reshape(-1, 1), ["x0"])
        curve = pdp(model, bg, "x0")
        assert np.allclose(curve.mean_prediction, 3.0)

    def test_additive_identity(self):
        class Additive:
            def predict_value(self, X):
                return X[:, 0] + X[:, 1]

        rng = np.random.default_rng(1)
        bg = self._background(rng.uniform(-2, 2, size=(200, 2)), ["a", "b"])
        curve = pdp(Additive(), bg, "a", n_grid=15)
        expected = curve.grid + bg.values[:, 1].mean()
        assert np.max(np.abs(curve.mean_prediction - expected)) < 1e-9

    def test_step_curve(self):
        model = wrap([manual_tree(0, 0.0, 0.0, 1.0)], ["x0"])
        bg = self._background(np.linspace(-1, 1, 101).reshape(-1, 1), ["x0"])
        curve = pdp(model, bg, "x0", n_grid=20)
        low = curve.mean_prediction[curve.grid <= 0.0]
        high = curve.mean_prediction[curve.grid > 0.0]
        assert np.allclose(low, 0.0) and np.allclose(high, 1.0)

    def test_constant_feature_flagged(self):
        model = wrap([leaf_tree(1.0)], ["x0"])
        bg = self._background(np.full((10, 1), 2.5), ["x0"])
        curve = pdp(model, bg, "x0")
        assert curve.grid.size == 1
        assert "pdp_constant_feature" in curve.flags

    def test_grid_percentile_clipping(self):
        model = wrap([leaf_tree(0.0)], ["x0"])
        col = np.concatenate([[1e6], np.linspace(0, 1, 199)])
        bg = self._background(col.reshape(-1, 1), ["x0"])
        curve = pdp(model, bg, "x0", n_grid=10)
        assert curve.grid[-1] < 1e5    # the outlier is clipped away


class TestTreeShap:
    def test_single_split_two_player(self):
        a, b = -2.0, 4.0
        model = wrap([manual_tree(0, 0.0, a, b, cover=(10.0, 5.0, 5.0))],
                     ["x0", "x1"])
        phi, base = tree_shap(model, np.array([1.0, 9.9]))
        assert base == approx((a + b) / 2)
        assert phi[0] == approx((b - a) / 2)
        assert phi[1] == 0.0

    def test_leaf_only(self):
        model = wrap([leaf_tree(5.5)], ["x0"])
        phi, base = tree_shap(model, np.array([0.3]))
        assert phi[0] == 0.0
        assert base == approx(5.5)

    def test_matches_brute_force_on_deep_tree(self):
        rng = np.random.default_rng(42)
        tree = random_tree(rng, 6, max_depth=3)
        model = wrap([tree], [f"f{i}" for i in range(6)])
        x = rng.uniform(-1, 1, 6)
        phi, _ = tree_shap(model, x)
        assert np.max(np.abs(phi - brute_force_shap(model, x))) < 1e-9

    def test_local_accuracy_random(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            p = int(rng.integers(1, 7))
            model = wrap([random_tree(rng, p)], [f"f{i}" for i in range(p)])
            x = rng.uniform(-1, 1, p)
            phi, base = tree_shap(model, x)
            pred = float(model.trees[0].predict(x[None, :])[0])
            assert base + phi.sum() == approx(pred, abs=1e-9)

    def test_degenerate_cover(self):
        tree = manual_tree(0, 0.0, 1.0, 2.0, cover=(0.0, 0.0, 0.0))
        model = wrap([tree], ["x0"])
        with pytest.raises(DegenerateCover):
            tree_shap(model, np.array([1.0]))

    def test_gbt_scaling_and_local_accuracy(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-2, 2, size=(150, 3))
        y = X[:, 0] + np.sin(X[:, 1])
        model = fit_gbt(X, y, n_stages=20, learning_rate=0.2,
                        params=TreeParams(max_depth=3))
        preds = model.predict(X)
        for i in range(0, 150, 10):
            phi, base = tree_shap(model, X[i])
            assert base + phi.sum() == approx(preds[i], abs=1e-6)

    def test_classifier_needs_class_index(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 2))
        y = (X[:, 0] > 0).astype(float)
        model = fit_gbt(X, y, n_stages=4, task="classification")
        with pytest.raises(ValueError):
            tree_shap(model, X[0])
        phi, base = tree_shap(model, X[0], class_index=1)
        margin = model.decision_scores(X[:1])[0, 1]
        assert base + phi.sum() == approx(margin, abs=1e-6)


class TestBruteForce:
    def test_single_feature_efficiency(self):
        model = wrap([manual_tree(0, 0.5, 1.0, 3.0, cover=(9.0, 3.0, 6.0))],
                     ["only"])
        x = np.array([0.2])
        phi = brute_force_shap(model, x)
        base = shap_base_value(model)
        pred = float(model.trees[0].predict(x[None, :])[0])
        assert phi[0] == approx(pred - base, abs=1e-12)

    def test_symmetric_duplicate_features(self):
        # two features with identical split structure get equal phi
        t1 = manual_tree(0, 0.0, 0.0, 1.0)
        t2 = manual_tree(1, 0.0, 0.0, 1.0)
        model = TreeEnsembleModel(kind="forest", task="regression",
                                  trees=[t1, t2], base_score=0.0,
                                  learning_rate=1.0, feature_names=["a", "b"])
        phi = brute_force_shap(model, np.array([1.0, 1.0]))
        assert phi[0] == approx(phi[1], abs=1e-12)

    def test_refuses_many_features(self):
        model = wrap([leaf_tree(0.0)], [f"f{i}" for i in range(13)])
        with pytest.raises(ValueError):
            brute_force_shap(model, np.zeros(13))

    def test_randomized_oracle_equivalence(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(250):
            p = int(rng.integers(1, 9))
            model = wrap([random_tree(rng, p)], [f"f{i}" for i in range(p)])
            x = rng.uniform(-1, 1, p)
            phi, _ = tree_shap(model, x)
            worst = max(worst, float(np.max(np.abs(phi - brute_force_shap(model, x)))))
        assert worst < 1e-9


class TestDummyAxiom:
    def test_unused_feature_zero(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-1, 1, size=(200, 4))
        y = X[:, 0] * 2 + X[:, 2]
        # feature 3 is pure noise duplicated from nothing: forbid splits on it
        model = fit_gbt(X[:, :3], y, n_stages=15, params=TreeParams(max_depth=2),
                        feature_names=["a", "b", "c"])
        model.feature_names = ["a", "b", "c", "dummy"]
        for i in range(0, 200, 25):
            phi, _ = tree_shap(model, np.append(X[i, :3], 99.0))
            assert phi[3] == 0.0


class TestShapSummary:
    def test_single_feature_ranked_first(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(-1, 1, size=(80, 3))
        y = 3 * X[:, 1]
        model = fit_gbt(X, y, n_stages=10, params=TreeParams(max_depth=2),
                        feature_names=["a", "b", "c"])
        summary = shap_summary(model, X)
        assert summary.ranking[0][0] == "b"
        assert summary.phi.shape == (80, 3)

    def test_constant_model_ties_by_name(self):
        model = wrap([leaf_tree(1.0)], ["zeta", "alpha"])
        summary = shap_summary(model, np.zeros((5, 2)))
        assert [n for n, _ in summary.ranking] == ["alpha", "zeta"]
        assert np.all(summary.phi == 0.0)

    def test_monotone_model_sign_pattern(self):
        # increasing feature: phi sign tracks the feature value
        rng = np.random.default_rng(6)
        X = rng.uniform(-1, 1, size=(300, 2))
        y = X[:, 0]
        model = fit_gbt(X, y, n_stages=30, params=TreeParams(max_depth=2),
                        feature_names=["inc", "noise"])
        summary = shap_summary(model, X)
        values = X[:, 0]
        phi = summary.phi[:, 0]
        rho = np.corrcoef(np.argsort(np.argsort(values)),
                          np.argsort(np.argsort(phi)))[0, 1]
        assert rho > 0.9

    def test_local_accuracy_matrix(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(-1, 1, size=(40, 3))
        y = X[:, 0] - 2 * X[:, 2]
        model = fit_gbt(X, y, n_stages=12, params=TreeParams(max_depth=3))
        summary = shap_summary(model, X)
        preds = model.predict(X)
        recon = summary.base_value + summary.phi.sum(axis=1)
        assert np.max(np.abs(recon - preds)) < 1e-6
