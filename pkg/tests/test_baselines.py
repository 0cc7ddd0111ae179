import math

import numpy as np
import pytest

from oracles import naive_lof
from treeanomaly.baselines import (
    LRD_CAP,
    concentration_steps,
    envelope_fit,
    envelope_run,
    iforest_fit,
    iforest_run,
    lof_fit,
    lof_run,
    path_norm_c,
    top_fraction,
)


def test_path_norm_c_values():
    assert path_norm_c(1) == 0.0
    assert path_norm_c(2) == pytest.approx(2 * 0.5772156649 - 1, abs=1e-12)
    assert round(path_norm_c(2), 4) == 0.1544
    assert path_norm_c(256) == pytest.approx(2 * (math.log(255) + 0.5772156649) - 510 / 256, abs=1e-12)
    assert round(path_norm_c(256), 3) == 10.245
    with pytest.raises(ValueError):
        path_norm_c(0)


class TestIsolationForest:
    def test_identical_points_score_equal(self):
        x = np.full((40, 3), 2.0)
        s = iforest_run(x, x, seed=1)
        assert np.all(s == s[0])

    def test_far_point_scores_highest(self):
        rng = np.random.default_rng(0)
        # 10 sigma out along the diagonal, so every feature can isolate it
        x = np.vstack([rng.normal(size=(500, 3)), [np.full(3, 10 / np.sqrt(3))]])
        s = iforest_run(x, x, seed=3)
        assert np.argmax(s) == 500

    def test_scores_in_open_unit_interval(self):
        for i in range(100):
            rng = np.random.default_rng(i)
            x = rng.normal(size=(rng.integers(2, 80), rng.integers(1, 5))) * rng.uniform(0.01, 100)
            s = iforest_run(x, x, seed=i, n_trees=10)
            assert np.all((s > 0) & (s < 1))

    def test_tree_structure(self):
        x = np.random.default_rng(1).normal(size=(600, 4))
        model = iforest_fit(x, seed=2)
        assert model.subsample == 256 and model.max_depth == 8 and len(model.trees) == 100
        for t in model.trees:
            internal = t.feature >= 0
            assert np.all((t.split[internal] > t.lower[internal]) & (t.split[internal] <= t.upper[internal]))
            assert t.max_depth <= model.max_depth
            # children sizes add up
            assert np.all(t.size[t.left[internal]] + t.size[t.right[internal]] == t.size[internal])

    def test_longer_paths_mean_lower_scores(self):
        x = np.random.default_rng(5).normal(size=(300, 2))
        model = iforest_fit(x, seed=0)
        e = model.expected_path_length(x)
        s = model.score(x)
        order = np.argsort(e)
        assert np.all(np.diff(s[order]) <= 0)

    def test_deterministic(self):
        x = np.random.default_rng(6).normal(size=(200, 3))
        np.testing.assert_array_equal(iforest_run(x, x, 9), iforest_run(x, x, 9))

    def test_empty_train(self):
        with pytest.raises(ValueError):
            iforest_run(np.empty((0, 2)), np.zeros((1, 2)))


class TestLOF:
    def test_grid_interior_is_about_one(self):
        grid = np.arange(40.0)[:, None]
        got = lof_run(grid, grid, k=4)
        np.testing.assert_allclose(got, naive_lof(grid, grid, 4), atol=1e-6)
        assert np.all(np.abs(got[8:-8] - 1.0) < 0.05)

    def test_far_point(self):
        rng = np.random.default_rng(1)
        cluster = rng.uniform(0, 1, size=(50, 2))
        far = np.array([[20 * np.sqrt(2), 0.0]])
        train = np.vstack([cluster, far])
        got = lof_run(train, train, k=10)
        assert got[-1] > 1.5
        np.testing.assert_allclose(got, naive_lof(train, train, 10), rtol=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle_with_ties(self, seed):
        rng = np.random.default_rng(seed)
        # integer lattice points produce many equal distances
        train = rng.integers(0, 6, size=(rng.integers(15, 60), 2)).astype(float)
        test = rng.integers(-2, 8, size=(25, 2)).astype(float)
        k = int(rng.integers(1, 8))
        np.testing.assert_allclose(lof_run(train, test, k), naive_lof(train, test, k), rtol=1e-9)

    def test_duplicates_use_capped_lrd(self):
        train = np.vstack([np.zeros((5, 1)), [[1.0], [2.0]]])
        model = lof_fit(train, k=3)
        assert model.lrd[0] == LRD_CAP
        s = lof_run(train, train, k=3)
        assert np.all(np.isfinite(s))

    def test_k_must_be_below_train_size(self):
        with pytest.raises(ValueError):
            lof_run(np.zeros((5, 1)), np.zeros((1, 1)), k=5)

    def test_agrees_with_scikit_learn(self):
        sk = pytest.importorskip("sklearn.neighbors")
        rng = np.random.default_rng(7)
        train, test = rng.normal(size=(150, 3)), rng.normal(size=(40, 3)) * 2
        ref = sk.LocalOutlierFactor(n_neighbors=20, novelty=True).fit(train)
        np.testing.assert_allclose(lof_run(train, test, 20), -ref.score_samples(test), rtol=1e-9)


def test_top_fraction():
    pred = top_fraction([0.1, 5, 3, 0.2, 9, 1, 1, 2, 2, 0], 0.2)
    np.testing.assert_array_equal(pred, [0, 1, 0, 0, 1, 0, 0, 0, 0, 0])


class TestEnvelope:
    def test_far_point_flagged(self):
        rng = np.random.default_rng(0)
        train = rng.normal(size=(300, 3))
        test = np.vstack([train, [[10.0, 0, 0]]])
        scores, pred = envelope_run(train, test, seed=1)
        assert pred[-1] == 1
        assert np.argmax(scores) == len(test) - 1

    def test_contamination_fraction(self):
        train = np.random.default_rng(2).normal(size=(400, 4))
        model = envelope_fit(train, seed=0)
        flagged = model.predict(train).mean()
        assert 0.05 <= flagged <= 0.15

    def test_needs_more_than_d_plus_one_rows(self):
        with pytest.raises(ValueError):
            envelope_run(np.zeros((3, 2)), np.zeros((1, 2)))

    def test_covariance_is_spd(self):
        model = envelope_fit(np.random.default_rng(3).normal(size=(200, 5)), seed=4)
        np.testing.assert_allclose(model.covariance, model.covariance.T, atol=1e-9)
        assert np.linalg.eigvalsh(model.covariance).min() > 0
        assert model.support.size == math.ceil(0.75 * 200)

    @pytest.mark.parametrize("seed", range(8))
    def test_concentration_never_increases_determinant(self, seed):
        rng = np.random.default_rng(seed)
        x = np.vstack([rng.normal(size=(150, 3)), rng.normal(size=(30, 3)) * 5 + 4])
        start = rng.choice(len(x), size=5, replace=False)
        _, _, _, hist = concentration_steps(x, start, math.ceil(0.75 * len(x)))
        assert np.all(np.diff(hist) <= 1e-10)

    def test_robust_location_ignores_outliers(self):
        rng = np.random.default_rng(4)
        x = np.vstack([rng.normal(size=(180, 2)), rng.normal(size=(20, 2)) + 25])
        model = envelope_fit(x, seed=0)
        assert np.linalg.norm(model.location) < 0.5

    def test_singular_data_raises(self):
        with pytest.raises(ValueError):
            envelope_fit(np.ones((20, 2)), seed=0)
