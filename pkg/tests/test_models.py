import json

import numpy as np
import pandas as pd
import pytest

from firerisk import models


class TestUndersample:
    def test_counts(self):
        y = np.array([0] * 10 + [1, 2, 3])
        kept = y[models.undersample(y, models.UndersamplePolicy(0.5, 0))]
        assert (kept > 0).sum() == 3
        assert (kept == 0).sum() == 5

    def test_all_positives_kept(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            y = rng.integers(0, 5, size=int(rng.integers(5, 200)))
            p = float(rng.choice(models.UNDERSAMPLE_GRID))
            policy = models.UndersamplePolicy(p, int(rng.integers(1e6)))
            kept = y[models.undersample(y, policy)]
            assert (kept > 0).sum() == (y > 0).sum()

    def test_ceil_rounding(self):
        y = np.array([0, 0, 0, 1])
        kept = y[models.undersample(y, models.UndersamplePolicy(0.5, 0))]
        assert (kept == 0).sum() == 2  # ceil(0.5 * 3)

    def test_deterministic_given_seed(self):
        y = np.array([0, 0, 0, 0, 1, 0, 2, 0])
        a = models.undersample(y, models.UndersamplePolicy(0.25, 9))
        b = models.undersample(y, models.UndersamplePolicy(0.25, 9))
        np.testing.assert_array_equal(a, b)

    def test_indices_sorted(self):
        y = np.array([0] * 20 + [1] * 3)
        idx = models.undersample(y, models.UndersamplePolicy(0.3, 2))
        assert np.all(np.diff(idx) > 0)

    def test_full_ratio_keeps_everything(self):
        y = np.array([0, 1, 0, 2, 0])
        idx = models.undersample(y, models.UndersamplePolicy(1.0, 0))
        np.testing.assert_array_equal(idx, np.arange(5))

    def test_off_grid_ratio_rejected(self):
        with pytest.raises(models.ModelError):
            models.UndersamplePolicy(0.33, 0)


class TestLogisticRegression:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(12, 4))
        onehot = np.eye(5)[rng.integers(0, 5, size=12)]
        w = rng.normal(scale=0.1, size=(5, 5))
        _, grad = models.ce_loss_and_grad(w, x, onehot, l2=1e-3)
        eps = 1e-6
        for _ in range(30):
            i, j = rng.integers(0, 5), rng.integers(0, 5)
            wp = w.copy(); wp[i, j] += eps
            wm = w.copy(); wm[i, j] -= eps
            lp, _ = models.ce_loss_and_grad(wp, x, onehot, l2=1e-3)
            lm, _ = models.ce_loss_and_grad(wm, x, onehot, l2=1e-3)
            num = (lp - lm) / (2 * eps)
            assert grad[i, j] == pytest.approx(num, rel=1e-4, abs=1e-7)

    def test_zero_weights_give_uniform_scores(self):
        model = models.MultinomialLogistic(np.zeros((4, 5)))
        scores = model.predict_scores(np.ones((3, 3)))
        np.testing.assert_allclose(scores, 0.2)

    def test_scores_sum_to_one(self):
        rng = np.random.default_rng(4)
        model = models.MultinomialLogistic(rng.normal(size=(6, 5)))
        scores = model.predict_scores(rng.normal(size=(20, 5)))
        np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-12)

    def test_learns_separable_problem(self):
        rng = np.random.default_rng(5)
        centers = np.array([[-4.0, 0.0], [0.0, 4.0], [4.0, 0.0]])
        x = np.vstack([c + rng.normal(scale=0.3, size=(40, 2)) for c in centers])
        y = np.repeat([0, 1, 2], 40)
        model = models.fit_multinomial_logistic(
            x, y, lr=0.5, epochs=300, l2=1e-4, classes=3)
        assert (model.predict(x) == y).mean() > 0.95

    def test_training_lowers_loss(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(60, 3))
        y = rng.integers(0, 3, size=60)
        onehot = np.eye(3)[y]
        m1 = models.fit_multinomial_logistic(x, y, lr=0.1, epochs=1,
                                             l2=0.0, classes=3, seed=0)
        m2 = models.fit_multinomial_logistic(x, y, lr=0.1, epochs=100,
                                             l2=0.0, classes=3, seed=0)
        l1, _ = models.ce_loss_and_grad(m1.weights, x, onehot, l2=0.0)
        l2_, _ = models.ce_loss_and_grad(m2.weights, x, onehot, l2=0.0)
        assert l2_ < l1

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_reports_epoch(self):
        x = np.array([[1.0], [-1.0]])
        y = np.array([0, 1])
        with pytest.raises(models.ModelError, match="epoch"):
            models.fit_multinomial_logistic(x, y, lr=1e3, l2=1.0,
                                            epochs=500, classes=2)


class TestSweep:
    def test_grid_is_exact(self):
        assert len(models.UNDERSAMPLE_GRID) == 20
        np.testing.assert_allclose(models.UNDERSAMPLE_GRID,
                                   np.arange(1, 21) * 0.05)

    def test_tie_breaks_to_smallest_ratio(self):
        def fit(x, y, seed):
            class M:
                def predict(self, xx):
                    return np.zeros(len(xx), int)
            return M()
        x = np.zeros((40, 2)); y = np.zeros(40, int); y[:4] = 1
        vx = np.zeros((10, 2)); vy = np.zeros(10, int)
        p, _, results = models.sweep_undersample(x, y, vx, vy, fit, seed=0)
        assert p == pytest.approx(0.05)
        assert len(results) == 20

    def test_finds_constructed_optimum(self):
        # rig the learner so validation IoU peaks at proportion 0.35
        vy = np.ones(8, int)
        def fit(x, y, seed):
            p_hat = (len(y) - 5) / 100.0
            class M:
                def predict(self, xx):
                    good = abs(p_hat - 0.35) < 1e-9
                    return vy if good else np.zeros(len(xx), int)
            return M()
        x = np.zeros((105, 2)); y = np.zeros(105, int); y[:5] = 1
        p, model, results = models.sweep_undersample(
            x, y, np.zeros((8, 2)), vy, fit, seed=0)
        assert p == pytest.approx(0.35)
        assert results[0.35] == pytest.approx(1.0)
        assert results[0.05] == pytest.approx(0.0)

    def test_each_ratio_trains_on_its_own_subsample(self):
        sizes = []
        def fit(x, y, seed):
            sizes.append(len(y))
            class M:
                def predict(self, xx):
                    return np.zeros(len(xx), int)
            return M()
        y = np.zeros(100, int); y[:5] = 1
        x = np.zeros((100, 1))
        models.sweep_undersample(x, y, x, y, fit, seed=7)
        # ceil(p * 95) zeros + 5 positives at each grid point
        want = [int(np.ceil(p * 95)) + 5 for p in models.UNDERSAMPLE_GRID]
        assert sizes == want


class TestFwiClassifier:
    def test_threshold_counting(self):
        values = np.array([0.0, 5.0, 12.0, 20.0, 31.0])
        got = models.fwi_classifier(values)
        np.testing.assert_array_equal(got, [0, 0, 2, 2, 4])

    def test_boundaries_are_strict(self):
        cuts = models.FwiThresholds((1.0, 2.0, 3.0, 4.0))
        got = models.fwi_classifier(np.array([1.0, 1.0 + 1e-9]), cuts)
        np.testing.assert_array_equal(got, [0, 1])

    def test_scalar_input(self):
        assert models.fwi_classifier(25.0) == 3

    def test_thresholds_must_increase(self):
        with pytest.raises(models.ModelError):
            models.FwiThresholds((5.0, 5.0, 20.0, 30.0))


class TestIngestPredictions:
    @staticmethod
    def frame(**overrides):
        base = {
            "model": ["m", "m"],
            "target": ["fo", "fo"],
            "department": ["D01", "D01"],
            "date": ["2022-01-01", "2022-01-02"],
        }
        scores = np.array([[0.2, 0.2, 0.2, 0.2, 0.2],
                           [0.5, 0.3, 0.1, 0.05, 0.05]])
        for i in range(5):
            base[f"s{i}"] = scores[:, i]
        base.update(overrides)
        return pd.DataFrame(base)

    def write(self, tmp_path, frame):
        path = tmp_path / "preds.csv"
        frame.to_csv(path, index=False)
        return path

    def test_happy_path_argmax(self, tmp_path):
        out = models.ingest_predictions(self.write(tmp_path, self.frame()))
        assert out["pred"].tolist() == [0, 0]

    def test_binary_schema(self, tmp_path):
        f = pd.DataFrame({
            "model": ["m"], "target": ["fo"], "department": ["D01"],
            "date": ["2022-01-01"], "p": [0.7],
        })
        out = models.ingest_predictions(self.write(tmp_path, f))
        assert out["pred"].tolist() == [1]

    def test_rejects_bad_row_sum(self, tmp_path):
        f = self.frame()
        f.loc[0, "s0"] = 0.9
        with pytest.raises(models.ModelError, match="sum"):
            models.ingest_predictions(self.write(tmp_path, f))

    def test_rejects_negative_scores(self, tmp_path):
        f = self.frame()
        f.loc[0, "s0"] = -0.1
        f.loc[0, "s1"] = 0.5
        with pytest.raises(models.ModelError, match="negative"):
            models.ingest_predictions(self.write(tmp_path, f))

    def test_rejects_duplicate_keys(self, tmp_path):
        f = self.frame(date=["2022-01-01", "2022-01-01"])
        with pytest.raises(models.ModelError, match="duplicate"):
            models.ingest_predictions(self.write(tmp_path, f))

    def test_rejects_unknown_department(self, tmp_path):
        truth = pd.DataFrame({
            "department": ["D99", "D99"],
            "date": ["2022-01-01", "2022-01-02"],
            "label": [0, 0],
        })
        with pytest.raises(models.ModelError, match="department"):
            models.ingest_predictions(self.write(tmp_path, self.frame()),
                                      truth_frame=truth)

    def test_rejects_missing_coverage(self, tmp_path):
        truth = pd.DataFrame({
            "department": ["D01"] * 3,
            "date": ["2022-01-01", "2022-01-02", "2022-01-03"],
            "label": [0, 0, 0],
        })
        with pytest.raises(models.ModelError, match="miss"):
            models.ingest_predictions(self.write(tmp_path, self.frame()),
                                      truth_frame=truth)

    def test_row_sum_within_tolerance_accepted(self, tmp_path):
        f = self.frame()
        f.loc[0, "s0"] = 0.2 + 5e-7
        models.ingest_predictions(self.write(tmp_path, f))


class TestWindows:
    @staticmethod
    def export(tmp_path, n_rows, window, n_features=2, seed=0):
        rng = np.random.default_rng(seed)
        feats = rng.normal(size=(n_rows, n_features)).astype(np.float32)
        labels = rng.integers(0, 5, size=n_rows)
        deps = ["D01"] * n_rows
        dates = [f"2022-01-{d + 1:02d}" for d in range(n_rows)]
        path = tmp_path / "w.bin"
        counts = models.export_windows(feats, labels, deps, dates, path,
                                       window=window)
        return counts, feats, labels, path

    def test_window_counts(self, tmp_path):
        (n, skipped), *_ = self.export(tmp_path, 10, window=10)
        assert (n, skipped) == (1, 9)
        (n, skipped), *_ = self.export(tmp_path, 12, window=10)
        assert (n, skipped) == (3, 9)

    def test_round_trip_and_causality(self, tmp_path):
        _, feats, labels, path = self.export(tmp_path, 15, window=4, n_features=3)
        header, payload = models.read_windows(path)
        assert header["window"] == 4
        assert payload.shape == (12, 4, 3)
        # window k ends at row k+3 and holds rows k..k+3, never later ones
        for k in range(12):
            np.testing.assert_array_equal(payload[k], feats[k:k + 4])
            assert header["rows"][k]["label"] == labels[k + 3]

    def test_departments_do_not_mix(self, tmp_path):
        feats = np.arange(12, dtype=np.float32).reshape(6, 2)
        labels = np.zeros(6, int)
        deps = ["D01"] * 3 + ["D02"] * 3
        dates = ["2022-01-01", "2022-01-02", "2022-01-03"] * 2
        path = tmp_path / "w.bin"
        n, skipped = models.export_windows(feats, labels, deps, dates, path,
                                           window=3)
        assert (n, skipped) == (2, 4)
        _, payload = models.read_windows(path)
        np.testing.assert_array_equal(payload[0], feats[0:3])
        np.testing.assert_array_equal(payload[1], feats[3:6])

    def test_header_is_json_line(self, tmp_path):
        *_, path = self.export(tmp_path, 5, window=2)
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
        assert header["shape"][0] == 4

    def test_empty_output_round_trips(self, tmp_path):
        (n, skipped), _, _, path = self.export(tmp_path, 3, window=10)
        assert (n, skipped) == (0, 3)
        _, payload = models.read_windows(path)
        assert payload.shape == (0, 10, 2)


class TestUniformRandomPredictor:
    def test_value_range(self):
        preds = models.uniform_random_predictor(500, seed=0)
        assert preds.min() >= 0 and preds.max() <= 4
        assert len(np.unique(preds)) == 5

    def test_seed_determinism(self):
        a = models.uniform_random_predictor(20, seed=3)
        b = models.uniform_random_predictor(20, seed=3)
        np.testing.assert_array_equal(a, b)
