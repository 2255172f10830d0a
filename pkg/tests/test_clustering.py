import numpy as np
import pytest

from firerisk import clustering


def dtw_full_matrix(a, b, window=None):
    """Reference dynamic time warping on a full cost matrix."""
    n, m = len(a), len(b)
    if window is None:
        window = max(n, m)
    window = max(window, abs(n - m))
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        lo = max(1, i - window)
        hi = min(m, i + window)
        for j in range(lo, hi + 1):
            cost = (a[i - 1] - b[j - 1]) ** 2
            acc[i, j] = cost + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return acc[n, m]


class TestDtwDistance:
    def test_hand_case(self):
        # [0, 1] vs [1, 2]: best path aligns the shared 1, leaving cost 1 + 1
        d = clustering.dtw_distance(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
        assert d == pytest.approx(2.0)

    def test_identity_is_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.normal(size=rng.integers(1, 30))
            assert clustering.dtw_distance(x, x) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = rng.normal(size=rng.integers(1, 25))
            b = rng.normal(size=rng.integers(1, 25))
            assert clustering.dtw_distance(a, b) == pytest.approx(
                clustering.dtw_distance(b, a), abs=1e-12)

    def test_matches_full_matrix_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            a = rng.normal(size=rng.integers(1, 21))
            b = rng.normal(size=rng.integers(1, 21))
            window = int(rng.integers(0, 25))
            got = clustering.dtw_distance(a, b, window=window)
            want = dtw_full_matrix(a, b, window=window)
            assert got == pytest.approx(want, abs=1e-12)

    def test_band_widening_never_increases_cost(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=30)
        b = rng.normal(size=30)
        costs = [clustering.dtw_distance(a, b, window=w) for w in range(0, 31, 5)]
        assert all(c2 <= c1 + 1e-12 for c1, c2 in zip(costs, costs[1:]))


class TestZnorm:
    def test_zero_mean_unit_std(self):
        x = np.array([1.0, 2.0, 3.0, 10.0])
        z = clustering.znorm(x)
        assert z.mean() == pytest.approx(0.0, abs=1e-12)
        assert z.std() == pytest.approx(1.0)

    def test_constant_series_maps_to_zeros(self):
        z = clustering.znorm(np.full(5, 4.0))
        assert np.all(z == 0.0)


class TestClusterDepartments:
    @staticmethod
    def regimes(n_per, seed=0, length=120):
        rng = np.random.default_rng(seed)
        t = np.arange(length)
        series = {}
        for i in range(n_per):
            series[f"A{i:02d}"] = np.sin(t / 10.0) + rng.normal(scale=0.05, size=length)
            series[f"B{i:02d}"] = np.cos(t / 4.0) + rng.normal(scale=0.05, size=length)
        return series

    def test_recovers_two_regimes(self):
        series = self.regimes(3)
        assign = clustering.cluster_departments(series, k=2, seed=7)
        labels_a = {assign.labels[f"A{i:02d}"] for i in range(3)}
        labels_b = {assign.labels[f"B{i:02d}"] for i in range(3)}
        assert len(labels_a) == 1 and len(labels_b) == 1 and labels_a != labels_b

    def test_k_equals_n_gives_singletons(self):
        series = self.regimes(2)
        assign = clustering.cluster_departments(series, k=4, seed=0)
        assert sorted(assign.labels.values()) == [0, 1, 2, 3]
        assert assign.cost == pytest.approx(0.0, abs=1e-12)

    def test_duplicate_series_share_cluster(self):
        t = np.arange(50, dtype=float)
        series = {"D1": np.sin(t), "D2": np.sin(t), "D3": np.cos(3 * t) + t}
        assign = clustering.cluster_departments(series, k=2, seed=1)
        assert assign.labels["D1"] == assign.labels["D2"]
        assert assign.labels["D3"] != assign.labels["D1"]

    def test_seed_determinism(self):
        series = self.regimes(4, seed=5)
        a = clustering.cluster_departments(series, k=2, seed=3)
        b = clustering.cluster_departments(series, k=2, seed=3)
        assert a.labels == b.labels and a.medoids == b.medoids
        assert a.cost == b.cost

    def test_labels_ordered_by_medoid_id(self):
        series = self.regimes(3, seed=9)
        assign = clustering.cluster_departments(series, k=2, seed=11)
        ordered = sorted(assign.medoids)
        # cluster id i must belong to the i-th medoid in department id order
        for cid, dep in enumerate(ordered):
            assert assign.labels[dep] == cid

    def test_k_larger_than_n_rejected(self):
        series = {"D1": np.arange(5.0)}
        with pytest.raises(ValueError):
            clustering.cluster_departments(series, k=2, seed=0)


class TestPairwiseDtw:
    def test_matrix_properties(self):
        rng = np.random.default_rng(4)
        series = {f"D{i}": rng.normal(size=40) for i in range(4)}
        deps, mat = clustering.pairwise_dtw(series, window=10)
        assert deps == sorted(series)
        assert np.allclose(mat, mat.T)
        assert np.all(np.diag(mat) == 0.0)
        assert np.all(mat >= 0.0)

    def test_distances_use_znormed_series(self):
        # scaling one series must not change its z-normalized distances
        rng = np.random.default_rng(5)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        _, m1 = clustering.pairwise_dtw({"a": x, "b": y}, window=30)
        _, m2 = clustering.pairwise_dtw({"a": 10 * x + 3, "b": y}, window=30)
        assert m1[0, 1] == pytest.approx(m2[0, 1], abs=1e-9)
