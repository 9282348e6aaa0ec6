import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_split
from wtdml.errors import DegenerateData, WidthMismatch
from wtdml.gbdt import (SplitParams, TrainConfig, TrainMatrix, build_bins, directions_vector,
                        dumps, find_best_split, fit, gain_importance, grow_tree, load, loads,
                        save, weighted_r2)
from wtdml.gbdt.binning import weighted_quantile_edges


def integer_instance(rng, n, f):
    """Small-integer features and gradients so every sum is exact."""
    X = rng.integers(0, int(rng.integers(2, 12)), size=(n, f)).astype(float)
    g = rng.integers(-20, 21, size=n).astype(float)
    h = rng.integers(1, 4, size=n).astype(float)
    return X, g, h


def run_split(X, g, h, dirs, lam=1.0, mcw=1.0, bounds=(-np.inf, np.inf)):
    mapper, codes = build_bins(X, None, 256)
    s = find_best_split(codes, np.arange(len(g)), g, h, mapper, dirs, bounds,
                        SplitParams(lam, mcw))
    if s is None:
        return None
    return s.feature, mapper.threshold(s.feature, s.bin), s.gain


# --- binning -------------------------------------------------------------------


class TestBinning:
    def test_quantile_edges(self):
        edges = weighted_quantile_edges(np.arange(1.0, 101.0), np.ones(100), 4)
        np.testing.assert_array_equal(edges, [25.0, 50.0, 75.0])

    def test_quantile_edges_match_sort_oracle(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=1000)
        edges = weighted_quantile_edges(v, np.ones(1000), 10)
        s = np.sort(v)
        np.testing.assert_array_equal(edges, [s[100 * k - 1] for k in range(1, 10)])

    def test_constant_feature(self):
        mapper, codes = build_bins(np.full((10, 1), 3.0))
        assert mapper.n_bins(0) == 1 and (codes == 0).all()

    def test_two_values(self):
        mapper, codes = build_bins(np.array([[1.0], [2.0], [1.0]]), n_bins=64)
        assert mapper.n_bins(0) == 2 and codes[:, 0].tolist() == [0, 1, 0]

    def test_missing_bin(self):
        mapper, codes = build_bins(np.array([[1.0], [np.nan], [2.0]]))
        assert codes[1, 0] == mapper.missing_code

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60), st.integers(2, 16))
    def test_codes_respect_edges(self, vals, nb):
        X = np.array(vals)[:, None]
        mapper, codes = build_bins(X, None, nb)
        assert mapper.n_bins(0) <= nb
        e = mapper.edges[0]
        for x, c in zip(X[:, 0], codes[:, 0]):
            assert c < mapper.n_bins(0)
            assert (c == 0 or x > e[c - 1]) and (c == len(e) or x <= e[c])


# --- split search -------------------------------------------------------------


class TestSplit:
    def test_increasing_data_unconstrained_equals_constrained(self):
        x = np.arange(10.0)[:, None]
        g = -(x[:, 0] - x[:, 0].mean())  # y = x with zero prediction
        h = np.ones(10)
        assert run_split(x, g, h, [1]) == run_split(x, g, h, [0])
        assert run_split(x, g, h, [1]) == brute_split(x, g, h, [1], 1.0, 1.0)

    def test_decreasing_data_under_plus_one(self):
        x = np.arange(10.0)[:, None]
        g = x[:, 0] - x[:, 0].mean()  # y = -x
        assert run_split(x, g, np.ones(10), [1]) is None
        assert brute_split(x, g, np.ones(10), [1], 1.0, 1.0) is None

    @pytest.mark.parametrize("seed", range(60))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n, f = int(rng.integers(2, 201)), int(rng.integers(1, 4))
        X, g, h = integer_instance(rng, n, f)
        for dirs in ([0] * f, list(rng.integers(-1, 2, size=f))):
            lam = float(rng.choice([0.0, 1.0, 2.5]))
            got = run_split(X, g, h, dirs, lam, 1.0)
            assert got == brute_split(X, g, h, dirs, lam, 1.0)

    def test_bounds_reject(self):
        x = np.arange(6.0)[:, None]
        g = np.array([3, 3, 3, -3, -3, -3.0])
        h = np.ones(6)
        free = run_split(x, g, h, [0])
        assert free is not None
        # children would be -1.125 and 1.125 with lambda 1 -> outside [-1, 1]
        assert run_split(x, g, h, [0], bounds=(-1.0, 1.0)) is None

    def test_min_child_weight(self):
        x = np.arange(4.0)[:, None]
        g = np.array([5.0, -1, -1, -1])
        assert run_split(x, g, np.ones(4), [0], mcw=2.0)[1] == 1.0

    def test_tie_break_lowest_feature(self):
        x = np.arange(8.0)
        X = np.column_stack([x, x])
        g = np.where(x < 4, 1.0, -1.0)
        assert run_split(X, g, np.ones(8), [0, 0])[0] == 0

    def test_missing_goes_to_heavier_side(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0], [1.0], [np.nan]])
        g = np.array([2.0, 2.0, -1.0, -1.0, -1.0, -1.0])
        mapper, codes = build_bins(X)
        s = find_best_split(codes, np.arange(6), g, np.ones(6), mapper, [0])
        assert not s.default_left
        s = find_best_split(codes, np.arange(6), g, np.ones(6), mapper, [1])
        assert s is None or s.default_left


# --- trees ----------------------------------------------------------------------


class TestTree:
    def test_constant_target_single_leaf(self):
        n, c, lam = 20, 2.5, 1.0
        X = np.random.default_rng(0).random((n, 2))
        mapper, codes = build_bins(X)
        t = grow_tree(codes, mapper, np.full(n, -c), np.ones(n), np.zeros(2, int), 4,
                      SplitParams(lam, 1.0))
        assert t.n_nodes == 1
        assert t.value[0] == pytest.approx(c * n / (n + lam))

    def test_depth_one_separable(self):
        x = np.repeat([0.0, 1.0], 10)[:, None]
        y = np.repeat([1.0, 5.0], 10)
        mapper, codes = build_bins(x)
        t = grow_tree(codes, mapper, -y, np.ones(20), np.array([1]), 1, SplitParams(0.0, 1.0))
        assert t.n_nodes == 3 and t.value[1] == 1.0 and t.value[2] == 5.0

    def test_anti_monotone_single_leaf(self):
        x = np.arange(30.0)[:, None]
        mapper, codes = build_bins(x)
        t = grow_tree(codes, mapper, x[:, 0] - x.mean(), np.ones(30), np.array([1]), 5)
        assert t.n_nodes == 1

    def test_leaves_within_bounds(self):
        rng = np.random.default_rng(4)
        X = rng.random((500, 3))
        y = np.sin(6 * X[:, 0]) + X[:, 1] - X[:, 2] + rng.normal(0, 0.2, 500)
        m = fit(TrainMatrix(X, y, np.ones(500), ("a", "b", "c")),
                TrainConfig(rounds=20, max_depth=5, learning_rate=0.3), [1, 1, -1])
        for t in m.trees:
            assert ((t.value >= t.lower) & (t.value <= t.upper)).all()


# --- boosting ---------------------------------------------------------------------


def synthetic(n, seed, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 3))
    y = 3 * X[:, 0] + rng.normal(0, noise, n)
    return TrainMatrix(X, y, np.ones(n), ("x", "z1", "z2"))


class TestBoosting:
    def test_zero_rounds_weighted_mean(self):
        m = TrainMatrix(np.zeros((3, 1)), [1.0, 2.0, 4.0], [1.0, 1.0, 2.0], ("a",))
        e = fit(m, TrainConfig(rounds=0))
        np.testing.assert_allclose(e.predict(np.zeros((2, 1))), 11.0 / 4.0)

    def test_loss_trace_non_increasing(self):
        m = synthetic(300, 1, noise=0.3)
        e = fit(m, TrainConfig(rounds=40, learning_rate=0.3, max_depth=3))
        losses = [np.mean((e.predict(m.X, k) - m.y) ** 2) for k in range(41)]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_holdout_r2(self):
        tr, te = synthetic(2000, 2), synthetic(1000, 3)
        e = fit(tr, TrainConfig(rounds=200, learning_rate=0.1, max_depth=4))
        assert weighted_r2(te.y, e.predict(te.X)) > 0.95

    def test_batch_equals_loop(self):
        m = synthetic(200, 4)
        e = fit(m, TrainConfig(rounds=15, max_depth=3))
        batch = e.predict(m.X[:25])
        loop = np.array([e.predict(row)[0] for row in m.X[:25]])
        np.testing.assert_array_equal(batch, loop)

    def test_deterministic_with_sampling(self):
        m = synthetic(400, 5)
        cfg = TrainConfig(rounds=20, subsample=0.7, colsample=0.67, seed=9)
        assert dumps(fit(m, cfg)) == dumps(fit(m, cfg))

    def test_width_mismatch(self):
        e = fit(synthetic(50, 6), TrainConfig(rounds=2))
        with pytest.raises(WidthMismatch):
            e.predict(np.zeros((3, 2)))

    def test_degenerate(self):
        with pytest.raises(DegenerateData):
            fit(TrainMatrix(np.zeros((3, 1)), [1, 2, 3], [0, 0, 0], ("a",)))

    def test_directions_vector(self):
        assert directions_vector({"b": -1}, ("a", "b")).tolist() == [0, -1]
        with pytest.raises(ValueError):
            directions_vector({"q": 1}, ("a",))
        with pytest.raises(ValueError):
            directions_vector([2], ("a",))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(subsample=1.5)


class TestMonotone:
    @settings(max_examples=25)
    @given(st.integers(0, 10_000), st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3))
    def test_global_monotonicity(self, seed, dirs):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(300, 3))
        y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 - X[:, 2] + rng.normal(0, 0.3, 300)
        e = fit(TrainMatrix(X, y, np.ones(300), ("a", "b", "c")),
                TrainConfig(rounds=15, max_depth=4, learning_rate=0.3, n_bins=32,
                            subsample=0.8, colsample=0.7, seed=seed), dirs)
        rows = rng.normal(size=(200, 3))
        base = e.predict(rows)
        for j, d in enumerate(dirs):
            if d == 0:
                continue
            up = rows.copy()
            up[:, j] += rng.exponential(1.0, 200)
            diff = e.predict(up) - base
            assert (d * diff >= 0).all()


class TestImportance:
    def test_single_split(self):
        x = np.repeat([0.0, 1.0], 10)
        X = np.column_stack([x, np.zeros(20)])
        e = fit(TrainMatrix(X, x * 4, np.ones(20), ("a", "b")),
                TrainConfig(rounds=1, max_depth=1, learning_rate=1.0))
        assert gain_importance(e) == {"a": 1.0}

    def test_symmetric(self):
        x = np.repeat([0.0, 1.0], 10)
        X = np.column_stack([x, x])
        e = fit(TrainMatrix(X, x * 4, np.ones(20), ("a", "b")),
                TrainConfig(rounds=2, max_depth=1, learning_rate=1.0, colsample=0.5, seed=3))
        e.trees[1].feature[0] = 1 - e.trees[0].feature[0]
        e.trees[1].gain[0] = e.trees[0].gain[0]
        assert gain_importance(e) == {"a": 0.5, "b": 0.5}

    def test_matches_traversal_oracle(self):
        m = synthetic(300, 7)
        e = fit(m, TrainConfig(rounds=10, max_depth=3))
        gains = {n: [] for n in m.feature_names}
        for t in e.trees:
            stack = [0]
            while stack:
                i = stack.pop()
                if t.feature[i] >= 0:
                    gains[m.feature_names[t.feature[i]]].append(t.gain[i])
                    stack += [t.left[i], t.right[i]]
        mean = {k: np.mean(v) for k, v in gains.items() if v}
        total = sum(mean.values())
        imp = gain_importance(e)
        assert set(imp) == set(mean)
        for k in mean:
            assert imp[k] == pytest.approx(mean[k] / total, rel=1e-12)
        assert abs(sum(imp.values()) - 1) <= 1e-9


class TestSerialisation:
    def test_round_trip_bit_exact(self, tmp_path):
        m = synthetic(300, 8)
        m.X[::17, 1] = np.nan
        e = fit(m, TrainConfig(rounds=12, max_depth=4, subsample=0.8), [1, 0, -1])
        save(e, tmp_path / "m.txt")
        back = load(tmp_path / "m.txt")
        np.testing.assert_array_equal(back.predict(m.X), e.predict(m.X))
        assert dumps(back) == dumps(e)
        assert back.config == e.config and back.feature_names == e.feature_names

    def test_rejects_garbage(self):
        from wtdml.errors import DataError

        with pytest.raises(DataError):
            loads("not a model\n")
