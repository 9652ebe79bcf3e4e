import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringadmm.objectives import (
    Dataset,
    LogisticObjective,
    OptimizerError,
    ProxUnsupportedError,
    RidgeObjective,
    centralized_optimum,
    generate_logistic_data,
    generate_ridge_data,
    read_dataset_csv,
    write_dataset_csv,
)


def fd_gradient(obj, x, h=1e-5):
    p = len(x)
    g = np.zeros(p)
    for j in range(p):
        e = np.zeros(p)
        e[j] = h
        g[j] = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
    return g


class TestRidge:
    def test_zero_residual(self):
        obj = RidgeObjective(Dataset(np.array([[1.0, 0.0]]), np.array([0.0])))
        assert obj.value(np.zeros(2)) == 0.0

    def test_unit_residual(self):
        obj = RidgeObjective(Dataset(np.array([[1.0, 0.0]]), np.array([1.0])))
        assert obj.value(np.zeros(2)) == pytest.approx(1.0, abs=0)

    def test_value_matches_naive_sum(self):
        rng = np.random.default_rng(5)
        data = Dataset(rng.uniform(size=(3, 2)), rng.uniform(size=3))
        obj = RidgeObjective(data)
        x = rng.standard_normal(2)
        naive = sum(
            (float(x @ o) - float(t)) ** 2 for o, t in zip(data.features, data.targets)
        ) / 3
        assert obj.value(x) == pytest.approx(naive, abs=1e-12)

    def test_prox_of_zero_function(self):
        # all-zero data: the loss vanishes identically
        obj = RidgeObjective(Dataset(np.zeros((2, 2)), np.zeros(2)))
        z = np.array([1.0, -2.0])
        y = np.array([0.5, 0.25])
        assert np.allclose(obj.prox(z, y, 4.0), z + y / 4.0, atol=1e-14)

    def test_prox_zeroes_prox_objective_gradient(self):
        rng = np.random.default_rng(8)
        obj = RidgeObjective(Dataset(rng.uniform(size=(6, 2)), rng.uniform(size=6)))
        z = np.zeros(2)
        y = np.zeros(2)
        x = obj.prox(z, y, 3.0)
        # stationarity of f(x) + (rho/2)||z - x + y/rho||^2
        grad = obj.gradient(x) + 3.0 * (x - z - y / 3.0)
        assert np.linalg.norm(grad) <= 1e-10

    def test_prox_single_sample_hand_solved(self):
        obj = RidgeObjective(Dataset(np.array([[1.0, 0.0]]), np.array([1.0])))
        x = obj.prox(np.zeros(2), np.zeros(2), 2.0)
        assert np.allclose(x, [0.5, 0.0], atol=1e-14)

    def test_lipschitz_single_sample(self):
        obj = RidgeObjective(Dataset(np.array([[1.0, 0.0]]), np.array([0.0])))
        assert obj.lipschitz_bound() == pytest.approx(2.0, abs=1e-12)

    def test_gradient_finite_difference(self):
        rng = np.random.default_rng(11)
        obj = RidgeObjective(generate_ridge_data(12, 3, seed=4))
        for _ in range(100):
            x = rng.standard_normal(3)
            g = obj.gradient(x)
            rel = np.linalg.norm(fd_gradient(obj, x) - g) / max(np.linalg.norm(g), 1e-12)
            assert rel <= 1e-9


class TestLogistic:
    def test_value_at_zero_is_log_two(self):
        obj = LogisticObjective(generate_logistic_data(50, 2, 1, 2))
        assert obj.value(np.zeros(2)) == pytest.approx(np.log(2.0), rel=1e-12)

    def test_gradient_at_zero_single_sample(self):
        obj = LogisticObjective(Dataset(np.array([[1.0, 0.0]]), np.array([1.0])))
        assert np.allclose(obj.gradient(np.zeros(2)), [-0.5, 0.0], atol=1e-15)

    def test_lipschitz_single_sample(self):
        obj = LogisticObjective(Dataset(np.array([[2.0, 0.0]]), np.array([1.0])))
        assert obj.lipschitz_bound() == pytest.approx(1.0, abs=1e-12)

    def test_gradient_finite_difference(self):
        rng = np.random.default_rng(13)
        obj = LogisticObjective(generate_logistic_data(20, 3, 7, 8))
        for _ in range(100):
            x = rng.standard_normal(3)
            g = obj.gradient(x)
            rel = np.linalg.norm(fd_gradient(obj, x) - g) / max(np.linalg.norm(g), 1e-12)
            assert rel <= 1e-5

    def test_large_margins_stay_finite(self):
        obj = LogisticObjective(Dataset(np.array([[1.0, 0.0]]), np.array([1.0])))
        x = np.array([1e4, 0.0])
        assert np.isfinite(obj.value(x))
        assert np.isfinite(obj.value(-x))
        assert obj.value(-x) == pytest.approx(1e4, rel=1e-10)

    def test_prox_unsupported(self):
        obj = LogisticObjective(generate_logistic_data(5, 2, 1, 2))
        with pytest.raises(ProxUnsupportedError, match="first_order"):
            obj.prox(np.zeros(2), np.zeros(2), 1.0)

    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError):
            LogisticObjective(Dataset(np.ones((2, 2)), np.array([1.0, 0.5])))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lipschitz_dominates_difference_quotients(seed):
    rng = np.random.default_rng(seed)
    ridge = RidgeObjective(generate_ridge_data(10, 2, seed))
    logi = LogisticObjective(generate_logistic_data(10, 2, seed, seed + 1))
    for obj in (ridge, logi):
        bound = obj.lipschitz_bound()
        for _ in range(40):
            u = rng.standard_normal(2)
            v = rng.standard_normal(2)
            num = np.linalg.norm(obj.gradient(u) - obj.gradient(v))
            assert num <= bound * np.linalg.norm(u - v) + 1e-12


class TestDataGeneration:
    def test_ridge_shapes_and_reproducibility(self):
        a = generate_ridge_data(30, 2, seed=99)
        b = generate_ridge_data(30, 2, seed=99)
        assert a.features.shape == (30, 2)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)

    def test_ridge_uniform_mean(self):
        ds = generate_ridge_data(10_000, 2, seed=1)
        assert abs(ds.features.mean() - 0.5) <= 0.02
        assert abs(ds.targets.mean() - 0.5) <= 0.02

    def test_logistic_matches_documented_recipe(self):
        ds = generate_logistic_data(64, 3, planted_seed=5, data_seed=6)
        planted = np.random.default_rng(5).standard_normal(3)
        rng = np.random.default_rng(6)
        feats = rng.standard_normal((64, 3))
        v = rng.uniform(0.0, 1.0, size=64)
        probs = 1.0 / (1.0 + np.exp(-feats @ planted))
        labels = np.where(v <= probs, 1.0, -1.0)
        assert np.array_equal(ds.features, feats)
        assert np.array_equal(ds.targets, labels)

    def test_logistic_balanced_for_zero_model(self):
        # recipe with a zero weight vector: each label is a fair coin
        rng = np.random.default_rng(21)
        v = rng.uniform(size=10_000)
        labels = np.where(v <= 0.5, 1.0, -1.0)
        assert abs(np.mean(labels == 1.0) - 0.5) <= 0.02

    def test_logistic_negation_symmetry(self):
        # negating the hidden model and all features fixes every label
        rng = np.random.default_rng(22)
        planted = rng.standard_normal(2)
        feats = rng.standard_normal((500, 2))
        v = rng.uniform(size=500)
        def labels(o, x):
            return np.where(v <= 1.0 / (1.0 + np.exp(-(o @ x))), 1.0, -1.0)
        assert np.array_equal(labels(feats, planted), labels(-feats, -planted))


class TestCentralizedOptimum:
    def test_ridge_shared_sample(self):
        data = Dataset(np.array([[1.0, 0.0]]), np.array([1.0]))
        objs = [RidgeObjective(data) for _ in range(4)]
        x = centralized_optimum(objs)
        grad = sum(f.gradient(x) for f in objs)
        assert np.linalg.norm(grad) <= 1e-12

    def test_ridge_interpolating_min_norm(self):
        objs = [RidgeObjective(Dataset(np.array([[1.0, 0.0]]), np.array([1.0])))]
        x = centralized_optimum(objs)
        assert objs[0].value(x) <= 1e-20
        assert np.allclose(x, [1.0, 0.0], atol=1e-10)

    def test_ridge_random_instances(self):
        objs = [RidgeObjective(generate_ridge_data(30, 2, seed=i)) for i in range(5)]
        x = centralized_optimum(objs)
        grad = sum(f.gradient(x) for f in objs)
        assert np.linalg.norm(grad) <= 1e-10

    def test_logistic_gradient_descent(self):
        objs = [
            LogisticObjective(generate_logistic_data(40, 2, 3, 100 + i))
            for i in range(4)
        ]
        x = centralized_optimum(objs, tol=1e-12)
        grad = sum(f.gradient(x) for f in objs)
        assert np.linalg.norm(grad) <= 1e-12

    def test_logistic_symmetric_labels_give_small_optimum(self):
        # fair-coin labels (hidden model = 0) leave no direction to prefer
        rng = np.random.default_rng(30)
        feats = rng.standard_normal((4000, 2))
        v = rng.uniform(size=4000)
        labels = np.where(v <= 0.5, 1.0, -1.0)
        objs = [LogisticObjective(Dataset(feats, labels))]
        x = centralized_optimum(objs, tol=1e-12)
        assert np.linalg.norm(sum(f.gradient(x) for f in objs)) <= 1e-12
        assert np.linalg.norm(x) <= 0.1

    def test_nonconvergence_raises(self):
        objs = [LogisticObjective(generate_logistic_data(40, 2, 3, 7))]
        with pytest.raises(OptimizerError, match="gradient norm"):
            centralized_optimum(objs, tol=1e-12, max_iters=3)


def test_dataset_csv_roundtrip():
    ds = generate_ridge_data(7, 3, seed=44)
    buf = io.StringIO()
    write_dataset_csv(ds, buf)
    buf.seek(0)
    again = read_dataset_csv(buf)
    assert np.array_equal(again.features, ds.features)
    assert np.array_equal(again.targets, ds.targets)
