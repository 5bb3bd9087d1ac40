"""Dense-net core: forward/loss oracles, Adam recurrence, gradient checks,
deterministic full-trajectory training."""

import math

import numpy as np
import pytest

from quantaudit.datasets import Dataset, make_mixture_spec, sample_dataset, augment_dataset
from quantaudit.exceptions import InvalidArgumentError, ShapeError
from quantaudit.nets import (
    AdamState,
    ModelParams,
    NetArchitecture,
    TrainConfig,
    adam_step,
    classification_accuracy,
    forward,
    forward_batch,
    gradient,
    init_adam_state,
    init_params,
    load_trajectory,
    params_from_json,
    params_to_json,
    per_sample_loss,
    per_sample_losses,
    save_trajectory,
    train,
)

RNG = np.random.default_rng


def random_model(rng, input_dim, hidden):
    arch = NetArchitecture(input_dim=input_dim, hidden_dims=hidden)
    flat = rng.normal(scale=0.7, size=arch.n_params)
    return ModelParams(arch=arch, flat=flat)


def naive_forward(params, x):
    """Independent re-evaluation with explicit Python loops."""
    a = list(x)
    layers = params.layers
    for idx, (w, b) in enumerate(layers):
        z = []
        for row in range(w.shape[0]):
            s = 0.0
            for col in range(w.shape[1]):
                s += w[row, col] * a[col]
            if b is not None:
                s += b[row]
            z.append(s)
        if idx < len(layers) - 1 and params.arch.activation == "relu":
            a = [max(v, 0.0) for v in z]
        else:
            a = z
    return a[0]


class TestForward:
    def test_zero_params(self):
        arch = NetArchitecture(input_dim=3)
        params = ModelParams(arch=arch, flat=np.zeros(arch.n_params))
        assert forward(params, np.array([1.0, -2.0, 5.0])) == 0.0

    def test_dot_product(self):
        arch = NetArchitecture(input_dim=2, use_bias=False)
        params = ModelParams(arch=arch, flat=np.array([1.0, 2.0]))
        assert forward(params, np.array([3.0, 4.0])) == 11.0

    def test_two_layer_matches_naive(self):
        rng = RNG(0)
        params = random_model(rng, 5, (4,))
        for _ in range(20):
            x = rng.normal(size=5)
            assert abs(forward(params, x) - naive_forward(params, x)) < 1e-12

    def test_shape_error(self):
        params = random_model(RNG(1), 4, ())
        with pytest.raises(ShapeError):
            forward(params, np.zeros(5))


class TestPerSampleLoss:
    def test_zero_params_bce_is_ln2(self):
        arch = NetArchitecture(input_dim=2)
        params = ModelParams(arch=arch, flat=np.zeros(arch.n_params))
        loss = per_sample_loss(params, (np.array([3.0, -1.0]), 1.0), "classification")
        assert abs(loss - math.log(2.0)) < 1e-15

    def test_regression_squared_error(self):
        arch = NetArchitecture(input_dim=1, use_bias=False)
        params = ModelParams(arch=arch, flat=np.array([3.0]))
        loss = per_sample_loss(params, (np.array([1.0]), 1.0), "regression")
        assert loss == 4.0

    def test_matches_formula_recomputation(self):
        rng = RNG(2)
        params = random_model(rng, 4, (3,))
        for _ in range(25):
            x, y = rng.normal(size=4), float(rng.integers(0, 2))
            out = naive_forward(params, x)
            p = min(max(1.0 / (1.0 + math.exp(-out)), 1e-12), 1 - 1e-12)
            expect = -(y * math.log(p) + (1 - y) * math.log(1 - p))
            got = per_sample_loss(params, (x, y), "classification")
            assert abs(got - expect) < 1e-12

    def test_non_binary_label_rejected(self):
        params = random_model(RNG(3), 2, ())
        with pytest.raises(InvalidArgumentError):
            per_sample_loss(params, (np.zeros(2), 0.5), "classification")

    def test_nonnegative(self):
        rng = RNG(4)
        params = random_model(rng, 3, (2,))
        X = rng.normal(size=(200, 3)) * 10
        ys = rng.integers(0, 2, size=200).astype(float)
        assert (per_sample_losses(params, X, ys, "classification") >= 0).all()
        assert (per_sample_losses(params, X, ys, "regression") >= 0).all()


class TestAdam:
    def _config(self, lr=0.1):
        return TrainConfig(epochs=1, learning_rate=lr)

    def test_zero_gradient_keeps_params(self):
        p = np.array([1.5, -2.0])
        new, state = adam_step(p, np.zeros(2), init_adam_state(2), self._config())
        np.testing.assert_array_equal(new, p)
        assert state.step == 1

    def test_first_step_size(self):
        # hand-evaluated recurrence at t=1: |update| = lr * g / (|g| + eps)
        new, _ = adam_step(np.array([0.0]), np.array([1.0]),
                           init_adam_state(1), self._config(lr=0.1))
        expect = -0.1 * 1.0 / (1.0 + 1e-8)
        assert abs(new[0] - expect) < 1e-15

    def test_deterministic(self):
        rng = RNG(5)
        p, g = rng.normal(size=8), rng.normal(size=8)
        s0 = init_adam_state(8)
        a1, s1 = adam_step(p, g, s0, self._config())
        a2, s2 = adam_step(p, g, s0, self._config())
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(s1.m, s2.m)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step(np.zeros(2), np.zeros(3), init_adam_state(2), self._config())


def finite_difference_gradient(params, dataset, task_kind, h=1e-6):
    """Independent central-difference oracle on the mean loss."""
    flat = params.flat.copy()

    def mean_loss(vec):
        model = ModelParams(arch=params.arch, flat=vec)
        return float(np.mean(per_sample_losses(model, dataset.xs, dataset.ys, task_kind)))

    out = np.zeros_like(flat)
    for j in range(len(flat)):
        up, down = flat.copy(), flat.copy()
        up[j] += h
        down[j] -= h
        out[j] = (mean_loss(up) - mean_loss(down)) / (2 * h)
    return out


def max_rel_error(analytic, numeric):
    denom = np.maximum(np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


class TestGradient:
    def test_single_sample_finite_difference(self):
        rng = RNG(6)
        params = random_model(rng, 3, (4,))
        ds = Dataset(xs=rng.normal(size=(1, 3)), ys=np.array([1.0]))
        g = gradient(params, ds, "classification")
        fd = finite_difference_gradient(params, ds, "classification")
        assert max_rel_error(g, fd) < 1e-4

    @pytest.mark.parametrize("task", ["classification", "regression"])
    @pytest.mark.parametrize("hidden", [(), (4,), (5,)])
    def test_random_small_nets(self, task, hidden):
        rng = RNG(7)
        for trial in range(8):
            dim = int(rng.integers(2, 6))
            params = random_model(rng, dim, hidden)
            assert params.arch.n_params <= 64
            n = int(rng.integers(1, 6))
            ys = rng.integers(0, 2, size=n).astype(float) if task == "classification" \
                else rng.normal(size=n)
            ds = Dataset(xs=rng.normal(size=(n, dim)), ys=ys, task_kind=task)
            g = gradient(params, ds, task)
            fd = finite_difference_gradient(params, ds, task)
            assert max_rel_error(g, fd) < 1e-4

    def test_duplicated_dataset_same_gradient(self):
        rng = RNG(8)
        params = random_model(rng, 4, ())
        X = rng.normal(size=(6, 4))
        ys = rng.integers(0, 2, size=6).astype(float)
        single = gradient(params, Dataset(xs=X, ys=ys), "classification")
        doubled = gradient(params, Dataset(xs=np.vstack([X, X]), ys=np.tile(ys, 2)),
                           "classification")
        np.testing.assert_allclose(doubled, single, rtol=1e-12, atol=1e-15)

    def test_zero_loss_regression_fit(self):
        arch = NetArchitecture(input_dim=2, use_bias=False)
        params = ModelParams(arch=arch, flat=np.array([2.0, -1.0]))
        X = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
        ys = X @ np.array([2.0, -1.0])
        ds = Dataset(xs=X, ys=ys, task_kind="regression")
        np.testing.assert_array_equal(gradient(params, ds, "regression"), 0.0)

    def test_empty_dataset_rejected(self):
        params = random_model(RNG(9), 2, ())
        with pytest.raises(InvalidArgumentError):
            gradient(params, Dataset(xs=np.zeros((0, 2)), ys=np.zeros(0)), "classification")


class TestFlattenRoundTrip:
    def test_exact(self):
        rng = RNG(10)
        for hidden in [(), (3,), (4, 2)]:
            params = random_model(rng, 5, hidden)
            back = ModelParams.unflatten(params.flatten(), params.arch)
            np.testing.assert_array_equal(back.flat, params.flat)
            for (w1, b1), (w2, b2) in zip(params.layers, back.layers):
                np.testing.assert_array_equal(w1, w2)
                if b1 is not None:
                    np.testing.assert_array_equal(b1, b2)


class TestTrain:
    def _toy_set(self, n=32, dim=4, sigma=0.05, seed=0):
        spec = make_mixture_spec(dim=dim, k_modes=2, sigma=sigma, center_scale=5.0, seed=seed)
        return sample_dataset(spec, n, seed=seed + 1)

    def test_single_epoch_trajectory(self):
        ds = self._toy_set()
        traj = train(ds, TrainConfig(epochs=1, learning_rate=1e-3), init_seed=0)
        assert len(traj) == 1
        np.testing.assert_array_equal(traj.checkpoints[0], traj.final_flat)

    def test_separable_data_is_fit(self):
        ds = self._toy_set(sigma=0.01)
        traj = train(ds, TrainConfig(epochs=3000, learning_rate=1e-4), init_seed=1)
        acc = classification_accuracy(traj.final_params, ds.xs, ds.ys)
        assert acc == 1.0

    def test_deterministic_bitwise(self):
        ds = self._toy_set()
        cfg = TrainConfig(epochs=50, learning_rate=1e-3)
        a = train(ds, cfg, init_seed=3)
        b = train(ds, cfg, init_seed=3)
        np.testing.assert_array_equal(a.checkpoints, b.checkpoints)

    def test_permutation_invariance_exact(self):
        ds = self._toy_set(n=24)
        rng = RNG(11)
        perm = rng.permutation(len(ds))
        shuffled = Dataset(xs=ds.xs[perm], ys=ds.ys[perm])
        cfg = TrainConfig(epochs=40, learning_rate=1e-3)
        a = train(ds, cfg, init_seed=4)
        b = train(shuffled, cfg, init_seed=4)
        np.testing.assert_array_equal(a.checkpoints, b.checkpoints)

    def test_empty_train_set_rejected(self):
        with pytest.raises(InvalidArgumentError):
            train(Dataset(xs=np.zeros((0, 2)), ys=np.zeros(0)),
                  TrainConfig(epochs=1, learning_rate=1e-3))

    def test_no_checkpoint_mode(self):
        ds = self._toy_set()
        traj = train(ds, TrainConfig(epochs=5, learning_rate=1e-3), keep_checkpoints=False)
        assert len(traj) == 0 and traj.final_flat.shape == (ds.xs.shape[1] + 1,)

    def test_paper_scale_accuracy(self):
        # one run at the benchmark scale: 128-d inputs squared-augmented,
        # 6 clusters at sigma 1.5, n=128, 3000 epochs at lr 1e-4
        spec = make_mixture_spec(dim=128, k_modes=6, sigma=1.5, center_scale=5.0, seed=20)
        ds = augment_dataset(sample_dataset(spec, 128, seed=21))
        traj = train(ds, TrainConfig(epochs=3000, learning_rate=1e-4), init_seed=22,
                     keep_checkpoints=False)
        acc = classification_accuracy(traj.final_params, ds.xs, ds.ys)
        assert acc >= 0.97


class TestSerialization:
    def test_params_json_round_trip(self):
        params = random_model(RNG(12), 3, (2,))
        back = params_from_json(params_to_json(params))
        np.testing.assert_array_equal(back.flat, params.flat)
        assert back.arch == params.arch

    def test_trajectory_file_round_trip(self, tmp_path):
        ds = Dataset(xs=RNG(13).normal(size=(8, 3)),
                     ys=np.array([0., 1., 0., 1., 1., 0., 1., 0.]))
        traj = train(ds, TrainConfig(epochs=4, learning_rate=1e-3), init_seed=5)
        path = tmp_path / "traj.json"
        save_trajectory(traj, path)
        back = load_trajectory(path)
        np.testing.assert_array_equal(back.checkpoints, traj.checkpoints)
        np.testing.assert_array_equal(back.final_flat, traj.final_flat)
        assert back.arch == traj.arch
