import math
import unittest
from collections import OrderedDict

import numpy as np
import pytest

from Model.FAConformer import forward_batch
from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams
from TensorCore.RngState import RngState
from TensorCore.Tensor import Tensor
from Training.AdamOptimizer import AdamState, adam_step, collect_grads
from Training.Losses import cross_entropy, rdrop_loss, symmetric_kl
from Training.TrainConfig import TrainConfig
from util.FAConfException import LabelIndexException, ShapeException, TrainingAbortedException


def _scalar_params(value=1.0):
    return ModelParams(OrderedDict([("w", Tensor(np.array([value]), requires_grad=True))]))


class TestCrossEntropy(unittest.TestCase):

    def test_uniform_logits_give_log_k(self):
        for k in (2, 3, 7):
            assert abs(cross_entropy(np.zeros(k), 1).item() - math.log(k)) < 1e-12

    def test_confident_prediction_is_near_zero(self):
        loss = cross_entropy(np.array([10.0, -10.0]), 0).item()
        assert loss == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-9)
        assert loss < 3e-9

    def test_large_logits_stay_finite(self):
        assert cross_entropy(np.array([1000.0, -1000.0, 0.0]), 1).item() == pytest.approx(2000.0)

    def test_gradient_is_softmax_minus_one_hot(self):
        logits = Tensor(RngState(seed=3).normal(5), requires_grad=True)
        cross_entropy(logits, 2).backward()
        p = np.exp(logits.data - logits.data.max())
        p /= p.sum()
        expected = p - np.eye(5)[2]
        np.testing.assert_allclose(logits.grad, expected, atol=1e-12)

    def test_batch_mean(self):
        logits = RngState(seed=4).normal((4, 3))
        labels = [0, 2, 1, 1]
        single = [cross_entropy(logits[i], labels[i]).item() for i in range(4)]
        assert cross_entropy(logits, labels).item() == pytest.approx(np.mean(single), abs=1e-14)

    def test_label_out_of_range(self):
        with pytest.raises(LabelIndexException):
            cross_entropy(np.zeros(3), 3)
        with pytest.raises(IndexError):
            cross_entropy(np.zeros(3), -1)

    def test_label_count_mismatch(self):
        with pytest.raises(ShapeException):
            cross_entropy(np.zeros((2, 3)), [0])


class TestRDropLoss(unittest.TestCase):

    def test_identical_passes_reduce_to_cross_entropy(self):
        logits = RngState(seed=5).normal((6, 3))
        labels = [0, 1, 2, 0, 1, 2]
        assert rdrop_loss(logits, logits, labels, 0.5).item() == cross_entropy(logits, labels).item()

    def test_zero_dropout_model_reduces_exactly(self):
        config = ModelConfig.tiny(dropout_p=0.0)
        params = ModelParams.init(config, RngState(seed=6))
        rng = RngState(seed=7)
        x_mb = rng.normal((3, config.n_bands, config.eeg_channels, config.time_points))
        emg = rng.normal((3, config.emg_channels, config.time_points))
        labels = [0, 1, 2]
        first = forward_batch(x_mb, emg, config, params, rng, training=True)
        second = forward_batch(x_mb, emg, config, params, rng, training=True)
        assert rdrop_loss(first, second, labels, 0.5).item() == cross_entropy(first, labels).item()

    def test_alpha_zero_is_mean_of_cross_entropies(self):
        rng = RngState(seed=8)
        l1, l2 = rng.normal(4), rng.normal(4)
        expected = 0.5 * (cross_entropy(l1, 3).item() + cross_entropy(l2, 3).item())
        assert rdrop_loss(l1, l2, 3, 0.0).item() == pytest.approx(expected, abs=1e-15)

    def test_symmetric_kl_non_negative(self):
        rng = RngState(seed=9)
        for _ in range(1000):
            l1 = rng.normal(3, scale=3.0)
            l2 = rng.normal(3, scale=3.0)
            kl = symmetric_kl(l1, l2).item()
            assert kl >= 0.0
            ce = 0.5 * (cross_entropy(l1, 0).item() + cross_entropy(l2, 0).item())
            assert rdrop_loss(l1, l2, 0, 0.5).item() >= ce

    def test_symmetric_kl_matches_definition(self):
        l1 = np.array([1.0, 0.0, -1.0])
        l2 = np.array([0.0, 0.5, 0.0])
        p = np.exp(l1) / np.exp(l1).sum()
        q = np.exp(l2) / np.exp(l2).sum()
        expected = np.sum(p * np.log(p / q)) + np.sum(q * np.log(q / p))
        assert symmetric_kl(l1, l2).item() == pytest.approx(expected, rel=1e-12)

    def test_rdrop_label_out_of_range(self):
        with pytest.raises(LabelIndexException):
            rdrop_loss(np.zeros(2), np.zeros(2), 5, 0.5)


class TestAdam(unittest.TestCase):

    def test_zero_gradients_leave_params_unchanged(self):
        config = ModelConfig.tiny()
        params = ModelParams.init(config, RngState(seed=10))
        before = params.arrays()
        state = AdamState.for_params(params)
        adam_step(params, {name: np.zeros(p.shape) for name, p in params.items()}, state, TrainConfig.desk())
        assert state.t == 1
        for name, value in params.arrays().items():
            np.testing.assert_array_equal(value, before[name])

    def test_first_step_moves_by_learning_rate(self):
        for g in (3.0, -0.02):
            params = _scalar_params()
            cfg = TrainConfig(learning_rate=1e-3)
            adam_step(params, {"w": np.array([g])}, AdamState.for_params(params), cfg)
            assert params["w"].data[0] == pytest.approx(1.0 - 1e-3 * np.sign(g), abs=1e-9)

    def test_moments_track_gradients(self):
        params = _scalar_params()
        state = AdamState.for_params(params)
        cfg = TrainConfig(learning_rate=1e-2)
        for _ in range(5):
            adam_step(params, {"w": np.array([-2.0])}, state, cfg)
        assert state.t == 5
        assert state.v["w"][0] >= 0.0
        assert state.m["w"][0] == pytest.approx(-2.0 * (1 - 0.9 ** 5))
        assert params["w"].data[0] == pytest.approx(1.05, abs=1e-6)

    def test_non_finite_gradient_names_parameter(self):
        params = _scalar_params()
        with pytest.raises(TrainingAbortedException) as info:
            adam_step(params, {"w": np.array([np.nan])}, AdamState.for_params(params), TrainConfig(), epoch=3, batch=1)
        assert info.value.parameter == "w"
        assert "epoch=3" in str(info.value)
        assert params["w"].data[0] == 1.0

    def test_gradient_shape_mismatch(self):
        params = _scalar_params()
        with pytest.raises(ShapeException):
            adam_step(params, {"w": np.zeros(2)}, AdamState.for_params(params), TrainConfig())

    def test_identical_runs_are_bitwise_equal(self):
        def run():
            config = ModelConfig.tiny()
            params = ModelParams.init(config, RngState(seed=11))
            state = AdamState.for_params(params)
            rng = RngState(seed=12)
            x_mb = rng.normal((2, config.n_bands, config.eeg_channels, config.time_points))
            emg = rng.normal((2, config.emg_channels, config.time_points))
            for _ in range(3):
                params.zero_grad()
                cross_entropy(forward_batch(x_mb, emg, config, params), [0, 1]).backward()
                adam_step(params, collect_grads(params), state, TrainConfig.desk())
            return params.arrays()

        first, second = run(), run()
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])


class TestTrainConfig(unittest.TestCase):

    def test_published_defaults(self):
        cfg = TrainConfig.published()
        assert (cfg.learning_rate, cfg.epochs, cfg.batch_size, cfg.folds) == (1e-6, 500, 100, 5)
        assert (cfg.beta1, cfg.beta2, cfg.adam_eps) == (0.9, 0.999, 1e-8)

    def test_desk_preset(self):
        cfg = TrainConfig.desk(seed=3)
        assert (cfg.learning_rate, cfg.epochs, cfg.seed) == (1e-3, 200, 3)

    def test_invalid_values(self):
        for bad in (dict(epochs=0), dict(batch_size=0), dict(folds=1), dict(learning_rate=-1.0), dict(unknown=1)):
            with pytest.raises(ValueError):
                TrainConfig(**bad)
