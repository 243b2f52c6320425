import math
import unittest

import numpy as np
import pytest

from TensorCore import TensorOps as ops
from TensorCore.GradCheck import grad_check, grad_check_tensors
from TensorCore.RngState import RngState
from TensorCore.Tensor import Tensor
from util.FAConfException import ShapeException, DomainException, ConfigException


def _random(shape, seed=0, low=-1.0, high=1.0):
    return RngState(seed=seed).uniform(shape, low, high)


class TestMatmul(unittest.TestCase):

    def test_identity(self):
        out = ops.matmul(np.eye(2), [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(out.data, [[1.0, 2.0], [3.0, 4.0]])

    def test_hand_dot_product(self):
        out = ops.matmul([[1.0, 2.0]], [[3.0], [4.0]])
        np.testing.assert_array_equal(out.data, [[11.0]])

    def test_zero_annihilates(self):
        out = ops.matmul(np.zeros((2, 3)), _random((3, 4)))
        np.testing.assert_array_equal(out.data, np.zeros((2, 4)))

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeException) as info:
            ops.matmul(np.zeros((2, 3)), np.zeros((4, 5)))
        assert "(2, 3)" in str(info.value) and "(4, 5)" in str(info.value)

    def test_gradient_flows_to_both_operands(self):
        a = Tensor(_random((3, 4), 1), requires_grad=True)
        b = Tensor(_random((4, 2), 2), requires_grad=True)
        ops.matmul(a, b).sum().backward()
        np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T)
        np.testing.assert_allclose(b.grad, a.data.T @ np.ones((3, 2)))


class TestConv1d(unittest.TestCase):

    def test_scaling_kernel(self):
        out = ops.conv1d([[1.0, 2.0, 3.0]], [[[2.0]]], [0.0], padding="valid")
        np.testing.assert_array_equal(out.data, [[2.0, 4.0, 6.0]])

    def test_cross_correlation_with_same_padding(self):
        out = ops.conv1d([[1.0, 2.0, 3.0]], [[[1.0, 0.0, -1.0]]], [0.0], padding="same")
        np.testing.assert_array_equal(out.data, [[-2.0, -2.0, 2.0]])

    def test_bias_only(self):
        out = ops.conv1d(_random((2, 10)), np.zeros((3, 2, 3)), [5.0, 5.0, 5.0], padding="same")
        np.testing.assert_array_equal(out.data, np.full((3, 10), 5.0))

    def test_depthwise_ones_is_identity(self):
        x = _random((4, 12), 3)
        out = ops.conv1d(x, np.ones((4, 1, 1)), None, padding="valid", groups=4)
        np.testing.assert_array_equal(out.data, x)

    def test_output_length_formula(self):
        out = ops.conv1d(_random((2, 3, 500)), _random((3, 1, 11)), None, padding="same", stride=4, groups=3)
        assert out.shape == (2, 3, 125)
        out = ops.conv1d(_random((1, 20)), _random((2, 1, 5)), None, padding=1, stride=3)
        assert out.shape == (2, (20 + 2 - 5) // 3 + 1)

    def test_same_padding_keeps_length(self):
        for kernel in (1, 3, 15):
            assert ops.conv1d(_random((2, 40)), _random((5, 2, kernel)), None, padding="same").shape == (5, 40)

    def test_kernel_longer_than_input(self):
        with pytest.raises(ShapeException):
            ops.conv1d(_random((1, 4)), _random((1, 1, 7)), None, padding="valid")

    def test_groups_must_divide_channels(self):
        with pytest.raises(ConfigException):
            ops.conv1d(_random((3, 10)), _random((4, 1, 3)), None, groups=2)

    def test_batched_matches_per_sample(self):
        x = _random((3, 4, 30), 4)
        w = _random((6, 2, 5), 5)
        b = _random((6,), 6)
        batched = ops.conv1d(x, w, b, padding="same", stride=2, groups=2).data
        for i in range(3):
            single = ops.conv1d(x[i], w, b, padding="same", stride=2, groups=2).data
            np.testing.assert_allclose(batched[i], single, rtol=0, atol=1e-14)


class TestSoftmaxAndUnary(unittest.TestCase):

    def test_symmetric_softmax(self):
        np.testing.assert_allclose(ops.softmax([0.0, 0.0, 0.0]).data, [1 / 3] * 3, rtol=0, atol=1e-15)

    def test_closed_form_softmax(self):
        np.testing.assert_allclose(ops.softmax([0.0, math.log(3.0)]).data, [0.25, 0.75], rtol=0, atol=1e-15)

    def test_softmax_is_stable(self):
        out = ops.softmax([1000.0, 0.0]).data
        assert out[0] == pytest.approx(1.0) and out[1] == pytest.approx(0.0, abs=1e-300)

    def test_softmax_rows_sum_to_one(self):
        x = _random((50, 7), 7, -20.0, 20.0)
        for axis in (0, 1):
            out = ops.softmax(x, axis=axis).data
            assert np.all(out > 0.0)
            np.testing.assert_allclose(out.sum(axis=axis), 1.0, rtol=0, atol=1e-12)

    def test_softmax_bad_axis(self):
        with pytest.raises(ShapeException):
            ops.softmax(np.zeros((2, 2)), axis=2)

    def test_unary_values(self):
        assert ops.unary([0.0], "sigmoid").data[0] == 0.5
        np.testing.assert_array_equal(ops.unary([-1.0, 2.0], "relu").data, [0.0, 2.0])
        assert ops.unary([math.log(3.0)], "sigmoid").data[0] == pytest.approx(0.75, abs=1e-15)

    def test_log_domain(self):
        with pytest.raises(DomainException):
            ops.unary([1.0, 0.0], "log")

    def test_unknown_unary(self):
        with pytest.raises(ConfigException):
            ops.unary([1.0], "tanh")


class TestPoolingAndDropout(unittest.TestCase):

    def test_mean_pool_values(self):
        np.testing.assert_array_equal(ops.mean_pool_time([[1.0, 2.0, 3.0]]).data, [2.0])
        np.testing.assert_array_equal(ops.mean_pool_time(np.full((3, 5), 4.5)).data, [4.5] * 3)
        np.testing.assert_array_equal(ops.mean_pool_time([[1.0, 3.0], [0.0, 0.0]]).data, [2.0, 0.0])

    def test_mean_pool_empty(self):
        with pytest.raises(ShapeException):
            ops.mean_pool_time(np.zeros((2, 0)))

    def test_dropout_identities(self):
        x = Tensor(_random((10, 10)))
        assert ops.dropout(x, 0.0, RngState(seed=1), training=True) is x
        assert ops.dropout(x, 0.5, RngState(seed=1), training=False) is x

    def test_dropout_probability_bounds(self):
        with pytest.raises(ConfigException):
            ops.dropout(Tensor([1.0]), 1.0, RngState(seed=1), training=True)

    def test_dropout_is_unbiased_and_deterministic(self):
        x = Tensor(_random((100, 100), 8, 0.0, 2.0))
        first = ops.dropout(x, 0.5, RngState(seed=9), training=True).data
        second = ops.dropout(x, 0.5, RngState(seed=9), training=True).data
        np.testing.assert_array_equal(first, second)
        assert set(np.unique(np.round(first / np.where(x.data == 0, 1, x.data), 12))) <= {0.0, 2.0}
        assert abs(first.mean() - x.data.mean()) < 0.05 * x.data.mean()


class TestBackward(unittest.TestCase):

    def test_sum_gives_ones(self):
        x = Tensor(_random((3, 4)), requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_square(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * x).sum().backward()
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_detached_branch_gets_nothing(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = Tensor([3.0, 4.0], requires_grad=True)
        (x * y.detach()).sum().backward()
        assert y.grad is None
        np.testing.assert_array_equal(x.grad, [3.0, 4.0])

    def test_repeated_calls_accumulate(self):
        x = Tensor([1.0, -1.0], requires_grad=True)
        loss = (x * 3.0).sum()
        loss.backward()
        loss.backward()
        np.testing.assert_array_equal(x.grad, [6.0, 6.0])
        x.zero_grad()
        assert x.grad is None

    def test_non_scalar_loss(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeException):
            (x * 2.0).backward()

    def test_shared_subexpression(self):
        x = Tensor([0.5, -0.3], requires_grad=True)
        y = ops.sigmoid(x)
        (y * y + y).sum().backward()
        s = 1.0 / (1.0 + np.exp(-x.data))
        np.testing.assert_allclose(x.grad, (2 * s + 1) * s * (1 - s), rtol=1e-14)


class TestGradCheck(unittest.TestCase):

    def test_linear_function(self):
        assert grad_check(lambda t: t.sum(), Tensor(_random((3, 3), 10, -0.5, 0.5))) < 1e-10

    def test_sigmoid_sum(self):
        assert grad_check(lambda t: ops.sigmoid(t).sum(), Tensor(_random((4, 5), 11))) < 1e-6

    def test_conv_softmax_chain(self):
        w = Tensor(_random((3, 2, 5), 12), requires_grad=True)
        b = Tensor(_random((3,), 13), requires_grad=True)
        x = Tensor(_random((2, 16), 14), requires_grad=True)
        weights = Tensor(_random((3, 16), 15))

        def loss():
            return (ops.softmax(ops.conv1d(x, w, b, padding="same"), axis=0) * weights).sum()

        assert grad_check_tensors(loss, [x, w, b], eps=1e-5) < 1e-5

    def test_every_op_matches_finite_differences(self):
        rng_seed = 20
        cases = {
            "matmul": lambda t: (ops.matmul(t, Tensor(_random((4, 3), 21))) * Tensor(_random((2, 3), 22))).sum(),
            "conv1d_strided_grouped": lambda t: (ops.conv1d(t, Tensor(_random((4, 1, 3), 23)), None, "same", 2, 2)
                                                  * Tensor(_random((4, 2), 24))).sum(),
            "softmax": lambda t: (ops.softmax(t, axis=1) * Tensor(_random((2, 4), 25))).sum(),
            "log_softmax": lambda t: (ops.log_softmax(t, axis=0) * Tensor(_random((2, 4), 26))).sum(),
            "relu": lambda t: (ops.relu(t) * Tensor(_random((2, 4), 27))).sum(),
            "sigmoid": lambda t: (ops.sigmoid(t) * Tensor(_random((2, 4), 28))).sum(),
            "elu": lambda t: (ops.elu(t) * Tensor(_random((2, 4), 29))).sum(),
            "mean_pool_time": lambda t: (ops.mean_pool_time(t) * Tensor(_random((2,), 30))).sum(),
            "concat_transpose": lambda t: (ops.transpose(ops.concat([t, t * 2.0], axis=0))
                                           * Tensor(_random((4, 4), 31))).sum(),
            "div": lambda t: (ops.div(Tensor(_random((2, 4), 32)), t + 3.0)).sum(),
        }
        for name, f in cases.items():
            error = grad_check(f, Tensor(_random((2, 4), rng_seed)), eps=1e-5)
            assert error < 1e-5, f"{name}: relative error {error}"
        error = grad_check(lambda t: ops.log(t).sum(), Tensor(_random((2, 4), 33, 0.5, 1.5)))
        assert error < 1e-5

    def test_eps_range(self):
        with pytest.raises(ConfigException):
            grad_check(lambda t: t.sum(), Tensor([1.0]), eps=1e-2)


class TestRngState(unittest.TestCase):

    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(RngState(seed=42).uniform(100), RngState(seed=42).uniform(100))

    def test_derived_streams_depend_only_on_keys(self):
        a = RngState(seed=42)
        a.uniform(10)
        np.testing.assert_array_equal(a.derive(1, 2).uniform(5), RngState(seed=42).derive(1, 2).uniform(5))
        assert not np.array_equal(a.derive(1, 2).uniform(5), a.derive(2, 1).uniform(5))

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RngState(seed=-1)
        assert RngState(seed=2 ** 64 - 1).algorithm == "PCG64"
