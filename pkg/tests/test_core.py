"""Tests for the differentiation graph, its ops and random streams."""

import numpy as np
import pytest


def _check_gradient(build, value, atol=1e-6):
    """Compare backward() against central differences for a scalar function of one leaf."""
    from wakesleep.core import backward, parameter
    from wakesleep.oracle import finite_difference_gradient
    leaf = parameter(value, "theta.x")
    grads = backward(build(leaf))
    numeric = finite_difference_gradient(lambda: build(leaf).item(), leaf)
    np.testing.assert_allclose(grads["theta.x"], numeric, atol=atol, rtol=1e-5)


class TestOps:
    def test_arithmetic(self):
        from wakesleep.core import ops
        other = np.array([[0.5, -1.0, 2.0]])
        _check_gradient(lambda a: ops.sum(a * other + a / (1.5 + a * a) - a), np.array([[0.3, -0.2, 1.1], [0.7, 0.1, -0.4]]))

    def test_unary(self):
        from wakesleep.core import ops
        _check_gradient(
            lambda a: ops.sum(ops.tanh(a) + ops.sigmoid(a) * ops.softplus(a) + ops.exp(-a) + ops.log(a * a + 1.0)),
            np.array([0.3, -1.2, 2.0]),
        )

    def test_matmul(self):
        from wakesleep.core import ops
        rhs = np.array([[1.0, 2.0], [-0.5, 0.3], [0.2, 0.1]])
        _check_gradient(lambda a: ops.sum(ops.tanh(a @ rhs)), np.array([[0.1, 0.2, 0.3], [-0.3, 0.4, 0.0]]))

    def test_logsumexp_and_softmax(self):
        from wakesleep.core import ops
        weights = np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 0.0]])
        _check_gradient(lambda a: ops.sum(ops.logsumexp(a, axis=-1)), np.array([[0.1, 0.5, -2.0], [3.0, 1.0, 0.0]]))
        _check_gradient(lambda a: ops.sum(ops.log_softmax(a) * weights), np.array([[0.1, 0.5, -2.0], [3.0, 1.0, 0.0]]))
        _check_gradient(lambda a: ops.sum(ops.softmax(a) * weights), np.array([[0.1, 0.5, -2.0], [3.0, 1.0, 0.0]]))

    def test_gather_ops(self):
        from wakesleep.core import ops
        rows = np.array([2, 0, 2])
        choices = np.array([1, 0, 2])
        _check_gradient(lambda a: ops.sum(ops.pick(ops.take_rows(a, rows), choices) * 2.0), np.arange(9.0).reshape(3, 3) / 10)
        _check_gradient(lambda a: ops.sum(ops.index(a, (slice(None), 1)) * 4.0), np.ones((2, 3)))

    def test_concat_reshape_where(self):
        from wakesleep.core import ops
        mask = np.array([True, False, True, False])
        _check_gradient(
            lambda a: ops.sum(ops.where(mask, ops.reshape(ops.concat([a, a * 3.0], axis=0), (4,)), 0.5) * ops.concat([a, a], axis=0)),
            np.array([0.2, -0.7]),
        )

    def test_mean_broadcast(self):
        from wakesleep.core import ops
        scale = np.arange(12.0).reshape(4, 3)
        _check_gradient(lambda a: ops.sum(ops.mean(a * scale, axis=0)), np.array([0.1, 0.2, 0.3]))

    def test_logsumexp_empty_axis(self):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.core import constant, ops
        with pytest.raises(ContractViolation):
            ops.logsumexp(constant(np.zeros((2, 0))), axis=-1)

    def test_logsumexp_all_neg_inf_is_neg_inf(self):
        from wakesleep.core import constant, ops
        out = ops.logsumexp(constant(np.array([-np.inf, -np.inf])))
        assert out.item() == -np.inf

    def test_take_rows_out_of_range(self):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.core import constant, ops
        with pytest.raises(ContractViolation):
            ops.take_rows(constant(np.zeros((3, 2))), np.array([3]))

    def test_one_hot(self):
        from wakesleep.core import ops
        np.testing.assert_array_equal(ops.one_hot(np.array([2, 0]), 3), [[0, 0, 1], [1, 0, 0]])


class TestBackward:
    def test_non_scalar_root(self):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.core import backward, parameter
        with pytest.raises(ContractViolation):
            backward(parameter(np.zeros(3), "theta.a") * 2.0)

    def test_non_finite_gradient(self):
        from wakesleep.base.exceptions import NumericFault
        from wakesleep.core import backward, ops, parameter
        leaf = parameter(np.array([0.0]), "theta.a")
        with np.errstate(divide="ignore"):
            root = ops.sum(ops.log(leaf))
        with pytest.raises(NumericFault) as info:
            backward(root)
        assert info.value.op == "log"

    def test_leaf_grads_accumulate(self):
        from wakesleep.core import backward, ops, parameter
        leaf = parameter(np.array([1.0, 2.0]), "theta.a")
        first = backward(ops.sum(leaf * 3.0))
        backward(ops.sum(leaf * 3.0))
        np.testing.assert_array_equal(first["theta.a"], [3.0, 3.0])
        np.testing.assert_array_equal(leaf.grad, [6.0, 6.0])
        leaf.zero_grad()
        np.testing.assert_array_equal(leaf.grad, [0.0, 0.0])

    def test_detach_blocks_gradient(self):
        from wakesleep.core import backward, detach, ops, parameter
        leaf = parameter(np.array([1.0, 2.0]), "theta.a")
        grads = backward(ops.sum(leaf * detach(leaf)))
        np.testing.assert_array_equal(grads["theta.a"], [1.0, 2.0])

    def test_constant_root_returns_nothing(self):
        from wakesleep.core import backward, constant
        assert backward(constant(1.5)) == {}

    def test_constant_root_gives_zero_grads_for_params(self):
        from wakesleep.core import backward, constant, parameter
        a = parameter(np.ones((2, 3)), "theta.a")
        b = parameter(np.ones(4), "phi.b")
        grads = backward(constant(1.5), [a, b])
        assert set(grads) == {"theta.a", "phi.b"}
        np.testing.assert_array_equal(grads["theta.a"], np.zeros((2, 3)))
        np.testing.assert_array_equal(grads["phi.b"], np.zeros(4))

    def test_params_untouched_by_root_get_zeros(self):
        from wakesleep.core import backward, ops, parameter
        a = parameter(np.array([1.0, 2.0]), "theta.a")
        b = parameter(np.array([5.0]), "theta.b")
        grads = backward(ops.sum(a * a), [a, b])
        np.testing.assert_allclose(grads["theta.a"], [2.0, 4.0])
        np.testing.assert_array_equal(grads["theta.b"], [0.0])
        np.testing.assert_array_equal(b.grad, [0.0])

    def test_item(self):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.core import constant
        assert constant(np.array([[2.5]])).item() == 2.5
        with pytest.raises(ContractViolation):
            constant(np.zeros(2)).item()


class TestRng:
    def test_same_stream_same_values(self):
        from wakesleep.core import Rng
        np.testing.assert_array_equal(Rng(5).child(1, 2).normal(4), Rng(5).child(1, 2).normal(4))

    def test_streams_are_independent_of_draw_order(self):
        from wakesleep.core import Rng
        root = Rng(5)
        a_first = root.child(0).uniform(3)
        root.child(1).uniform(100)
        np.testing.assert_array_equal(root.child(0).uniform(3), a_first)

    def test_distinct_paths_differ(self):
        from wakesleep.core import Rng
        assert not np.array_equal(Rng(5).child(0).normal(4), Rng(5).child(1).normal(4))
        assert not np.array_equal(Rng(5).normal(4), Rng(6).normal(4))

    def test_child_extends_path(self):
        from wakesleep.core import Rng
        assert Rng(3).child(1).child(2).stream == (1, 2)
        np.testing.assert_array_equal(Rng(3).child(1).child(2).gumbel(3), Rng(3).child(1, 2).gumbel(3))

    def test_categorical_and_choice(self):
        from wakesleep.core import Rng
        rng = Rng(0)
        assert rng.categorical(np.array([0.0, 1.0, 0.0])) == 1
        picked = rng.choice(10, 4)
        assert len(set(picked.tolist())) == 4
