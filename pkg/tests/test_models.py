"""Tests for the latent-variable models."""

import itertools

import numpy as np
import pytest
from unittest.mock import patch


def _mode(q_y, t):
    return q_y.mode()


class TestEnumerableToy:
    def _fixed_toy(self):
        from wakesleep.models import EnumerableToy
        init = np.array([0.6, 0.4])
        trans = np.array([[0.7, 0.3], [0.2, 0.8]])
        emit = np.array([[0.9, 0.1], [0.3, 0.7]])
        return EnumerableToy.from_probabilities(init, trans, emit, max_length=3), init, trans, emit

    def test_joint_matches_hand_product(self):
        toy, init, trans, emit = self._fixed_toy()
        x = np.array([[0.0], [1.0], [1.0]])
        table = toy.enumerate_joint(x, np.array([-1, -1, -1]))
        assert table.configs.shape == (8, 3)
        for config, log_joint in zip(table.configs, table.log_joint):
            y = [int(v) for v in config]
            expected = init[y[0]] * emit[y[0], 0] * trans[y[0], y[1]] * emit[y[1], 1] * trans[y[1], y[2]] * emit[y[2], 1]
            assert log_joint == pytest.approx(np.log(expected), abs=1e-12)
        assert table.posterior.sum() == pytest.approx(1.0, abs=1e-12)

    def test_marginal_sums_over_all_configs(self):
        toy, init, trans, emit = self._fixed_toy()
        x = np.array([[1.0], [0.0]])
        total = 0.0
        for y0, y1 in itertools.product(range(2), repeat=2):
            total += init[y0] * emit[y0, 1] * trans[y0, y1] * emit[y1, 0]
        assert toy.enumerate_joint(x, np.array([-1, -1])).log_marginal == pytest.approx(np.log(total), abs=1e-12)

    def test_supervised_steps_are_clamped_in_enumeration(self):
        toy, _, _, _ = self._fixed_toy()
        configs = toy.enumerate_configs(np.array([-1, 1, -1]))
        assert configs.shape == (4, 3)
        assert np.all(configs[:, 1] == 1)
        assert len({tuple(c) for c in configs.tolist()}) == 4

    def test_table_size_limit(self):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.models import EnumerableToy
        toy = EnumerableToy(num_classes=10, alphabet_size=2, max_length=8)
        assert toy.table_size(np.full(7, -1)) == 10**7
        with pytest.raises(ContractViolation):
            toy.enumerate_configs(np.full(7, -1))

    def test_from_probabilities_rejects_zeros(self):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.models import EnumerableToy
        with pytest.raises(ContractViolation):
            EnumerableToy.from_probabilities(np.array([1.0, 0.0]), np.eye(2) * 0.5 + 0.25, np.full((2, 2), 0.5))

    def test_sequence_longer_than_max_length(self, toy):
        from wakesleep.base.exceptions import ContractViolation
        with pytest.raises(ContractViolation):
            toy.trace(np.zeros((1, 5, 1)), np.full((1, 5), -1), _mode)

    def test_sample_sequences(self, toy):
        from wakesleep.core import Rng
        x, y = toy.sample_sequences(5, 4, Rng(0))
        assert x.shape == (5, 4, 1)
        assert y.shape == (5, 4)
        assert x.min() >= 0 and x.max() < toy.alphabet_size
        assert y.min() >= 0 and y.max() < toy.num_classes
        x_again, y_again = toy.sample_sequences(5, 4, Rng(0))
        np.testing.assert_array_equal(x, x_again)
        np.testing.assert_array_equal(y, y_again)

    def test_trace_splits_supervised_density(self, toy, toy_sequence):
        labels = np.array([[-1, 2, -1, 0]])
        trace = toy.trace(toy_sequence[None], labels, _mode)
        assert trace.log_q_sup is not None
        assert trace.y[0, 1] == 2 and trace.y[0, 3] == 0
        np.testing.assert_allclose(trace.log_q_full.value, trace.step_log_q.sum(axis=1))
        np.testing.assert_allclose(trace.log_p.value, trace.step_log_p.sum(axis=1))

    def test_unsupervised_trace_has_no_supervised_density(self, toy, toy_sequence):
        trace = toy.trace(toy_sequence[None], np.full((1, 4), -1), _mode)
        assert trace.log_q_sup is None
        assert trace.log_q_full is trace.log_q_sampled


class TestSeqModel:
    def test_trace_shapes_and_clamping(self, seq_model):
        from wakesleep.core import Rng
        x = Rng(0).normal((2, 3, 2))
        labels = np.array([[-1, 1, -1], [0, -1, 2]])
        trace = seq_model.trace(x, labels, _mode, z_noise=Rng(1).normal((2, 3, 2)))
        assert trace.y.shape == (2, 3)
        assert trace.z.shape == (2, 3, 2)
        assert trace.log_p.shape == (2,)
        assert trace.y[0, 1] == 1 and trace.y[1, 0] == 0 and trace.y[1, 2] == 2
        np.testing.assert_allclose(trace.q_y_probs.sum(axis=-1), np.ones((2, 3)))
        np.testing.assert_allclose(trace.log_p.value, trace.step_log_p.sum(axis=1))

    def test_detached_z_keeps_log_p_in_theta(self, seq_model):
        from wakesleep.core import Rng, backward, ops
        x = Rng(0).normal((2, 3, 2))
        trace = seq_model.trace(x, np.full((2, 3), -1), _mode, z_noise=Rng(1).normal((2, 3, 2)))
        grads = backward(ops.sum(trace.log_p))
        assert grads and all(name.startswith("theta.") for name in grads)
        seq_model.zero_grad()
        grads = backward(ops.sum(trace.log_q_sampled))
        assert grads and all(name.startswith("phi.") for name in grads)

    def test_pathwise_z_reaches_phi_through_log_p(self, seq_model):
        from wakesleep.core import Rng, backward, ops
        x = Rng(0).normal((2, 3, 2))
        trace = seq_model.trace(x, np.full((2, 3), -1), _mode, z_noise=Rng(1).normal((2, 3, 2)), pathwise=True)
        grads = backward(ops.sum(trace.log_p))
        assert any(name.startswith("phi.") for name in grads)

    @pytest.mark.parametrize("changed", [1, 3])
    def test_generative_terms_ignore_later_observations(self, seq_model, changed):
        from wakesleep.core import Rng
        x = Rng(0).normal((2, 5, 2))
        labels = np.array([[0, 1, 2, 1, 0], [2, 2, 0, 1, 1]])
        z_noise = Rng(1).normal((2, 5, 2))
        later = x.copy()
        later[:, changed] += 3.0
        # hold q's backward summaries fixed so z_{1:T} depends on the prefix only
        context = seq_model.inference_context(x)
        with patch.object(seq_model, "inference_context", return_value=context):
            before = seq_model.trace(x, labels, _mode, z_noise=z_noise)
            after = seq_model.trace(later, labels, _mode, z_noise=z_noise)
        np.testing.assert_array_equal(after.z[:, :changed + 1], before.z[:, :changed + 1])
        np.testing.assert_array_equal(after.step_log_p[:, :changed], before.step_log_p[:, :changed])
        assert np.all(after.step_log_p[:, changed] != before.step_log_p[:, changed])

    def test_labels_out_of_range(self, seq_model):
        from wakesleep.base.exceptions import ContractViolation
        x = np.zeros((1, 2, 2))
        with pytest.raises(ContractViolation):
            seq_model.trace(x, np.array([[3, -1]]), _mode)
        with pytest.raises(ContractViolation):
            seq_model.trace(x, np.array([[-2, -1]]), _mode)

    def test_wrong_observation_dim(self, seq_model):
        from wakesleep.base.exceptions import ContractViolation
        with pytest.raises(ContractViolation):
            seq_model.trace(np.zeros((1, 2, 3)), np.full((1, 2), -1), _mode)

    def test_no_style_latent(self):
        from wakesleep.core import Rng
        from wakesleep.models import SeqModel
        model = SeqModel(obs_dim=2, num_classes=3, z_dim=0, hidden_dim=4, rng=Rng(0))
        trace = model.trace(np.ones((1, 4, 2)), np.full((1, 4), -1), _mode)
        assert trace.z is None
        assert np.all(np.isfinite(trace.log_p.value))

    def test_continuation_stays_finite(self, seq_model):
        from wakesleep.core import Rng
        from wakesleep.models import continue_sequence
        prefix = Rng(0).normal((10, 2))
        result = continue_sequence(seq_model, prefix, np.array([0, 1, 2] + [-1] * 7), 200, Rng(1))
        assert result.x.shape == (200, 2)
        assert result.y.shape == (200,)
        assert result.prefix_y[:3].tolist() == [0, 1, 2]
        assert np.all(np.isfinite(result.x))
        assert np.all(np.isfinite(result.step_log_p))

    def test_continuation_is_reproducible(self, seq_model):
        from wakesleep.core import Rng
        from wakesleep.models import continue_sequence
        prefix = np.ones((3, 2))
        first = continue_sequence(seq_model, prefix, None, 5, Rng(4))
        second = continue_sequence(seq_model, prefix, None, 5, Rng(4))
        np.testing.assert_array_equal(first.x, second.x)
        np.testing.assert_array_equal(first.y, second.y)


class TestStaticSemiVAE:
    def _model(self):
        from wakesleep.core import Rng
        from wakesleep.models import StaticSemiVAE
        return StaticSemiVAE(obs_dim=6, num_classes=3, z_dim=2, hidden_dim=4, rng=Rng(0))

    def test_trace_single_step(self):
        from wakesleep.core import Rng
        model = self._model()
        x = (Rng(1).uniform((4, 1, 6)) > 0.5).astype(float)
        trace = model.trace(x, np.array([[1], [-1], [-1], [0]]), _mode, z_noise=Rng(2).normal((4, 1, 2)))
        assert trace.y[0, 0] == 1 and trace.y[3, 0] == 0
        assert trace.log_p.shape == (4,)
        assert np.all(trace.log_p.value < 0)

    def test_rejects_sequences(self):
        from wakesleep.base.exceptions import ContractViolation
        with pytest.raises(ContractViolation):
            self._model().trace(np.zeros((2, 2, 6)), np.full((2, 2), -1), _mode)

    def test_conditional_generate(self):
        model = self._model()
        x = np.zeros((2, 6))
        out = model.conditional_generate(x, np.array([0, 1]), classes=[0, 2])
        assert out.shape == (2, 2, 6)
        assert np.all((out > 0) & (out < 1))
        assert model.reconstruct(x).shape == (2, 6)

    def test_conditional_generate_rejects_bad_class(self):
        from wakesleep.base.exceptions import ContractViolation
        with pytest.raises(ContractViolation):
            self._model().conditional_generate(np.zeros((1, 6)), np.array([0]), classes=[3])


class TestFactory:
    def test_zero_init(self):
        from wakesleep.base.schemas import ModelConfig
        from wakesleep.core import Rng
        from wakesleep.models import build_model
        model = build_model(ModelConfig(num_classes=3, obs_dim=2, z_dim=1, hidden_dim=4, zero_init=True), Rng(0))
        assert all(np.all(node.value == 0) for node in model.parameters().values())

    def test_kinds(self):
        from wakesleep.base.schemas import ModelConfig
        from wakesleep.core import Rng
        from wakesleep.models import EnumerableToy, SeqModel, StaticSemiVAE, build_model
        assert isinstance(build_model(ModelConfig(kind="sequential"), Rng(0)), SeqModel)
        assert isinstance(build_model(ModelConfig(kind="toy"), Rng(0)), EnumerableToy)
        static = ModelConfig(kind="static", obs_dim=8, num_classes=2, z_dim=2, hidden_dim=3, observation="bernoulli")
        assert isinstance(build_model(static, Rng(0)), StaticSemiVAE)

    def test_static_needs_bernoulli(self):
        from wakesleep.base.exceptions import ConfigurationError
        from wakesleep.base.schemas import ModelConfig
        from wakesleep.models import build_model
        with pytest.raises(ConfigurationError):
            build_model(ModelConfig(kind="static", observation="gaussian"))

    def test_parameter_names_are_prefixed(self, seq_model):
        names = list(seq_model.parameters())
        assert all(name.startswith(("theta.", "phi.")) for name in names)
        assert len(names) == len(set(names))


class TestParameterSet:
    def test_load_wrong_shape_names_tensor(self, seq_model):
        from wakesleep.base.exceptions import CheckpointError
        state = seq_model.state_dict()
        name = "theta.gen.head_y.weight"
        state[name] = np.zeros((1, 1))
        with pytest.raises(CheckpointError) as info:
            seq_model.load_state_dict(state)
        assert info.value.details["tensor"] == name

    def test_load_missing_tensor(self, seq_model):
        from wakesleep.base.exceptions import CheckpointError
        state = seq_model.state_dict()
        del state[next(iter(state))]
        with pytest.raises(CheckpointError):
            seq_model.load_state_dict(state)

    def test_state_roundtrip(self, seq_model):
        from wakesleep.core import Rng
        from wakesleep.models import SeqModel
        other = SeqModel(obs_dim=2, num_classes=3, z_dim=2, hidden_dim=5, rng=Rng(99))
        other.load_state_dict(seq_model.state_dict())
        for name, value in seq_model.state_dict().items():
            np.testing.assert_array_equal(other.state_dict()[name], value)
