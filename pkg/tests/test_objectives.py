"""Tests for the training objectives."""

import numpy as np
import pytest
from scipy import special
from unittest.mock import patch


def _static_model():
    from wakesleep.core import Rng
    from wakesleep.models import StaticSemiVAE
    return StaticSemiVAE(obs_dim=5, num_classes=3, z_dim=2, hidden_dim=4, rng=Rng(0))


def _binary(shape, seed):
    from wakesleep.core import Rng
    return (Rng(seed).uniform(shape) > 0.5).astype(float)


def _grads(model, loss):
    from wakesleep.core import backward
    model.zero_grad()
    grads = backward(loss)
    model.zero_grad()
    return grads


def _frozen_particles(toy, x, labels, K, rng):
    """Particle set rebuilt on fixed draws and fixed ssws weights, so only log q follows φ."""
    from wakesleep.particles import ParticleSet, sample_particles
    pset = sample_particles(toy, x, labels, K, rng)
    y = pset.trace.y.copy()
    weights = pset.ssws_weights()

    def rebuild():
        trace = toy.trace(np.repeat(x, K, axis=0), np.repeat(labels, K, axis=0), draw_y=lambda q_y, t: y[:, t])
        return ParticleSet(num_sequences=x.shape[0], K=K, labels=labels, trace=trace, _ssws=weights)

    return pset, rebuild


class TestWakeSleepLosses:
    def test_cws_equals_ssws_without_supervision(self, toy):
        from wakesleep.core import Rng
        from wakesleep.objectives import compute_report
        x, _ = toy.sample_sequences(3, 4, Rng(0))
        labels = np.full((3, 4), -1)
        cws = compute_report(toy, x, labels, "cws", K=5, alpha=1.0, rng=Rng(1))
        ssws = compute_report(toy, x, labels, "ssws", K=5, alpha=1.0, rng=Rng(1))
        assert cws.loss_phi.item() == ssws.loss_phi.item()
        assert cws.loss_theta.item() == ssws.loss_theta.item()
        cws_grads = _grads(toy, cws.loss_phi)
        ssws_grads = _grads(toy, ssws.loss_phi)
        assert cws_grads.keys() == ssws_grads.keys()
        for name in cws_grads:
            np.testing.assert_array_equal(cws_grads[name], ssws_grads[name])

    def test_rws_ignores_labels(self, toy):
        from wakesleep.core import Rng
        from wakesleep.objectives import compute_report
        x, y = toy.sample_sequences(2, 4, Rng(0))
        rws = compute_report(toy, x, y, "rws", K=4, alpha=1.0, rng=Rng(1))
        ssws = compute_report(toy, x, np.full_like(y, -1), "ssws", K=4, alpha=1.0, rng=Rng(1))
        assert rws.loss_phi.item() == ssws.loss_phi.item()
        assert rws.diagnostics["n_supervised"] == 0.0

    def test_loss_s_is_zero_without_supervision(self, toy, toy_sequence):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_s
        from wakesleep.particles import sample_particles
        pset = sample_particles(toy, toy_sequence[None], np.full((1, 4), -1), 4, Rng(0))
        assert loss_s(pset).item() == 0.0

    def test_loss_s_averages_supervised_log_q(self, toy, toy_sequence):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_s
        from wakesleep.particles import sample_particles
        pset = sample_particles(toy, toy_sequence[None], np.array([[2, -1, 1, -1]]), 4, Rng(0))
        assert loss_s(pset).item() == pytest.approx(float(np.mean(pset.log_q_sup.value)))
        assert loss_s(pset, "normalized").item() == pytest.approx(float(np.mean(pset.log_q_sup.value)) / 2)

    def test_loss_q_is_weighted_negative_log_q(self, toy, toy_sequence):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_q_cws, loss_q_ssws
        from wakesleep.particles import cws_weights, sample_particles
        pset = sample_particles(toy, toy_sequence[None], np.array([[-1, 0, -1, -1]]), 5, Rng(4))
        w, _ = pset.ssws_weights()
        expected = -float(np.sum(w.reshape(-1) * pset.log_q_sampled.value))
        assert loss_q_ssws(pset).item() == pytest.approx(expected)
        expected_cws = -float(np.sum(cws_weights(pset).reshape(-1) * pset.log_q_full.value))
        assert loss_q_cws(pset).item() == pytest.approx(expected_cws)
        assert loss_q_ssws(pset, "normalized").item() == pytest.approx(expected / 3)

    @pytest.mark.parametrize("scaling", ["sum", "normalized"])
    def test_loss_q_ssws_phi_gradient_matches_finite_differences(self, toy, scaling):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_q_ssws
        from wakesleep.oracle import finite_difference_gradient
        x, _ = toy.sample_sequences(2, 4, Rng(0))
        labels = np.array([[-1, 0, -1, -1], [-1, -1, -1, -1]])
        _, rebuild = _frozen_particles(toy, x, labels, 5, Rng(6))
        grads = _grads(toy, loss_q_ssws(rebuild(), scaling))
        numeric = finite_difference_gradient(lambda: loss_q_ssws(rebuild(), scaling).item(), toy.q_logits)
        np.testing.assert_allclose(grads["phi.q"], numeric, atol=1e-6)

    @pytest.mark.parametrize("scaling", ["sum", "normalized"])
    def test_loss_s_phi_gradient_matches_finite_differences(self, toy, scaling):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_s
        from wakesleep.oracle import finite_difference_gradient
        x, _ = toy.sample_sequences(2, 4, Rng(0))
        labels = np.array([[2, -1, 1, -1], [-1, -1, 0, -1]])
        _, rebuild = _frozen_particles(toy, x, labels, 4, Rng(6))
        grads = _grads(toy, loss_s(rebuild(), scaling))
        numeric = finite_difference_gradient(lambda: loss_s(rebuild(), scaling).item(), toy.q_logits)
        assert np.any(numeric != 0)
        np.testing.assert_allclose(grads["phi.q"], numeric, atol=1e-6)

    def test_loss_q_cws_phi_gradient_matches_finite_differences(self, toy):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_q_cws
        from wakesleep.oracle import finite_difference_gradient
        from wakesleep.particles import cws_weights
        x, _ = toy.sample_sequences(2, 4, Rng(0))
        labels = np.array([[-1, 2, -1, -1], [1, -1, -1, 0]])
        pset, rebuild = _frozen_particles(toy, x, labels, 5, Rng(6))
        weights = cws_weights(pset)
        with patch("wakesleep.objectives.wake.cws_weights", return_value=weights):
            grads = _grads(toy, loss_q_cws(rebuild()))
            numeric = finite_difference_gradient(lambda: loss_q_cws(rebuild()).item(), toy.q_logits)
        np.testing.assert_allclose(grads["phi.q"], numeric, atol=1e-6)

    def test_phi_losses_only_touch_phi(self, seq_model):
        from wakesleep.core import Rng
        from wakesleep.objectives import compute_report
        x = Rng(0).normal((2, 3, 2))
        labels = np.array([[-1, 1, -1], [-1, -1, -1]])
        for objective in ("ssws", "cws", "rws", "iwae-supervised-baseline", "reinforce-m1m2"):
            report = compute_report(seq_model, x, labels, objective, K=3, alpha=0.5, rng=Rng(1))
            assert not report.joint
            theta = _grads(seq_model, report.loss_theta)
            phi = _grads(seq_model, report.loss_phi)
            assert theta and all(name.startswith("theta.") for name in theta), objective
            assert phi and all(name.startswith("phi.") for name in phi), objective

    def test_unknown_objective(self, toy, toy_sequence):
        from wakesleep.base.exceptions import ConfigurationError
        from wakesleep.core import Rng
        from wakesleep.objectives import compute_report
        with pytest.raises(ConfigurationError):
            compute_report(toy, toy_sequence[None], np.full((1, 4), -1), "vae", K=2, alpha=1.0, rng=Rng(0))


class TestEvidenceBounds:
    def test_loss_p_is_mean_iwae_bound(self, toy):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_p
        from wakesleep.particles import sample_particles
        x, _ = toy.sample_sequences(3, 4, Rng(0))
        pset = sample_particles(toy, x, np.full((3, 4), -1), 6, Rng(1))
        expected = np.mean(special.logsumexp(pset.log_w_ssws(), axis=-1) - np.log(6))
        assert loss_p(pset).item() == pytest.approx(expected)

    def test_loss_p_theta_gradient_matches_finite_differences(self, toy, toy_sequence):
        from wakesleep.core import Rng
        from wakesleep.objectives import loss_p
        from wakesleep.oracle import finite_difference_gradient
        from wakesleep.particles import sample_particles
        labels = np.array([[-1, 1, -1, -1]])

        def value():
            return loss_p(sample_particles(toy, toy_sequence[None], labels, 4, Rng(9)))

        grads = _grads(toy, value())
        for leaf in toy.theta:
            numeric = finite_difference_gradient(lambda: value().item(), leaf)
            np.testing.assert_allclose(grads[leaf.name], numeric, atol=1e-6)

    def test_elbo_gradient_matches_finite_differences(self):
        from wakesleep.core import Rng
        from wakesleep.objectives import elbo
        from wakesleep.oracle import finite_difference_gradient
        model = _static_model()
        x = _binary((4, 1, 5), 1)
        labels = np.array([[0], [-1], [2], [-1]])

        def value():
            return elbo(model, x, labels, rng=Rng(3))

        grads = _grads(model, value())
        for leaf in (model.decoder.hidden.weight, model.enc_y.heads["logits"].bias, model.enc_z.heads["mean"].weight):
            numeric = finite_difference_gradient(lambda: value().item(), leaf)
            np.testing.assert_allclose(grads[leaf.name], numeric, atol=1e-6)

    @pytest.mark.slow
    def test_iwae_bound_tightens_with_k(self):
        from wakesleep.core import Rng
        from wakesleep.models import EnumerableToy
        from wakesleep.objectives import loss_p
        from wakesleep.oracle import exact_elbo, exact_log_marginal
        from wakesleep.particles import sample_particles
        toy = EnumerableToy.random(Rng(21), num_classes=3, alphabet_size=3, max_length=4, scale=2.0)
        toy.set_q_logits(np.zeros(toy.q_logits.shape))
        x, _ = toy.sample_sequences(1, 4, Rng(22))
        log_marginal = exact_log_marginal(toy, x[0])
        reps = 400
        means = {}
        for K in (1, 5, 25):
            pset = sample_particles(toy, np.repeat(x, reps, axis=0), np.full((reps, 4), -1), K, Rng(23).child(K))
            bounds = special.logsumexp(pset.log_w_ssws(), axis=-1) - np.log(K)
            assert loss_p(pset).item() == pytest.approx(float(np.mean(bounds)))
            se = np.std(bounds, ddof=1) / np.sqrt(reps)
            means[K] = float(np.mean(bounds))
            assert means[K] <= log_marginal + 5 * se
            if K == 1:
                assert abs(means[K] - exact_elbo(toy, x[0])) <= 5 * se
        gaps = [log_marginal - means[K] for K in (1, 5, 25)]
        assert gaps[0] > gaps[1] > gaps[2]


class TestM1M2:
    def test_objective_gradient_matches_finite_differences(self):
        from wakesleep.core import Rng
        from wakesleep.objectives import m1m2_objective
        from wakesleep.oracle import finite_difference_gradient
        model = _static_model()
        x = _binary((3, 1, 5), 2)
        labels = np.array([[1], [-1], [-1]])

        def value():
            return m1m2_objective(model, x, labels, alpha=2.0, rng=Rng(5))

        grads = _grads(model, value())
        for leaf in (model.decoder.heads["logits"].weight, model.enc_y.hidden.weight, model.enc_z.heads["log_std"].bias):
            numeric = finite_difference_gradient(lambda: value().item(), leaf)
            np.testing.assert_allclose(grads[leaf.name], numeric, atol=1e-6)

    def test_unlabeled_term_enumerates_classes(self):
        from wakesleep.objectives import marginal_terms
        model = _static_model()
        x = _binary((2, 1, 5), 3)
        terms = marginal_terms(model, x, np.array([[-1], [-1]]))
        assert terms.labeled_elbo is None
        assert terms.unlabeled_elbo.shape == (2,)
        # zero noise puts z at the mean of q(z | x, c) in both calls
        per_class = []
        for c in range(3):
            labeled = marginal_terms(model, x, np.array([[c], [c]]))
            per_class.append(labeled.labeled_elbo.value)
        q_y = model.q_y(x[:, 0]).probs
        entropy = -np.sum(q_y * np.log(q_y), axis=-1)
        np.testing.assert_allclose(terms.unlabeled_elbo.value, np.sum(q_y * np.stack(per_class, axis=1), axis=1) + entropy)

    def test_alpha_scales_classification_term(self):
        from wakesleep.objectives import m1m2_objective
        model = _static_model()
        x = _binary((2, 1, 5), 4)
        labels = np.array([[0], [1]])
        base = m1m2_objective(model, x, labels, alpha=0.0).item()
        boosted = m1m2_objective(model, x, labels, alpha=3.0).item()
        log_q_y = model.q_y(x[:, 0]).log_prob(np.array([0, 1])).value
        assert boosted - base == pytest.approx(3.0 * float(np.sum(log_q_y)) / 2)

    def test_report_is_joint(self):
        from wakesleep.core import Rng
        from wakesleep.objectives import compute_report
        model = _static_model()
        report = compute_report(model, _binary((2, 1, 5), 5), np.array([[0], [-1]]), "m1m2", K=1, alpha=1.0, rng=Rng(0))
        assert report.joint
        assert report.loss_theta is report.loss_phi
        grads = _grads(model, report.loss_theta)
        assert any(n.startswith("theta.") for n in grads) and any(n.startswith("phi.") for n in grads)

    def test_needs_single_step_model(self, seq_model):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.objectives import m1m2_losses
        with pytest.raises(ContractViolation):
            m1m2_losses(seq_model, np.zeros((1, 2, 2)), np.full((1, 2), -1), alpha=1.0)


class TestReinforce:
    def test_leave_one_out_advantage_sums_to_zero(self, toy, toy_sequence):
        from wakesleep.core import Rng
        from wakesleep.objectives import leave_one_out_advantage
        from wakesleep.particles import sample_particles
        pset = sample_particles(toy, toy_sequence[None], np.full((1, 4), -1), 5, Rng(0))
        advantage = leave_one_out_advantage(pset)
        assert advantage.shape == (1, 5)
        assert advantage.sum() == pytest.approx(0.0, abs=1e-10)
        f = pset.log_w_ssws()[0]
        assert advantage[0, 0] == pytest.approx(f[0] - np.mean(f[1:]))

    def test_needs_two_particles(self, toy, toy_sequence):
        from wakesleep.base.exceptions import ContractViolation
        from wakesleep.core import Rng
        from wakesleep.objectives import leave_one_out_advantage, reinforce_phi_grad
        from wakesleep.particles import sample_particles
        pset = sample_particles(toy, toy_sequence[None], np.full((1, 4), -1), 1, Rng(0))
        with pytest.raises(ContractViolation):
            leave_one_out_advantage(pset)
        with pytest.raises(ContractViolation):
            reinforce_phi_grad(toy, toy_sequence[None], np.full((1, 4), -1), 1, Rng(0))

    def test_phi_grad_keys(self, toy, toy_sequence):
        from wakesleep.core import Rng
        from wakesleep.objectives import reinforce_phi_grad
        grads = reinforce_phi_grad(toy, toy_sequence[None], np.full((1, 4), -1), 4, Rng(0))
        assert list(grads) == ["phi.q"]
        assert grads["phi.q"].shape == toy.q_logits.shape
