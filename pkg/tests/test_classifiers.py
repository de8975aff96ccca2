import numpy as np
import pytest

from ebsmooth.classifiers import (
    EbClassifier,
    LinearClassifier,
    SoftClassifier,
    classify_hard,
    grad_log_pi,
    soft_pi,
    soft_pi_with_noise,
)
from ebsmooth.densities import IsoGaussian, IsoMixture
from ebsmooth.energy import EnergyNet
from ebsmooth.stats import rng_stream


def zero_energy(dim, sigma):
    gen = rng_stream(0, 0)
    net = EnergyNet.init(dim, (8,), sigma, gen)
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    net.out_w[:] = 0.0
    return net


class _ConstantSoft:
    """Duck-typed soft classifier that always answers the same distribution."""

    def __init__(self, probs):
        self._p = np.asarray(probs, dtype=float)

    @property
    def n_classes(self):
        return self._p.shape[0]

    @property
    def dim(self):
        return 2

    def probs(self, x):
        x = np.atleast_2d(x)
        return np.tile(self._p, (x.shape[0], 1))


class TestLinearClassifier:
    def test_sign_of_positive_margin(self):
        h = LinearClassifier(np.array([1.0, 0.0]), 0.0)
        assert classify_hard(h, np.array([2.0, 0.0])) == 1

    def test_negative_side(self):
        h = LinearClassifier(np.array([1.0, 0.0]), 0.0)
        assert classify_hard(h, np.array([-0.5, 3.0])) == 0

    def test_tie_goes_to_lowest_index(self):
        h = LinearClassifier(np.array([1.0, 0.0]), 0.0)
        assert classify_hard(h, np.array([0.0, 1.0])) == 0

    def test_zero_weights_rejected(self):
        with pytest.raises(ValueError):
            LinearClassifier(np.zeros(3), 1.0)


class TestHardEbClassifier:
    def test_gaussian_closed_form_contracts_before_classifying(self):
        model = IsoGaussian(sigma0=1.0, dim=2)
        h = LinearClassifier(np.array([1.0, 0.0]), 0.0)
        c = EbClassifier(h, model, sigma=1.0)
        # x = (2, 0) is denoised to (1, 0), still class 1
        assert classify_hard(c, np.array([2.0, 0.0])) == 1

    def test_denoising_can_flip_the_base_decision(self):
        # with beta = 1/2, w = (1, 0), b = -0.4: the base says class 1 at
        # x = (0.5, 0) (margin 0.1), but the denoised point (0.25, 0) has
        # margin -0.15, so the composed classifier says class 0
        model = IsoGaussian(sigma0=1.0, dim=2)
        h = LinearClassifier(np.array([1.0, 0.0]), -0.4)
        x = np.array([0.5, 0.0])
        assert classify_hard(h, x) == 1
        c = EbClassifier(h, model, sigma=1.0)
        assert classify_hard(c, x) == 0

    def test_zero_energy_reduces_to_base(self):
        gen = rng_stream(1, 0)
        soft = SoftClassifier.init(3, (8,), 4, gen)
        c = EbClassifier(soft, zero_energy(3, 0.5), sigma=0.5)
        xs = gen.standard_normal((50, 3))
        np.testing.assert_array_equal(c.predict_class(xs), soft.predict_class(xs))

    def test_sigma_mismatch_rejected(self):
        net = zero_energy(2, 0.5)
        h = LinearClassifier(np.array([1.0, 0.0]), 0.0)
        with pytest.raises(ValueError):
            EbClassifier(h, net, sigma=0.3)


class TestSoftPi:
    def test_no_noise_single_sample_is_plain_evaluation(self):
        gen = rng_stream(2, 0)
        soft = SoftClassifier.init(2, (8,), 3, gen)
        model = IsoGaussian(sigma0=1.0, dim=2)
        c = EbClassifier(soft, model, sigma=0.0, m=1)
        x = gen.standard_normal(2)
        np.testing.assert_allclose(
            soft_pi(c, x, rng_stream(2, 1)),
            soft.probs(model.bayes_estimate(x, 0.0)),
        )

    def test_constant_classifier_passes_through(self):
        const = _ConstantSoft([1.0, 0.0, 0.0])
        model = IsoGaussian(sigma0=1.0, dim=2)
        c = EbClassifier(const, model, sigma=0.7, m=32)
        out = soft_pi(c, np.array([0.3, -1.0]), rng_stream(3, 0))
        np.testing.assert_array_equal(out, [1.0, 0.0, 0.0])

    def test_output_is_probability_vector(self):
        gen = rng_stream(4, 0)
        soft = SoftClassifier.init(2, (16,), 5, gen)
        mix = IsoMixture.symmetric(np.array([2.0, 0.0]), 1.0)
        c = EbClassifier(soft, mix, sigma=0.5, m=8)
        for _ in range(50):
            p = soft_pi(c, gen.standard_normal(2), gen)
            assert np.all(p > 0.0)
            assert abs(p.sum() - 1.0) < 1e-12

    def test_monte_carlo_agreement_across_seeds(self):
        gen = rng_stream(5, 0)
        soft = SoftClassifier.init(2, (8,), 3, gen)
        model = IsoGaussian(sigma0=1.0, dim=2)
        m = 10_000
        c = EbClassifier(soft, model, sigma=0.5, m=m)
        x = np.array([0.4, -0.2])
        a = soft_pi(c, x, rng_stream(5, 1))
        b = soft_pi(c, x, rng_stream(5, 2))
        assert np.max(np.abs(a - b)) < 5.0 / np.sqrt(m)

    def test_argmax_stable_in_sample_count(self):
        gen = rng_stream(6, 0)
        soft = SoftClassifier.init(2, (8,), 3, gen)
        mix = IsoMixture.symmetric(np.array([1.5, 0.0]), 0.8)
        checked = 0
        for i in range(100):
            x = 2.0 * gen.standard_normal(2)
            c1 = EbClassifier(soft, mix, sigma=0.4, m=10_000)
            c4 = EbClassifier(soft, mix, sigma=0.4, m=40_000)
            p1 = soft_pi(c1, x, rng_stream(6, 100 + i))
            p4 = soft_pi(c4, x, rng_stream(6, 200 + i))
            top = np.sort(p4)[::-1]
            if top[0] - top[1] > 0.1:
                checked += 1
                assert np.argmax(p1) == np.argmax(p4)
        assert checked > 50


class TestGradLogPi:
    def test_no_noise_linear_softmax_is_analytic(self):
        gen = rng_stream(7, 0)
        soft = SoftClassifier.init(3, (), 4, gen)  # bare affine + softmax
        c = EbClassifier(soft, zero_energy(3, 0.0), sigma=0.0, m=2)
        x = gen.standard_normal(3)
        noise = np.zeros((2, 3))
        w = soft.weights[0]
        p = soft.probs(x)
        for k in range(4):
            want = w[:, k] - w @ p
            np.testing.assert_allclose(grad_log_pi(c, x, k, noise), want, atol=1e-12)

    def test_matches_finite_differences_with_common_noise(self):
        gen = rng_stream(8, 0)
        mix = IsoMixture.symmetric(np.array([1.0, -0.5]), 0.8)
        fails = 0
        for trial in range(50):
            soft = SoftClassifier.init(2, (8,), 3, rng_stream(8, trial + 1))
            estimator = mix if trial % 2 == 0 else None
            c = EbClassifier(soft, estimator, sigma=0.5, m=3)
            x = gen.standard_normal(2)
            noise = 0.5 * gen.standard_normal((3, 2))
            k = int(gen.integers(0, 3))
            g = grad_log_pi(c, x, k, noise)

            def log_pi(z):
                return np.log(max(soft_pi_with_noise(c, z, noise)[k], 1e-12))

            h = 1e-5
            fd = np.array([
                (log_pi(x + h * e) - log_pi(x - h * e)) / (2 * h) for e in np.eye(2)
            ])
            rel = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-8)
            fails += rel > 1e-4
        assert fails == 0

    def test_matches_finite_differences_with_energy_estimator(self):
        gen = rng_stream(9, 0)
        fails = 0
        for trial in range(20):
            soft = SoftClassifier.init(2, (6,), 2, rng_stream(9, 2 * trial + 1))
            net = EnergyNet.init(2, (8,), 0.4, rng_stream(9, 2 * trial + 2))
            c = EbClassifier(soft, net, sigma=0.4, m=2)
            x = gen.standard_normal(2)
            noise = 0.4 * gen.standard_normal((2, 2))
            g = grad_log_pi(c, x, 1, noise)

            def log_pi(z):
                return np.log(max(soft_pi_with_noise(c, z, noise)[1], 1e-12))

            h = 1e-5
            fd = np.array([
                (log_pi(x + h * e) - log_pi(x - h * e)) / (2 * h) for e in np.eye(2)
            ])
            rel = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-8)
            fails += rel > 1e-4
        assert fails == 0

    def test_identity_jacobian_gives_average_of_base_gradients(self):
        gen = rng_stream(10, 0)
        soft = SoftClassifier.init(2, (8,), 3, gen)
        c = EbClassifier(soft, zero_energy(2, 0.5), sigma=0.5, m=4)
        x = gen.standard_normal(2)
        noise = 0.5 * gen.standard_normal((4, 2))
        k = 2
        pi_k = soft_pi_with_noise(c, x, noise)[k]
        g = grad_log_pi(c, x, k, noise)
        base_grads = soft.class_prob_input_grad(x[None, :] + noise, k)
        np.testing.assert_allclose(g * pi_k, base_grads.mean(axis=0), atol=1e-12)
