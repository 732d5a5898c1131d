import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from onebitmc.errors import DomainError
from onebitmc.linkmodel import LinkModel, beta_alpha
from onebitmc.metrics import hellinger_sq, kl_divergence, lemma2_coefficient, recovery_errors
from onebitmc.sampling import product_marginals, uniform

# frozen reference values (direct evaluation in exact arithmetic)
HELLINGER_QUARTER = 2 - math.sqrt(3)
KL_HALF_QUARTER = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
COEF_LOGISTIC_1 = 0.0245764916551852

MODELS = [LinkModel.logistic(), LinkModel.probit(0.5), LinkModel.laplace(1.0)]

probs = st.floats(0.0, 1.0, allow_nan=False)
interior = st.floats(1e-6, 1 - 1e-6, allow_nan=False)


class TestHellinger:
    def test_examples(self):
        P = np.full((3, 2), 0.3)
        assert hellinger_sq(P, P) == 0.0
        assert hellinger_sq(np.zeros((2, 2)), np.ones((2, 2))) == pytest.approx(2.0)
        assert hellinger_sq(np.full((2, 3), 0.25), np.full((2, 3), 0.75)) == pytest.approx(HELLINGER_QUARTER, rel=1e-14)
        assert HELLINGER_QUARTER == pytest.approx(0.267949192431123, rel=1e-13)

    def test_entry_average(self):
        P = np.array([[0.25, 0.5]])
        Q = np.array([[0.75, 0.5]])
        assert hellinger_sq(P, Q) == pytest.approx(HELLINGER_QUARTER / 2)

    def test_invalid(self):
        with pytest.raises(DomainError):
            hellinger_sq(np.array([[1.2]]), np.array([[0.5]]))
        with pytest.raises(DomainError):
            hellinger_sq(np.zeros((2, 2)), np.zeros((2, 3)))

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (2, 3), elements=probs), arrays(float, (2, 3), elements=probs))
    def test_symmetric_and_bounded(self, P, Q):
        h = hellinger_sq(P, Q)
        assert h == pytest.approx(hellinger_sq(Q, P), abs=1e-15)
        assert -1e-15 <= h <= 2 + 1e-12


class TestKL:
    def test_examples(self):
        P = np.full((2, 2), 0.4)
        assert kl_divergence(P, P) == pytest.approx(0.0, abs=1e-15)
        assert kl_divergence(np.array([[0.5]]), np.array([[0.25]])) == pytest.approx(KL_HALF_QUARTER, rel=1e-14)
        assert KL_HALF_QUARTER == pytest.approx(0.143841036225890, rel=1e-13)

    def test_asymmetric(self):
        p, q = np.array([[0.2]]), np.array([[0.6]])
        assert kl_divergence(p, q) != pytest.approx(kl_divergence(q, p), rel=1e-3)

    def test_zero_log_zero(self):
        # p = 0 drops its log term
        assert kl_divergence(np.array([[0.0]]), np.array([[0.5]])) == pytest.approx(math.log(2))

    def test_infinity_flag(self):
        assert kl_divergence(np.array([[0.5]]), np.array([[0.0]])) == math.inf
        assert kl_divergence(np.array([[0.5, 0.5]]), np.array([[0.5, 1.0]])) == math.inf
        assert kl_divergence(np.array([[1.0]]), np.array([[1.0]])) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, (3, 2), elements=probs), arrays(float, (3, 2), elements=interior))
    def test_dominates_hellinger(self, P, Q):
        assert hellinger_sq(P, Q) <= kl_divergence(P, Q) + 1e-12

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, (2, 2), elements=probs), arrays(float, (2, 2), elements=interior))
    def test_zero_iff_equal(self, P, Q):
        if np.allclose(P, Q, atol=1e-12, rtol=0):
            assert kl_divergence(P, Q) <= 1e-10
        else:
            assert kl_divergence(P, Q) > 0 and hellinger_sq(P, Q) > 0


class TestHellingerCoefficient:
    def test_logistic_value(self):
        e = math.e
        assert lemma2_coefficient(LinkModel.logistic(), 1.0) == pytest.approx(e / (8 * (1 + e) ** 2), rel=1e-10)
        assert lemma2_coefficient(LinkModel.logistic(), 1.0) == pytest.approx(COEF_LOGISTIC_1, rel=1e-12)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind.value)
    def test_identity(self, model):
        assert lemma2_coefficient(model, 1.5) == pytest.approx(1 / (8 * beta_alpha(model, 1.5)), rel=1e-10)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind.value)
    def test_randomized_inequality(self, model):
        rng = np.random.default_rng(7)
        alpha = 1.0
        c = lemma2_coefficient(model, alpha)
        s, t = rng.uniform(-alpha, alpha, (2, 1000))
        for a, b in zip(s, t):
            h = hellinger_sq(model.cdf(np.array([[a]])), model.cdf(np.array([[b]])))
            assert h >= c * (a - b) ** 2 - 1e-12


class TestRecoveryErrors:
    def test_exact(self):
        T = np.arange(6.0).reshape(2, 3)
        assert recovery_errors(T, T) == {"weighted_frob_sq": 0.0, "rel_frob_sq": 0.0, "per_dim_frob_sq": 0.0}

    def test_zero_estimate(self):
        T = np.random.default_rng(0).standard_normal((4, 5))
        e = recovery_errors(np.zeros_like(T), T)
        assert e["rel_frob_sq"] == pytest.approx(1.0)
        assert e["per_dim_frob_sq"] == pytest.approx(np.sum(T**2) / 20)

    def test_uniform_weighting(self):
        rng = np.random.default_rng(1)
        T, E = rng.standard_normal((2, 3, 4))
        e = recovery_errors(E, T, uniform(3, 4))
        assert e["weighted_frob_sq"] == pytest.approx(e["per_dim_frob_sq"], rel=1e-14)

    def test_nonuniform_weighting(self):
        T = np.zeros((2, 2))
        E = np.array([[1.0, 0.0], [0.0, 0.0]])
        dist = product_marginals([3, 1], [1, 1])
        assert recovery_errors(E, T, dist)["weighted_frob_sq"] == pytest.approx(3 / 8)

    def test_zero_truth_flagged(self):
        assert math.isnan(recovery_errors(np.ones((2, 2)), np.zeros((2, 2)))["rel_frob_sq"])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            recovery_errors(np.zeros((2, 2)), np.zeros((2, 3)))
