import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from onebitmc.errors import DomainError, SamplingError
from onebitmc.linkmodel import LinkModel
from onebitmc.sampling import (
    ObservationSet,
    SamplingDistribution,
    draw_with_replacement,
    draw_without_replacement,
    empirical_marginals,
    generate_observations,
    mu_condition,
    product_marginals,
    smoothed_empirical_marginals,
    uniform,
)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestDistributions:
    def test_uniform(self):
        np.testing.assert_array_equal(uniform(2, 2).probs, np.full((2, 2), 0.25))
        np.testing.assert_array_equal(uniform(1, 4).probs, np.full((1, 4), 0.25))
        d = uniform(3, 2)
        np.testing.assert_allclose(d.probs, 1 / 6)
        assert mu_condition(d) == pytest.approx(1.0)

    def test_uniform_rejects_zero_dim(self):
        with pytest.raises(DomainError):
            uniform(0, 3)

    def test_product_marginals(self):
        np.testing.assert_allclose(product_marginals([1, 1], [1, 1]).probs, uniform(2, 2).probs)
        np.testing.assert_allclose(product_marginals([2, 1], [1, 1]).row_marginals(), [2 / 3, 1 / 3])
        w = 1.0 / np.arange(1, 11)
        r = product_marginals(w, np.ones(5)).row_marginals()
        assert r[0] / r[9] == pytest.approx(10.0)

    def test_product_rejects_zero_weights(self):
        with pytest.raises(DomainError):
            product_marginals([0, 0], [1, 1])
        with pytest.raises(DomainError):
            product_marginals([1, -1], [1, 1])

    def test_mu_condition(self):
        assert mu_condition(uniform(4, 4)) == pytest.approx(1.0)
        p = np.full((2, 2), 0.25)
        p[0, 0], p[1, 1] = 0.125, 0.375
        assert mu_condition(SamplingDistribution(p)) == pytest.approx(2.0)
        p = np.array([[0.5, 0.5], [0.0, 0.0]])
        assert mu_condition(SamplingDistribution(p)) == math.inf

    @pytest.mark.parametrize("probs", [[[0.5, 0.6]], [[-0.1, 1.1]], [[math.nan, 1.0]]])
    def test_invalid_probs(self, probs):
        with pytest.raises(DomainError):
            SamplingDistribution(np.array(probs))

    def test_read_only(self):
        d = uniform(2, 2)
        with pytest.raises(ValueError):
            d.probs[0, 0] = 1.0

    def test_csv_roundtrip(self, tmp_path):
        d = product_marginals([1, 2, 3], [3, 1])
        d.to_csv(tmp_path / "pi.csv")
        e = SamplingDistribution.from_csv(tmp_path / "pi.csv")
        np.testing.assert_array_equal(d.probs, e.probs)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.01, 10), min_size=1, max_size=8), st.lists(st.floats(0.01, 10), min_size=1, max_size=8))
    def test_marginals_sum_to_one(self, rw, cw):
        d = product_marginals(rw, cw)
        assert d.row_marginals().sum() == pytest.approx(1.0, abs=1e-12)
        assert d.col_marginals().sum() == pytest.approx(1.0, abs=1e-12)


class TestWithReplacement:
    def test_frequencies(self):
        idx = draw_with_replacement(uniform(2, 2), 100_000, rng(1))
        counts = np.bincount(idx[:, 0] * 2 + idx[:, 1], minlength=4)
        np.testing.assert_allclose(counts / 100_000, 0.25, atol=0.01)
        # chi-square sanity at the 0.1% level
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_point_mass(self):
        p = np.zeros((3, 3))
        p[1, 1] = 1.0
        idx = draw_with_replacement(SamplingDistribution(p), 5, rng())
        np.testing.assert_array_equal(idx, [[1, 1]] * 5)

    def test_deterministic(self):
        d = product_marginals([1, 2, 3], [1, 5])
        np.testing.assert_array_equal(draw_with_replacement(d, 50, rng(3)), draw_with_replacement(d, 50, rng(3)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 200), st.integers(0, 2**31))
    def test_length_and_range(self, d1, d2, n, seed):
        idx = draw_with_replacement(uniform(d1, d2), n, rng(seed))
        assert idx.shape == (n, 2)
        assert idx[:, 0].max() < d1 and idx[:, 1].max() < d2 and idx.min() >= 0


class TestWithoutReplacement:
    def test_exhaustive(self):
        idx = draw_without_replacement(uniform(2, 2), 4, rng())
        assert sorted(map(tuple, idx.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_single(self):
        idx = draw_without_replacement(uniform(3, 3), 1, rng())
        assert idx.shape == (1, 2)

    def test_full_support_every_trial(self):
        g = rng(5)
        for _ in range(10_000 // 100):
            idx = draw_without_replacement(uniform(3, 3), 9, g)
            assert len(set(map(tuple, idx.tolist()))) == 9

    def test_too_many(self):
        with pytest.raises(SamplingError):
            draw_without_replacement(uniform(2, 2), 5, rng())
        p = np.array([[0.5, 0.5], [0.0, 0.0]])
        with pytest.raises(SamplingError):
            draw_without_replacement(SamplingDistribution(p), 3, rng())

    def test_uniform_over_subsets(self):
        # every 2-subset of a 2x2 grid should appear with probability 1/6
        g = rng(11)
        counts = {}
        trials = 12_000
        for _ in range(trials):
            key = frozenset(map(tuple, draw_without_replacement(uniform(2, 2), 2, g).tolist()))
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 6
        assert stats.chisquare(list(counts.values())).pvalue > 1e-3

    def test_sequential_rejection_law(self):
        # first pick follows pi; second follows pi restricted to the rest
        p = np.array([[0.7, 0.2, 0.1]])
        g = rng(2)
        first = np.zeros(3)
        trials = 20_000
        for _ in range(trials):
            first[draw_without_replacement(SamplingDistribution(p), 2, g)[0, 1]] += 1
        np.testing.assert_allclose(first / trials, p[0], atol=0.015)

    def test_deterministic(self):
        d = uniform(5, 5)
        np.testing.assert_array_equal(draw_without_replacement(d, 20, rng(9)), draw_without_replacement(d, 20, rng(9)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 7), st.integers(1, 7), st.data())
    def test_no_duplicates(self, d1, d2, data):
        n = data.draw(st.integers(1, d1 * d2))
        seed = data.draw(st.integers(0, 2**31))
        w = data.draw(st.lists(st.floats(0.1, 5), min_size=d1, max_size=d1))
        idx = draw_without_replacement(product_marginals(w, np.ones(d2)), n, rng(seed))
        assert idx.shape == (n, 2)
        assert len(set(map(tuple, idx.tolist()))) == n


class TestObservations:
    def test_large_entry(self):
        M = np.array([[1e3]])
        obs = generate_observations(M, LinkModel.logistic(), np.zeros((10_000, 2), int), rng())
        assert np.mean(obs.signs == 1) >= 0.999

    def test_zero_truth_symmetric(self):
        M = np.zeros((4, 4))
        for model in (LinkModel.logistic(), LinkModel.probit(0.3), LinkModel.laplace(2.0)):
            idx = draw_with_replacement(uniform(4, 4), 10_000, rng(4))
            obs = generate_observations(M, model, idx, rng(5))
            assert abs(obs.signs.mean()) <= 0.02

    def test_logistic_rate(self):
        M = np.ones((1, 1))
        obs = generate_observations(M, LinkModel.logistic(), np.zeros((100_000, 2), int), rng(6))
        assert np.mean(obs.signs == 1) == pytest.approx(math.e / (1 + math.e), abs=0.005)

    def test_repeated_cells_independent(self):
        M = np.zeros((1, 1))
        obs = generate_observations(M, LinkModel.logistic(), np.zeros((2000, 2), int), rng(8))
        s = obs.signs
        # lag-1 correlation of a fair coin sequence
        assert abs(np.corrcoef(s[:-1], s[1:])[0, 1]) < 0.1

    def test_invalid(self):
        with pytest.raises(DomainError):
            ObservationSet(2, 2, [0], [2], [1])
        with pytest.raises(DomainError):
            ObservationSet(2, 2, [0], [1], [0])
        with pytest.raises(DomainError):
            generate_observations(np.array([[np.inf]]), LinkModel.logistic(), [[0, 0]], rng())

    def test_head_is_prefix(self):
        idx = draw_with_replacement(uniform(3, 3), 10, rng())
        obs = generate_observations(np.eye(3), LinkModel.logistic(), idx, rng())
        h = obs.head(4)
        assert len(h) == 4
        np.testing.assert_array_equal(h.rows, obs.rows[:4])
        np.testing.assert_array_equal(h.signs, obs.signs[:4])

    def test_csv_roundtrip(self, tmp_path):
        idx = draw_with_replacement(uniform(3, 4), 25, rng())
        obs = generate_observations(np.ones((3, 4)), LinkModel.probit(1.0), idx, rng())
        obs.to_csv(tmp_path / "obs.csv")
        assert (tmp_path / "obs.csv").read_text().splitlines()[0] == "row,col,sign"
        back = ObservationSet.from_csv(tmp_path / "obs.csv", 3, 4)
        for a in ("rows", "cols", "signs"):
            np.testing.assert_array_equal(getattr(back, a), getattr(obs, a))


class TestMarginals:
    def test_formula(self):
        obs = ObservationSet(2, 3, [0, 0, 0, 0], [0, 1, 2, 0], [1, -1, 1, 1])
        pr, pc = empirical_marginals(obs)
        np.testing.assert_allclose(pr, [1, 0])
        np.testing.assert_allclose(pc, [0.5, 0.25, 0.25])
        sr, sc = smoothed_empirical_marginals(obs)
        np.testing.assert_allclose(sr, [0.75, 0.25])

    def test_single_observation(self):
        obs = ObservationSet(3, 4, [1], [2], [1])
        pr, _ = empirical_marginals(obs)
        np.testing.assert_array_equal(pr, [0, 1, 0])

    def test_empty(self):
        with pytest.raises(SamplingError):
            empirical_marginals(ObservationSet(2, 2, [], [], []))

    def test_smoothed_converges(self):
        idx = draw_with_replacement(uniform(10, 10), 50_000, rng(3))
        obs = ObservationSet(10, 10, idx[:, 0], idx[:, 1], np.ones(len(idx), int))
        sr, _ = smoothed_empirical_marginals(obs)
        np.testing.assert_allclose(sr, 0.1, atol=0.01)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**31))
    def test_smoothed_positive(self, d1, d2, n, seed):
        idx = draw_with_replacement(uniform(d1, d2), n, rng(seed))
        obs = ObservationSet(d1, d2, idx[:, 0], idx[:, 1], np.ones(n, int))
        for m in smoothed_empirical_marginals(obs):
            assert (m > 0).all()
            assert m.sum() == pytest.approx(1.0, abs=1e-10)
