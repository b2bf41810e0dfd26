import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridclust.errors import NumericalError, ValidationError
from hybridclust.mixture import (
    EMConfig,
    FittedModel,
    GaussianComponent,
    MixtureDensity,
    count_parameters,
    em_fit,
    fit_candidates,
    map_assign,
    pdf,
    sample,
    scaled_combination,
    select_model,
)
from hybridclust.quadrature import integrate_1d, integrate_2d

from helpers import gauss1d, mix1d, norm_pdf


class TestTypes:
    def test_component_requires_symmetry(self):
        with pytest.raises(ValidationError):
            GaussianComponent(np.zeros(2), np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_component_requires_spd(self):
        with pytest.raises(NumericalError):
            GaussianComponent(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_component_requires_finite(self):
        with pytest.raises(ValidationError):
            GaussianComponent(np.array([np.nan]), np.array([[1.0]]))

    def test_mixture_coefs_must_sum_to_one(self):
        comp = GaussianComponent(np.zeros(1), np.eye(1))
        with pytest.raises(ValidationError):
            MixtureDensity(((0.5, comp), (0.4, comp)))

    def test_mixture_coefs_must_be_positive(self):
        comp = GaussianComponent(np.zeros(1), np.eye(1))
        with pytest.raises(ValidationError):
            MixtureDensity(((1.5, comp), (-0.5, comp)))

    def test_n_params_full_covariance(self):
        assert count_parameters(4, 2) == 3 + 8 + 4 * 3
        assert count_parameters(1, 3) == 0 + 3 + 6


class TestPdf:
    def test_standard_normal_peak(self):
        assert pdf(gauss1d(0, 1), [0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)

    def test_mixture_of_identical_components(self):
        m = mix1d((0.5, 0.0, 1.0), (0.5, 0.0, 1.0))
        assert pdf(m, [0.0]) == pytest.approx(0.3989422804014327, abs=1e-12)

    def test_three_component_brute_force_grid(self):
        # term-by-term oracle on 50 grid points
        params = [(0.475, -3.0, 1.0), (0.475, 0.0, 1.0), (0.05, 3.1, 1.0)]
        m = mix1d(*params)
        for x in np.linspace(-8, 8, 50):
            expected = sum(c * norm_pdf(x, mu, sd) for c, mu, sd in params)
            assert pdf(m, [x]) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            pdf(gauss1d(0, 1), [0.0, 1.0])

    def test_nonfinite_point(self):
        with pytest.raises(ValidationError):
            pdf(gauss1d(0, 1), [np.inf])

    def test_far_tail_clamped_positive(self):
        assert pdf(gauss1d(0, 1), [500.0]) >= 1e-300

    def test_normalisation_by_quadrature_1d(self):
        m = mix1d((0.3, -4.0, 0.5), (0.7, 2.0, 2.0))
        box = m.support_box(12.0)
        val, _ = integrate_1d(
            lambda p: m.pdf_batch(p), box[0][0], box[0][1], m.axis_breakpoints(0)
        )
        assert abs(val - 1.0) < 1e-6

    def test_normalisation_by_quadrature_2d(self):
        m = MixtureDensity.from_parameters(
            [0.6, 0.4],
            [[0.0, 0.0], [3.0, -1.0]],
            [np.eye(2), [[2.0, 0.6], [0.6, 1.0]]],
        )
        box = m.support_box(12.0)
        val, _ = integrate_2d(
            lambda p: m.pdf_batch(p), box, (m.axis_breakpoints(0), m.axis_breakpoints(1))
        )
        assert abs(val - 1.0) < 1e-6


class TestSample:
    def test_mean_within_clt_bound(self):
        m = MixtureDensity.from_parameters([1.0], [[0.0, 0.0]], [np.eye(2)])
        x = sample(m, 100_000, seed=1)
        assert np.all(np.abs(x.mean(axis=0)) < 0.02)

    def test_component_draw_fraction(self):
        m = mix1d((0.9, 0.0, 0.01), (0.1, 100.0, 0.01))
        x = sample(m, 100_000, seed=3)
        frac = np.mean(x[:, 0] < 50)
        assert abs(frac - 0.9) < 0.01

    def test_single_draw(self):
        x = sample(gauss1d(2, 1), 1, seed=7)
        assert x.shape == (1, 1) and np.all(np.isfinite(x))

    def test_deterministic(self):
        m = mix1d((0.5, -1.0, 1.0), (0.5, 1.0, 1.0))
        assert np.array_equal(sample(m, 500, seed=11), sample(m, 500, seed=11))

    def test_requires_positive_n(self):
        with pytest.raises(ValidationError):
            sample(gauss1d(0, 1), 0, seed=0)


class TestEMFit:
    def test_two_separated_clusters_recovered(self):
        rng = np.random.default_rng(42)
        data = np.concatenate(
            [rng.normal(-5, 1, (200, 1)), rng.normal(5, 1, (200, 1))]
        )
        model = em_fit(data, 2, seed=0)
        means = sorted(comp.mean[0] for _, comp in model.mixture.terms)
        assert abs(means[0] + 5) < 0.3 and abs(means[1] - 5) < 0.3
        for c in model.mixture.coefs():
            assert abs(c - 0.5) < 0.1

    def test_k1_is_sample_moments_plus_ridge(self):
        rng = np.random.default_rng(5)
        data = rng.normal(0, 1, (300, 2))
        model = em_fit(data, 1, seed=0)
        _, comp = model.mixture.terms[0]
        assert np.allclose(comp.mean, data.mean(axis=0), atol=1e-12)
        expected_cov = np.cov(data.T, ddof=0) + 1e-6 * np.eye(2)
        assert np.allclose(comp.cov, expected_cov, atol=1e-10)
        assert model.n_iter <= 2
        assert np.abs(comp.mean).max() < 0.2
        assert np.abs(comp.cov - np.eye(2)).max() < 0.2

    def test_loglik_trace_monotone(self):
        rng = np.random.default_rng(9)
        data = np.concatenate([rng.normal(-3, 1, (150, 1)), rng.normal(3, 1.5, (150, 1))])
        model = em_fit(data, 3, seed=1)
        diffs = np.diff(model.ll_trace)
        assert np.all(diffs >= -1e-8)

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            em_fit(np.zeros((5, 1)), 5, seed=0)
        with pytest.raises(ValidationError):
            em_fit(np.array([[np.nan], [0.0], [1.0]]), 1, seed=0)


@pytest.fixture(scope="module")
def blobs():
    rng = np.random.default_rng(3)
    return np.concatenate([rng.normal(-10, 1, (150, 1)), rng.normal(10, 1, (150, 1))])


class TestSelectModel:
    def test_bic_picks_two(self, blobs):
        model = select_model(blobs, 1, 5, "bic", seed=0)
        assert model.K == 2
        scores = {k: v[0] for k, v in model.criterion_scores.items()}
        assert scores[2] < scores[1] and scores[2] < scores[3]
        assert set(scores) == {1, 2, 3, 4, 5}

    def test_deterministic(self, blobs):
        a = select_model(blobs, 1, 4, "bic", seed=7)
        b = select_model(blobs, 1, 4, "bic", seed=7)
        assert a.to_dict() == b.to_dict()

    def test_aic_selects_at_least_bic_k(self):
        # AIC penalises less, so its K should usually dominate BIC's
        rng = np.random.default_rng(0)
        wins = 0
        for s in range(20):
            data = np.concatenate(
                [rng.normal(-4, 1, (60, 1)), rng.normal(4, 1.3, (60, 1))]
            )
            cand, _ = fit_candidates(data, 1, 4, seed=s, cfg=EMConfig(reps=3))
            k_bic = select_model(data, 1, 4, "bic", s, candidates=cand).K
            k_aic = select_model(data, 1, 4, "aic", s, candidates=cand).K
            wins += k_aic >= k_bic
        assert wins >= 18  # 90% of 20 seeds

    def test_bad_criterion(self, blobs):
        with pytest.raises(ValidationError):
            select_model(blobs, 1, 2, "hqc", seed=0)


class TestMapAssign:
    def test_clear_assignment(self):
        m = mix1d((0.5, -5.0, 1.0), (0.5, 5.0, 1.0))
        model = FittedModel(m, 0.0, 5, 10, {}, None, 0)
        labels = map_assign(model, np.array([[-5.0], [5.0]]))
        assert labels.tolist() == [0, 1]

    def test_tie_breaks_to_lowest_index(self):
        m = mix1d((0.5, 0.0, 1.0), (0.5, 0.0, 1.0))
        model = FittedModel(m, 0.0, 5, 10, {}, None, 0)
        assert map_assign(model, np.array([[0.0]])).tolist() == [0]

    def test_matches_bruteforce_posterior(self):
        params = [(0.2, -2.0, 0.7), (0.5, 0.0, 1.0), (0.3, 3.0, 2.0)]
        m = mix1d(*params)
        model = FittedModel(m, 0.0, 8, 100, {}, None, 0)
        rng = np.random.default_rng(12)
        xs = rng.uniform(-6, 8, 100)[:, None]
        labels = map_assign(model, xs)
        # normalised responsibilities computed independently
        post = np.stack([c * norm_pdf(xs[:, 0], mu, sd) for c, mu, sd in params], axis=1)
        post /= post.sum(axis=1, keepdims=True)
        assert np.array_equal(labels, np.argmax(post, axis=1))


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(1)
        data = np.concatenate([rng.normal(-5, 1, (100, 2)), rng.normal(5, 1, (100, 2))])
        model = em_fit(data, 2, seed=0)
        payload = json.loads(json.dumps(model.to_dict()))
        back = FittedModel.from_dict(payload, n_obs=model.n_obs)
        assert back.K == model.K and back.d == model.d
        assert back.log_likelihood == pytest.approx(model.log_likelihood)
        assert back.bic == pytest.approx(model.bic)
        x = rng.normal(0, 3, (20, 2))
        assert np.allclose(back.mixture.logpdf(x), model.mixture.logpdf(x))


@given(
    coefs=st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4),
    means=st.lists(st.floats(-20, 20), min_size=4, max_size=4),
    sds=st.lists(st.floats(0.1, 5.0), min_size=4, max_size=4),
    x=st.floats(-50, 50),
)
@settings(max_examples=60, deadline=None)
def test_pdf_positive_and_combination_identity(coefs, means, sds, x):
    total = sum(coefs)
    terms = [(c / total, means[i], sds[i]) for i, c in enumerate(coefs)]
    m = mix1d(*terms)
    assert pdf(m, [x]) > 0
    # a scaled combination evaluates to the weighted sum of its parts
    other = gauss1d(1.0, 2.0)
    mass, comb = scaled_combination([(0.3, m), (0.2, other)])
    assert mass == pytest.approx(0.5)
    lhs = mass * pdf(comb, [x])
    rhs = 0.3 * pdf(m, [x]) + 0.2 * pdf(other, [x])
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-280)
