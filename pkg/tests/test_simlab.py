import numpy as np
import pytest

from hybridclust.dissim import Measure
from hybridclust.errors import ValidationError
from hybridclust.simlab import (
    FAMILIES,
    LabeledSample,
    ScenarioC,
    generate,
    min_misclassification,
    misclassification_rate,
    run_experiment,
)

from helpers import exhaustive_min_misclassification


class TestScenario:
    def test_sizes_small(self):
        scn = ScenarioC("student_t", 2, "small")
        assert scn.cluster_sizes == (200, 200, 100)
        assert scn.n_noise == 0

    def test_sizes_large_3d(self):
        scn = ScenarioC("cauchy", 3, "large")
        assert scn.cluster_sizes == (3000, 3000, 1500)

    def test_noise_count(self):
        assert ScenarioC("gauss_noise", 3, "small").n_noise == 150
        assert ScenarioC("gauss_noise", 2, "small").n_noise == 100

    def test_validation(self):
        with pytest.raises(ValidationError):
            ScenarioC("weibull", 2, "small")
        with pytest.raises(ValidationError):
            ScenarioC("uniform", 4, "small")


class TestGenerate:
    def test_student_t_counts(self):
        s = generate(ScenarioC("student_t", 2, "small"), seed=0)
        assert s.points.shape == (500, 2)
        assert np.bincount(s.true_labels).tolist() == [200, 200, 100]
        assert not s.noise_mask.any()

    def test_gauss_noise_counts(self):
        s = generate(ScenarioC("gauss_noise", 3, "small"), seed=0)
        assert s.points.shape == (900, 3)
        assert int(s.noise_mask.sum()) == 150
        assert np.all(s.true_labels[s.noise_mask] == -1)
        assert set(np.unique(s.true_labels[~s.noise_mask])) == {0, 1, 2}

    def test_student_t_large_cluster_means(self):
        # nu=2 has a finite mean, so empirical cluster means track the
        # configured locations
        s = generate(ScenarioC("student_t", 2, "large"), seed=0)
        mus = [[0.0, 0.0], [20.0, 15.0], [15.0, -15.0]]
        for c in range(3):
            emp = s.points[s.true_labels == c].mean(axis=0)
            assert np.all(np.abs(emp - mus[c]) < 0.5), (c, emp)

    def test_gamma_marginal_means(self):
        # additive construction: E[Y_j] = mu_j + gamma_j * (alpha_0 + alpha_j)
        s = generate(ScenarioC("gamma", 2, "large"), seed=1)
        expected = {
            0: np.array([0.0 + (1 + 2), 0.0 + (1 + 4)]),
            1: np.array([0.0 + (0.5 + 1), -2.0 + (0.5 + 2)]),
            2: np.array([10.0 + (2 + 2), 10.0 + (2 + 5)]),
        }
        for c, mu in expected.items():
            emp = s.points[s.true_labels == c].mean(axis=0)
            assert np.all(np.abs(emp - mu) < 0.4), (c, emp, mu)

    def test_uniform_inside_boxes(self):
        s = generate(ScenarioC("uniform", 2, "small"), seed=2)
        c0 = s.points[s.true_labels == 0]
        assert c0.min() >= -5 and c0.max() <= 6

    def test_gauss_laplace_cluster_means(self):
        s = generate(ScenarioC("gauss_laplace", 2, "large"), seed=3)
        mus = [[0.0, 0.0], [15.0, -5.0], [5.0, -10.0]]
        for c in range(3):
            emp = s.points[s.true_labels == c].mean(axis=0)
            assert np.all(np.abs(emp - mus[c]) < 0.3)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_deterministic_per_seed(self, family):
        scn = ScenarioC(family, 2, "small")
        a = generate(scn, seed=7)
        b = generate(scn, seed=7)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.true_labels, b.true_labels)

    def test_cauchy_label_counts_only(self):
        # no moment checks: the Cauchy mean does not exist
        s = generate(ScenarioC("cauchy", 2, "small"), seed=5)
        assert np.bincount(s.true_labels).tolist() == [200, 200, 100]


class TestMisclassificationRate:
    def test_permuted_labels_are_perfect(self):
        true = np.array([0] * 5 + [1] * 5 + [2] * 5)
        final = np.array([2] * 5 + [0] * 5 + [1] * 5)
        assert misclassification_rate(final, true) == 0.0

    def test_degenerate_single_label_rejected(self):
        true = np.repeat([0, 1, 2], 100)
        final = np.zeros(300, dtype=int)
        with pytest.raises(ValidationError):
            misclassification_rate(final, true)

    def test_two_class_confusion(self):
        # confusion {50, 2 / 3, 40}: best bijection leaves 5 errors of 95
        true = np.array([0] * 52 + [1] * 43)
        final = np.array([0] * 50 + [1] * 2 + [0] * 3 + [1] * 40)
        assert misclassification_rate(final, true) == pytest.approx(5 / 95)

    def test_noise_mask_excluded(self):
        true = np.array([0, 0, 1, 1, -1, -1])
        final = np.array([1, 1, 0, 0, 0, 1])
        mask = true < 0
        assert misclassification_rate(final, true, mask) == 0.0

    def test_explicit_cluster_count_allows_empty_final(self):
        true = np.repeat([0, 1, 2], 10)
        final = np.array([0] * 10 + [1] * 10 + [1] * 10)
        rate = misclassification_rate(final, true, n_clusters=3)
        assert rate == pytest.approx(10 / 30)


class TestMinMisclassification:
    def test_pure_subclusters(self):
        true = np.repeat([0, 1, 2], 20)
        maps = np.repeat([0, 1, 2, 3, 4, 5], 10)
        assert min_misclassification(maps, true) == 0.0

    def test_single_mixed_subcluster(self):
        true = np.array([0] * 50 + [1] * 2 + [1] * 40 + [2] * 30)
        maps = np.array([0] * 52 + [1] * 40 + [2] * 30)
        assert min_misclassification(maps, true) == pytest.approx(2 / 122)

    def test_fewer_subclusters_than_classes_rejected(self):
        true = np.repeat([0, 1, 2], 5)
        maps = np.repeat([0, 1], [8, 7])
        with pytest.raises(ValidationError):
            min_misclassification(maps, true)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(2024)
        for _ in range(60):
            K = int(rng.integers(3, 13))
            n = int(rng.integers(30, 120))
            true = rng.integers(0, 3, n)
            maps = rng.integers(0, K, n)
            # ensure every subcluster index occurs so K is well-defined
            maps[:K] = np.arange(K)
            got = min_misclassification(maps, true)
            want = exhaustive_min_misclassification(maps, true)
            assert got == pytest.approx(want), (K, n)

    def test_lower_bounds_any_grouping(self):
        rng = np.random.default_rng(77)
        true = rng.integers(0, 3, 200)
        maps = rng.integers(0, 6, 200)
        maps[:6] = np.arange(6)
        floor = min_misclassification(maps, true)
        for trial in range(20):
            grouping = rng.integers(0, 3, 6)
            grouping[:3] = np.arange(3)
            finals = grouping[maps]
            assert misclassification_rate(finals, true, n_clusters=3) >= floor - 1e-12


@pytest.fixture(scope="module")
def tiny_result():
    scn = ScenarioC("uniform", 2, "small")
    return run_experiment(
        scn, [Measure.KLINF, Measure.BHAT], ["bic"], reps=2, C=3, base_seed=0,
        k_min=2, k_max=5, integration="importance", is_samples=20_000,
    )


class TestRunExperiment:
    def test_rows_and_summary_shape(self, tiny_result):
        assert {r.measure for r in tiny_result.rows} <= {"klinf", "bhat"}
        assert all(r.criterion == "bic" for r in tiny_result.rows)
        assert len(tiny_result.summaries) == 2

    def test_excess_nonnegative(self, tiny_result):
        for r in tiny_result.rows:
            assert r.excess >= -1e-12

    def test_deterministic_end_to_end(self, tiny_result):
        scn = ScenarioC("uniform", 2, "small")
        again = run_experiment(
            scn, [Measure.KLINF, Measure.BHAT], ["bic"], reps=2, C=3, base_seed=0,
            k_min=2, k_max=5, integration="importance", is_samples=20_000,
        )
        assert [(r.rep, r.measure, r.misclass, r.min_misclass) for r in again.rows] == [
            (r.rep, r.measure, r.misclass, r.min_misclass) for r in tiny_result.rows
        ]
        assert [s.mean_excess for s in again.summaries] == [
            s.mean_excess for s in tiny_result.summaries
        ]

    def test_ci_formula(self, tiny_result):
        import math

        for s in tiny_result.summaries:
            ex = [r.excess for r in tiny_result.rows if r.measure == s.measure]
            sd = float(np.std(ex, ddof=1)) if len(ex) > 1 else 0.0
            assert s.ci_halfwidth == pytest.approx(1.96 * sd / math.sqrt(len(ex)))
            if len(set(ex)) == 1:
                assert s.ci_halfwidth == 0.0

    def test_reps_validated(self):
        with pytest.raises(ValidationError):
            run_experiment(ScenarioC("uniform", 2, "small"), [Measure.KLINF], ["bic"],
                           reps=1, C=3, base_seed=0)
