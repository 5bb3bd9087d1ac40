"""Rank statistics: correlation oracles, orderings, resampled stability."""

import numpy as np
import pytest

from quantaudit.exceptions import (
    InvalidArgumentError,
    InvalidSpecError,
    UndefinedCorrelationError,
    UndefinedRatioError,
)
from quantaudit.ranking import (
    RunMatrix,
    auroc,
    r_squared,
    rank_quantizers,
    relative_performance,
    spearman,
    stability_analysis,
)


def average_ranks(values):
    """Independent mean-rank assignment (ties share the average position)."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def naive_spearman(xs, ys):
    rx, ry = average_ranks(xs), average_ranks(ys)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx ** 2).sum() * (ry ** 2).sum()))


class TestSpearman:
    def test_monotone(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_ties_match_naive_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(3, 20))
            xs = rng.integers(0, 5, size=n).astype(float)  # ties likely
            ys = rng.integers(0, 5, size=n).astype(float)
            try:
                got = spearman(xs, ys)
            except UndefinedCorrelationError:
                assert len(set(xs)) == 1 or len(set(ys)) == 1
                continue
            assert abs(got - naive_spearman(xs, ys)) < 1e-12

    def test_too_short(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([1.0], [2.0])

    def test_constant_input(self):
        with pytest.raises(UndefinedCorrelationError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=12)
        ys = rng.normal(size=12)
        base = spearman(xs, ys)
        assert spearman(np.exp(xs), ys) == pytest.approx(base, abs=1e-12)
        assert spearman(xs, 3.0 * ys + 7.0) == pytest.approx(base, abs=1e-12)


class TestRankQuantizers:
    def test_higher_metric_first(self):
        m = RunMatrix(["A", "B"], np.array([[0.1], [0.9]]))
        assert rank_quantizers(m) == ["B", "A"]

    def test_tie_alphabetical(self):
        m = RunMatrix(["zeta", "alpha"], np.array([[0.5], [0.5]]))
        assert rank_quantizers(m) == ["alpha", "zeta"]

    def test_single(self):
        m = RunMatrix(["only"], np.array([[0.3, 0.4]]))
        assert rank_quantizers(m) == ["only"]

    def test_permutation_of_names(self):
        rng = np.random.default_rng(2)
        names = [f"q{i}" for i in range(6)]
        m = RunMatrix(names, rng.normal(size=(6, 5)))
        assert sorted(rank_quantizers(m)) == sorted(names)

    def test_nan_rejected(self):
        with pytest.raises(InvalidSpecError):
            RunMatrix(["A"], np.array([[np.nan]]))


class TestStability:
    def _matrix(self, noise, seed=0, runs=30):
        rng = np.random.default_rng(seed)
        means = np.array([1.0, 2.0, 3.0, 4.0])
        values = means[:, None] + noise * rng.normal(size=(4, runs))
        return RunMatrix(["q1", "q2", "q3", "q4"], values)

    def test_full_size_reproduces_ranking(self):
        m = self._matrix(noise=0.5)
        report = stability_analysis(m, [m.n_runs], n_resamples=20, seed=1)
        rhos = report.spearman_vs_full[m.n_runs]
        np.testing.assert_allclose(rhos, 1.0)
        full = rank_quantizers(m)
        assert report.modal_ranking[m.n_runs] == full
        assert report.mean_rank_ranking[m.n_runs] == full

    def test_separated_means_concentrate(self):
        m = self._matrix(noise=0.01, seed=3)
        report = stability_analysis(m, [5], n_resamples=100, seed=4)
        hist = report.rank_histograms[5]
        # every quantizer lands on its modal rank >= 90% of the time
        assert (hist.max(axis=1) >= 90).all()

    def test_histograms_sum_to_resamples(self):
        m = self._matrix(noise=1.0, seed=5)
        report = stability_analysis(m, [3, 7], n_resamples=33, seed=6)
        for size in (3, 7):
            np.testing.assert_array_equal(report.rank_histograms[size].sum(axis=1), 33)

    def test_deterministic_given_seed(self):
        m = self._matrix(noise=1.0, seed=7)
        a = stability_analysis(m, [4], n_resamples=25, seed=8)
        b = stability_analysis(m, [4], n_resamples=25, seed=8)
        np.testing.assert_array_equal(a.rank_histograms[4], b.rank_histograms[4])
        np.testing.assert_array_equal(a.spearman_vs_full[4], b.spearman_vs_full[4])

    def test_oversized_subset_rejected(self):
        m = self._matrix(noise=1.0)
        with pytest.raises(InvalidArgumentError):
            stability_analysis(m, [m.n_runs + 1], n_resamples=5, seed=0)


class TestRelativePerformance:
    def test_paper_style_ratio(self):
        assert relative_performance(0.954, 0.996) == pytest.approx(0.958, abs=5e-4)

    def test_equal(self):
        assert relative_performance(0.5, 0.5) == 1.0

    def test_zero_numerator(self):
        assert relative_performance(0.0, 1.0) == 0.0

    def test_zero_reference(self):
        with pytest.raises(UndefinedRatioError):
            relative_performance(1.0, 0.0)


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_tied_scores(self):
        assert auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_matches_pairwise_brute_force(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(4, 30))
            labels = rng.integers(0, 2, size=n)
            if len(set(labels)) < 2:
                continue
            scores = rng.integers(0, 6, size=n).astype(float)  # ties likely
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
            brute = wins / (len(pos) * len(neg))
            assert abs(auroc(scores, labels) - brute) < 1e-12

    def test_complement_under_negation(self):
        rng = np.random.default_rng(10)
        scores = rng.normal(size=40)  # continuous: no ties
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        assert auroc(scores, labels) + auroc(-scores, labels) == pytest.approx(1.0, abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(InvalidArgumentError):
            auroc([0.1, 0.9], [1, 1])


def test_r_squared_perfect_and_mean():
    y = np.array([1.0, 2.0, 3.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(3, y.mean())) == 0.0
