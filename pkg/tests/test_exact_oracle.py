"""Exact enumeration oracle: hand-counted cases, dual-path agreement,
distribution-distance bounds, and decay of the exact insecurity with n."""

import itertools
import math

import numpy as np
import pytest

from quantaudit.exact_oracle import (
    DiscreteTask,
    ExactMisResult,
    erm_select,
    exact_mis,
    rate_curve,
    tv_distance,
)
from quantaudit.exceptions import (
    EnumerationTooLargeError,
    InvalidArgumentError,
    InvalidSpecError,
)


def uniform_task(loss_table):
    loss_table = np.asarray(loss_table, dtype=np.float64)
    m = loss_table.shape[1]
    return DiscreteTask(sample_probs=np.full(m, 1.0 / m), loss_table=loss_table)


ANTISYMMETRIC = uniform_task([[0.0, 1.0], [1.0, 0.0]])
DOMINATED = uniform_task([[0.0, 0.0], [1.0, 1.0]])
# unique expected-loss minimizer (row 1: expected loss 0.45 < 0.5)
UNIQUE_MIN = uniform_task([[0.0, 1.0], [0.9, 0.0]])


class TestErmSelect:
    def test_dominated_row_always_wins(self):
        table = np.array([[0.1, 0.2], [0.5, 0.9]])
        for counts in [(1, 0), (0, 1), (3, 4)]:
            assert erm_select(np.array(counts), table) == 0

    def test_tie_breaks_low_index(self):
        table = np.array([[0.5, 0.5], [0.5, 0.5], [0.6, 0.6]])
        assert erm_select(np.array([1, 1]), table) == 0

    def test_matches_naive_recomputation(self):
        rng = np.random.default_rng(0)
        table = rng.uniform(size=(3, 3))
        for dataset in itertools.product(range(3), repeat=2):
            counts = np.bincount(dataset, minlength=3)
            naive_losses = [
                sum(table[k][z] for z in dataset) for k in range(3)
            ]
            naive = min(range(3), key=lambda k: (naive_losses[k], k))
            assert erm_select(counts, table) == naive

    def test_zero_counts_rejected(self):
        with pytest.raises(InvalidArgumentError):
            erm_select(np.zeros(3, dtype=int), np.ones((2, 3)))

    def test_shift_and_scale_invariance(self):
        rng = np.random.default_rng(1)
        table = rng.uniform(size=(4, 3))
        for _ in range(100):
            counts = rng.integers(0, 5, size=3)
            if counts.sum() == 0:
                continue
            base = erm_select(counts, table)
            assert erm_select(counts, table + 2.37) == base
            assert erm_select(counts, table * 3.5) == base


class TestTvDistance:
    def test_identical(self):
        assert tv_distance([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_disjoint(self):
        assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0

    def test_mismatched_lengths(self):
        with pytest.raises(InvalidArgumentError):
            tv_distance([1.0], [0.5, 0.5])

    def test_not_normalized(self):
        with pytest.raises(InvalidArgumentError):
            tv_distance([0.5, 0.4], [0.5, 0.5])

    def _random_dist(self, rng, k):
        v = rng.uniform(size=k)
        return v / v.sum()

    def test_metric_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            k = int(rng.integers(2, 8))
            p, q, r = (self._random_dist(rng, k) for _ in range(3))
            assert abs(tv_distance(p, q) - tv_distance(q, p)) < 1e-15
            assert tv_distance(p, p) < 1e-12
            assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12

    def test_first_coordinate_sandwich(self):
        # distributions with P(1)=1-a, Q(1)=1-b obey
        # |a-b| <= TV <= (|a-b| + a + b) / 2
        rng = np.random.default_rng(3)
        for _ in range(1000):
            k = int(rng.integers(2, 9))
            a, b = rng.uniform(0.01, 0.99, size=2)
            p_rest = self._random_dist(rng, k - 1) * a
            q_rest = self._random_dist(rng, k - 1) * b
            p = np.concatenate([[1 - a], p_rest])
            q = np.concatenate([[1 - b], q_rest])
            tv = tv_distance(p, q)
            assert abs(a - b) <= tv + 1e-12
            assert tv <= (abs(a - b) + a + b) / 2 + 1e-12


class TestExactMis:
    def test_dominated_table_fully_private(self):
        for method in ("multinomial", "ordered"):
            res = exact_mis(DOMINATED, 3, method=method)
            assert res.tv == pytest.approx(0.0, abs=1e-14)
            assert res.mis == pytest.approx(1.0, abs=1e-14)

    def test_antisymmetric_hand_enumeration(self):
        # n=1: model equals the sample, joint = diag(1/2), product = 1/4 each
        for method in ("multinomial", "ordered"):
            res = exact_mis(ANTISYMMETRIC, 1, method=method)
            np.testing.assert_allclose(res.joint, np.diag([0.5, 0.5]), atol=1e-15)
            np.testing.assert_allclose(res.erm_dist, [0.5, 0.5], atol=1e-15)
            assert res.tv == pytest.approx(0.5, abs=1e-15)
            assert res.mis == pytest.approx(0.5, abs=1e-15)

    def test_dual_path_agreement(self):
        rng = np.random.default_rng(4)
        for trial in range(25):
            m = int(rng.integers(2, 5))
            k = int(rng.integers(2, 5))
            probs = rng.uniform(0.1, 1.0, size=m)
            probs /= probs.sum()
            task = DiscreteTask(sample_probs=probs, loss_table=rng.uniform(size=(k, m)))
            n = int(rng.integers(1, 7))
            if m ** n > 10 ** 5:
                continue
            fast = exact_mis(task, n, method="multinomial")
            slow = exact_mis(task, n, method="ordered")
            assert abs(fast.mis - slow.mis) < 1e-12
            np.testing.assert_allclose(fast.joint, slow.joint, atol=1e-12)
            np.testing.assert_allclose(fast.erm_dist, slow.erm_dist, atol=1e-12)

    def test_result_invariants(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m, k = int(rng.integers(2, 4)), int(rng.integers(2, 5))
            probs = rng.uniform(0.05, 1.0, size=m)
            probs /= probs.sum()
            task = DiscreteTask(sample_probs=probs, loss_table=rng.uniform(size=(k, m)))
            res = exact_mis(task, int(rng.integers(1, 6)))
            assert 0.0 <= res.mis <= 1.0
            assert abs(res.mis - (1.0 - res.tv)) < 1e-15
            np.testing.assert_allclose(res.joint.sum(), 1.0, atol=1e-10)
            np.testing.assert_allclose(res.erm_dist.sum(), 1.0, atol=1e-10)
            np.testing.assert_allclose(res.joint.sum(axis=1), res.erm_dist, atol=1e-10)

    def test_loss_table_shift_scale_invariance(self):
        rng = np.random.default_rng(6)
        probs = np.array([0.3, 0.7])
        table = rng.uniform(size=(3, 2))
        base = exact_mis(DiscreteTask(sample_probs=probs, loss_table=table), 4)
        shifted = exact_mis(DiscreteTask(sample_probs=probs, loss_table=table + 1.25), 4)
        scaled = exact_mis(DiscreteTask(sample_probs=probs, loss_table=table * 7.0), 4)
        assert shifted.mis == base.mis
        assert scaled.mis == base.mis

    def test_enumeration_guard(self):
        task = uniform_task(np.ones((2, 10)))
        with pytest.raises(EnumerationTooLargeError):
            exact_mis(task, 8)

    def test_bad_n(self):
        with pytest.raises(InvalidArgumentError):
            exact_mis(ANTISYMMETRIC, 0)


class TestRateCurve:
    def test_dominated_rate_infinite(self):
        curve = rate_curve(DOMINATED, [1, 2, 4])
        for _, mis, rate in curve:
            assert mis == pytest.approx(1.0, abs=1e-14)
            assert rate == math.inf

    def test_antisymmetric_mis_increases(self):
        curve = rate_curve(ANTISYMMETRIC, [1, 2, 4, 8])
        mis_values = [mis for _, mis, _ in curve]
        assert all(b > a for a, b in zip(mis_values, mis_values[1:]))

    def test_unique_minimizer_rate_positive(self):
        curve = rate_curve(UNIQUE_MIN, [10])
        _, mis, rate = curve[0]
        assert mis < 1.0
        assert rate > 0.0

    def test_insecurity_decreases_with_n(self):
        curve = rate_curve(UNIQUE_MIN, [1, 2, 4, 8, 10])
        insecurity = [1.0 - mis for _, mis, _ in curve]
        assert all(b < a for a, b in zip(insecurity, insecurity[1:]))


class TestTaskValidation:
    def test_prob_sum(self):
        with pytest.raises(InvalidSpecError):
            DiscreteTask(sample_probs=[0.5, 0.4], loss_table=np.ones((1, 2)))

    def test_negative_probs(self):
        with pytest.raises(InvalidSpecError):
            DiscreteTask(sample_probs=[1.2, -0.2], loss_table=np.ones((1, 2)))

    def test_table_shape(self):
        with pytest.raises(InvalidSpecError):
            DiscreteTask(sample_probs=[0.5, 0.5], loss_table=np.ones((2, 3)))

    def test_non_finite_table(self):
        with pytest.raises(InvalidSpecError):
            DiscreteTask(sample_probs=[0.5, 0.5], loss_table=[[np.inf, 0.0]])

    def test_json_round_trip(self):
        task = DiscreteTask(sample_probs=[0.25, 0.75], loss_table=[[0.0, 1.0], [1.0, 0.0]],
                            names=["heads", "tails"])
        back = DiscreteTask.from_json(task.to_json())
        np.testing.assert_array_equal(back.sample_probs, task.sample_probs)
        np.testing.assert_array_equal(back.loss_table, task.loss_table)
        assert back.names == task.names
