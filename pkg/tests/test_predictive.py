import math

import numpy as np
import pytest
from scipy import stats

from speciesppf import (
    Composition,
    EstimatedPpf,
    LogisticNormalWeights,
    StickBreakingWeights,
    compositions,
    dp_eppf,
    dp_ppf,
    empirical_partition_distribution,
    estimate_ppf,
    fixed_weights,
    partition_law_oracle,
    ppf_curve,
    simulate_sss,
)
from speciesppf.exceptions import DegenerateWeights
from speciesppf.partitions import sequence_count
from speciesppf.predictive import importance_draws


def dp_truth(sizes, theta):
    return np.array([*sizes, theta]) / (sum(sizes) + theta)


class TestEstimatePpf:
    def test_dp_singleton(self):
        est = estimate_ppf(StickBreakingWeights(1.0), (1,), 50_000, seed=1)
        np.testing.assert_allclose(est.probabilities, [0.5, 0.5], atol=0.01)

    def test_dp_three_one(self):
        est = estimate_ppf(StickBreakingWeights(1.0), (3, 1), 50_000, seed=2)
        np.testing.assert_allclose(est.probabilities, [0.6, 0.2, 0.2], atol=0.02)

    def test_single_atom_exact(self):
        est = estimate_ppf(fixed_weights([1.0]), (4,), 10, seed=0)
        np.testing.assert_array_equal(est.probabilities, [1.0, 0.0])

    def test_invariants(self):
        est = estimate_ppf(LogisticNormalWeights(1, 5, 1), (2, 2, 1), 3000, seed=3)
        assert abs(est.probabilities.sum() - 1) <= 1e-12
        assert np.all(est.standard_errors > 0)
        assert 1 <= est.effective_sample_size <= 3000
        assert est.draws == 3000 and est.seed == "3"

    def test_log_eppf_estimates_dp_eppf(self):
        est = estimate_ppf(StickBreakingWeights(2.0), (2, 1), 40_000, seed=5)
        assert math.exp(est.log_eppf) == pytest.approx(dp_eppf((2, 1), 2.0), rel=0.03)

    def test_worker_count_does_not_matter(self):
        a = estimate_ppf(LogisticNormalWeights(), (2, 1), 10_000, seed=7, n_jobs=1)
        b = estimate_ppf(LogisticNormalWeights(), (2, 1), 10_000, seed=7, n_jobs=3)
        np.testing.assert_array_equal(a.probabilities, b.probabilities)
        np.testing.assert_array_equal(a.standard_errors, b.standard_errors)

    def test_degenerate(self):
        with pytest.raises(DegenerateWeights):
            estimate_ppf(fixed_weights([0.5, 0.5]), (1, 1, 1), 50, seed=0)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            estimate_ppf(StickBreakingWeights(1.0), (1,), 0, seed=0)
        with pytest.raises(ValueError):
            estimate_ppf(StickBreakingWeights(1.0), (10_001,), 10, seed=0)

    def test_stderr_scales_with_root_draws(self):
        model = LogisticNormalWeights(1, 5, 1)
        ratios = []
        for s in range(20):
            small = estimate_ppf(model, (2, 1), 2000, seed=100 + s)
            big = estimate_ppf(model, (2, 1), 8000, seed=200 + s)
            ratios.append(big.standard_errors[0] / small.standard_errors[0])
        assert 0.4 <= np.mean(ratios) <= 0.6

    def test_stderr_is_calibrated(self):
        # spread of independent estimates agrees with the reported standard error
        model = StickBreakingWeights(1.0)
        ests = [estimate_ppf(model, (2, 1), 2000, seed=300 + s) for s in range(60)]
        values = np.array([e.probabilities[0] for e in ests])
        reported = np.mean([e.standard_errors[0] for e in ests])
        assert 0.7 < values.std(ddof=1) / reported < 1.4


class TestEstimatedPpf:
    def test_memoized_and_symmetric(self):
        ppf = EstimatedPpf(LogisticNormalWeights(1, 5, 1), 20_000, seed=4)
        first = ppf((2, 1))
        assert ppf((2, 1)) is not None and np.array_equal(ppf((2, 1)), first)
        swapped = ppf((1, 2))
        e1, e2 = ppf.estimate((2, 1)), ppf.estimate((1, 2))
        se = math.hypot(e1.standard_errors[0], e2.standard_errors[1])
        assert abs(first[0] - swapped[1]) < 3 * se


class TestCurve:
    def test_dp_points_on_line(self):
        theta = 1.0
        curve = ppf_curve(StickBreakingWeights(theta), list(compositions(4)), 20_000, seed=0)
        for row in curve.rows:
            truth = (row["n_j"] or theta) / (4 + theta)
            assert abs(row["estimate"] - truth) < 4 * row["stderr"] + 1e-3
        means = curve.by_size()
        assert set(means) == {0, 1, 2, 3, 4}
        assert means[0] == pytest.approx(theta / 5, abs=0.01)

    def test_new_cluster_column_at_zero(self):
        curve = ppf_curve(StickBreakingWeights(1.0), [(2, 1)], 500, seed=0)
        assert [r["n_j"] for r in curve.rows] == [2, 1, 0]

    def test_logistic_varies_across_compositions(self):
        # unlike the DP, equal cluster sizes in different compositions get
        # different predictive probabilities
        curve = ppf_curve(LogisticNormalWeights(1, 5, 1), [(5, 1), (2, 2, 1, 1)], 40_000, seed=1)
        ones = [r for r in curve.rows if r["n_j"] == 1]
        a, b = ones[0], ones[1]
        assert abs(a["estimate"] - b["estimate"]) > 4 * math.hypot(a["stderr"], b["stderr"])
        # and the cluster-size ratio departs from proportionality (DP gives 5)
        big, small = curve.rows[0], curve.rows[1]
        assert big["estimate"] / small["estimate"] < 4.8

    def test_needs_scenarios(self):
        with pytest.raises(ValueError):
            ppf_curve(StickBreakingWeights(1.0), [], 10, 0)


class TestSimulate:
    def test_tiny_theta_single_cluster(self):
        assert simulate_sss(dp_ppf(1e-12), 5, seed=0) == [0, 0, 0, 0, 0]

    def test_length_one(self):
        assert simulate_sss(dp_ppf(3.0), 1, seed=9) == [0]

    def test_second_label_fair(self):
        reps = 4000
        new = sum(simulate_sss(dp_ppf(1.0), 2, seed=s)[1] for s in range(reps))
        assert abs(new / reps - 0.5) < 3 * math.sqrt(0.25 / reps)

    def test_labels_in_order_of_appearance(self):
        labels = simulate_sss(dp_ppf(5.0), 40, seed=1)
        assert all(labels[i] <= max(labels[:i]) + 1 for i in range(1, 40))


def _chi_square(freq, probs, reps):
    comps = sorted(probs, key=lambda c: c.sizes)
    observed = np.array([freq[c] * reps for c in comps])
    expected = np.array([probs[c] for c in comps])
    expected = expected / expected.sum() * reps
    return stats.chisquare(observed, expected).pvalue


class TestPartitionLaw:
    def test_dp_simulation_matches_eppf(self):
        reps = 10_000
        freq = empirical_partition_distribution(dp_ppf(1.0), 3, reps, seed=0)
        probs = {c: dp_eppf(c, 1.0) * sequence_count(c) for c in compositions(3)}
        assert sum(probs.values()) == pytest.approx(1.0)
        assert _chi_square(freq, probs, reps) > 0.001

    def test_oracle_matches_dp_closed_form(self):
        oracle = partition_law_oracle(StickBreakingWeights(1.0), 3, 50_000, seed=1)
        for comp, value in oracle.items():
            assert value == pytest.approx(dp_eppf(comp, 1.0) * sequence_count(comp), abs=0.01)

    def test_length_one(self):
        assert empirical_partition_distribution(dp_ppf(1.0), 1, 10, seed=0) == {Composition((1,)): 1.0}

    def test_enumeration_guard(self):
        with pytest.raises(ValueError):
            empirical_partition_distribution(dp_ppf(1.0), 6, 10, seed=0)


def test_importance_draw_shapes():
    log_w, v = importance_draws(StickBreakingWeights(1.0), (2, 1), 5000, seed=0)
    assert log_w.shape == (5000,) and v.shape == (5000, 3)
    np.testing.assert_allclose(v.sum(1), 1.0, atol=1e-12)
