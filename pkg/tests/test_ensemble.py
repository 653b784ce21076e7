import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from catprobe.ensemble import (
    MomentAccumulator,
    WeightedEnsemble,
    averaged_density_matrix,
    estimate_moments,
    ks_uniform_statistic,
    lift_to_states,
    localization_correlator,
    synthetic_scenario,
    uniformity_test,
)
from catprobe.errors import DataError, EstimationError
from catprobe.qstate import TwoLevelState

probs = st.lists(st.floats(0, 1), min_size=2, max_size=60)
weights = st.floats(1e-3, 10)


class TestEstimateMoments:
    def test_point_mass(self):
        rep = estimate_moments([(1.0, 0.5)] * 10, k_max=6)
        assert all(rep.moment(k) == 2.0 ** -k for k in range(1, 7))

    def test_two_point_mass(self):
        rep = estimate_moments([(0.5, 0.0), (0.5, 1.0)], k_max=5)
        assert all(rep.moment(k) == 0.5 for k in range(1, 6))

    def test_uniform_calibration(self):
        p = np.random.default_rng(11).random(100_000)
        rep = estimate_moments(WeightedEnsemble.from_samples(p), k_max=4)
        for k in range(1, 5):
            assert abs(rep.moment(k) - 1 / (1 + k)) <= 3 * rep.error(k)

    def test_stderr_matches_unweighted_formula(self):
        p = np.random.default_rng(2).random(500)
        rep = estimate_moments(WeightedEnsemble.from_samples(p), k_max=2)
        assert rep.error(2) == pytest.approx(np.std(p ** 2, ddof=1) / math.sqrt(500), rel=1e-10)

    def test_effective_sample_size(self):
        rep = estimate_moments([(3.0, 0.1), (1.0, 0.2), (1.0, 0.9)], k_max=1)
        assert rep.n_eff == pytest.approx(25 / 11)

    def test_errors(self):
        with pytest.raises(EstimationError):
            estimate_moments([], k_max=2)
        with pytest.raises(EstimationError):
            estimate_moments([(1.0, 0.2)], k_max=2)
        with pytest.raises(DataError):
            estimate_moments([(1.0, 0.2), (1.0, 1.5)], k_max=2)

    @given(probs)
    def test_monotone_and_bounded(self, p):
        rep = estimate_moments(WeightedEnsemble.from_samples(p), k_max=4)
        assert np.all((rep.estimate >= 0) & (rep.estimate <= 1))
        for k in range(1, 4):
            assert rep.moment(k + 1) <= rep.moment(k) + 2 * math.hypot(rep.error(k), rep.error(k + 1)) + 1e-15


class TestCorrelator:
    def test_collapsed_is_zero(self):
        ens = WeightedEnsemble.from_samples([0, 1, 1, 0, 1], [0.1, 0.3, 0.2, 0.25, 0.15])
        assert localization_correlator(ens) == 0.0

    def test_delocalized_is_quarter(self):
        assert localization_correlator(WeightedEnsemble.from_samples([0.5] * 7)) == 0.25

    def test_uniform_is_one_sixth(self):
        p = np.random.default_rng(5).random(100_000)
        ens = WeightedEnsemble.from_samples(p)
        rep = estimate_moments(ens, k_max=2)
        assert abs(localization_correlator(ens) - 1 / 6) <= 3 * rep.correlator_stderr

    def test_empty(self):
        with pytest.raises(EstimationError):
            localization_correlator(WeightedEnsemble(np.zeros(0), np.zeros(0)))

    @given(probs, st.data())
    def test_identity_and_bounds(self, p, data):
        w = data.draw(st.lists(weights, min_size=len(p), max_size=len(p)))
        ens = WeightedEnsemble.from_samples(p, w)
        c = localization_correlator(ens)
        rep = estimate_moments(ens, k_max=2)
        assert abs(c - (rep.moment(1) - rep.moment(2))) <= 1e-12
        assert 0 <= c <= 0.25
        if c == 0.25:
            assert np.all(ens.p == 0.5)

    def test_quarter_only_at_half(self):
        ens = WeightedEnsemble.from_samples([0.5, 0.5, 0.5 + 1e-4])
        assert localization_correlator(ens) < 0.25


class TestDensityMatrix:
    def test_single_pure_state(self):
        rho = averaged_density_matrix([(1.0, TwoLevelState.symmetric())])
        assert abs(rho.rho_LR - 0.5) <= 1e-15

    def test_dephasing_by_mixture(self):
        states = [(1.0, TwoLevelState.symmetric(1)), (1.0, TwoLevelState.symmetric(-1))]
        rho = averaged_density_matrix(states)
        np.testing.assert_allclose(rho.rho, np.diag([0.5, 0.5]), atol=1e-15)
        for _, psi in states:
            assert abs(psi.p_left - 0.5) < 1e-15

    def test_empty(self):
        with pytest.raises(EstimationError):
            averaged_density_matrix([])


class TestUniformity:
    def test_point_mass(self):
        rep = estimate_moments(WeightedEnsemble.from_samples([0.5] * 200))
        assert uniformity_test(rep) == 0.5

    def test_two_point(self):
        rep = estimate_moments(WeightedEnsemble.from_samples([0.0, 1.0] * 100))
        assert uniformity_test(rep) == 0.5

    def test_too_few_samples(self):
        rep = estimate_moments(WeightedEnsemble.from_samples(np.linspace(0, 1, 50)))
        with pytest.raises(EstimationError):
            uniformity_test(rep)

    @settings(max_examples=30)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=200))
    def test_matches_scipy(self, p):
        assert ks_uniform_statistic(p) == pytest.approx(stats.kstest(p, "uniform").statistic, abs=1e-12)

    def test_weighted_equals_replicated(self):
        p = np.array([0.1, 0.7, 0.4])
        assert ks_uniform_statistic(p, [2, 1, 3]) == pytest.approx(
            ks_uniform_statistic(np.repeat(p, [2, 1, 3])), abs=1e-15)

    def test_uniform_samples_pass_at_one_percent(self):
        n = 100_000
        passed = sum(
            ks_uniform_statistic(np.random.default_rng(seed).random(n)) < 1.63 / math.sqrt(n)
            for seed in range(100)
        )
        assert passed >= 99


class TestAccumulator:
    @given(probs, probs, probs)
    def test_merge_matches_concatenation(self, a, b, c):
        def acc(*parts):
            m = MomentAccumulator(k_max=4)
            for part in parts:
                m.add(part)
            return m
        whole = acc(a, b, c).report()
        left = acc(a).merge(acc(b)).merge(acc(c)).report()
        right = acc(a).merge(acc(b).merge(acc(c))).report()
        for other in (left, right):
            np.testing.assert_allclose(other.estimate, whole.estimate, atol=1e-12, rtol=0)
            np.testing.assert_allclose(other.density, whole.density, atol=1e-12, rtol=0)
            assert other.ks_statistic == pytest.approx(whole.ks_statistic, abs=1e-12)

    def test_merge_order_independent(self):
        rng = np.random.default_rng(9)
        parts = [rng.random(1000) for _ in range(8)]
        accs = [MomentAccumulator(k_max=4).add(p) for p in parts]
        fwd = accs[0]
        for a in accs[1:]:
            fwd = fwd.merge(a)
        rev = accs[-1]
        for a in accs[-2::-1]:
            rev = rev.merge(a)
        np.testing.assert_allclose(fwd.report().estimate, rev.report().estimate, atol=1e-15, rtol=0)

    def test_undefined_before_samples(self):
        with pytest.raises(EstimationError):
            MomentAccumulator().report()

    def test_histogram(self):
        rep = MomentAccumulator(k_max=1).add([0.0, 0.01, 0.5, 1.0]).report()
        assert len(rep.density) == 50
        assert rep.density.sum() * 0.02 == pytest.approx(1.0)
        assert rep.density[0] == pytest.approx(0.5 * 50)
        assert rep.density[-1] == pytest.approx(0.25 * 50)


class TestSyntheticScenarios:
    def test_collapsed(self):
        ens = synthetic_scenario("collapsed", 10, seed=1)
        assert localization_correlator(ens) == 0.0
        assert ens.mean() == 0.5
        assert sorted(set(ens.p)) == [0.0, 1.0]

    def test_delocalized(self):
        ens = synthetic_scenario("delocalized", 10)
        assert localization_correlator(ens) == 0.25
        assert ens.mean() == 0.5

    def test_uniform(self):
        ens = synthetic_scenario("uniform", 100_000, seed=3)
        rep = estimate_moments(ens, k_max=2)
        assert abs(localization_correlator(ens) - 1 / 6) <= 3 * rep.correlator_stderr
        assert abs(ens.mean() - 0.5) <= 3 * rep.error(1)

    def test_odd_collapsed(self):
        ens = synthetic_scenario("collapsed", 7, seed=0)
        assert localization_correlator(ens) == 0.0
        assert abs(ens.mean() - 0.5) <= 1 / 14

    def test_seeded(self):
        a = synthetic_scenario("uniform", 50, seed=4)
        b = synthetic_scenario("uniform", 50, seed=4)
        np.testing.assert_array_equal(a.p, b.p)

    def test_bad_input(self):
        with pytest.raises(DataError):
            synthetic_scenario("collapsed", 0)
        with pytest.raises(DataError):
            synthetic_scenario("sideways", 3)

    @pytest.mark.parametrize("n", [2, 10, 1000])
    def test_density_matrix_degeneracy(self, n):
        collapsed = synthetic_scenario("collapsed", n, seed=2)
        deloc = synthetic_scenario("delocalized", n)
        for ens in (collapsed, deloc):
            rho = averaged_density_matrix(lift_to_states(ens))
            np.testing.assert_allclose(rho.rho, np.diag([0.5, 0.5]), atol=1e-10)
        assert localization_correlator(collapsed) == 0.0
        assert localization_correlator(deloc) == 0.25


def test_ensemble_validation():
    with pytest.raises(DataError):
        WeightedEnsemble([0.5, 0.4], [0.1, 0.2])
    with pytest.raises(DataError):
        WeightedEnsemble([1.5, -0.5], [0.1, 0.2])
    with pytest.raises(DataError):
        WeightedEnsemble([0.5, 0.5], [0.1, 1.1])
