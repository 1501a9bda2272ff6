import numpy as np
import pytest

from bayesmarkowitz.core_model import DiracPrior, DiscretePrior, GaussianPrior, MarketModel
from bayesmarkowitz.errors import DegenerateModelError, DomainError
from bayesmarkowitz.performance import (SharpeReport, log_abs_expm1, log_exponential_moments,
                                        nl_upper_bound, nl_wealth_moments, sharpe_learning,
                                        sharpe_learning_gaussian, sharpe_nonlearning,
                                        sharpe_nonlearning_gaussian, value_of_information)
from bayesmarkowitz.risk_premium import constant_drift_R, gaussian_M, gaussian_U


def test_log_abs_expm1():
    for a in (-30.0, -1e-8, 1e-8, 2.0, 800.0):
        if abs(a) < 700:
            assert log_abs_expm1(a) == pytest.approx(np.log(abs(np.expm1(a))), rel=1e-12)
    assert log_abs_expm1(800.0) == pytest.approx(800.0)
    assert log_abs_expm1(0.0) == -np.inf


class TestLearning:
    def test_trivial(self):
        assert sharpe_learning(0.0) == 0.0
        with pytest.raises(DomainError):
            sharpe_learning(-0.1)

    def test_dirac(self):
        m = MarketModel(0.05, 1.0)
        assert sharpe_learning(constant_drift_R([0.05], m, 0.0)) == pytest.approx(np.sqrt(np.e - 1))

    def test_asset1_hand_value(self):
        assert sharpe_learning_gaussian(0.05, 0.05, 0.1, 1.0) == pytest.approx(0.9288, abs=1e-4)

    def test_zero_prior_volatility(self):
        assert sharpe_learning_gaussian(0.05, 0.2, 0.0, 1.0) == pytest.approx(
            np.sqrt(np.expm1(0.0625)), rel=1e-14)

    @pytest.mark.parametrize("b0,s,s0,T", [(0.05, 0.05, 0.1, 1.0), (0.05, 0.2, 0.4, 1.0),
                                           (0.1, 0.05, 0.3, 2.0), (-0.03, 0.1, 0.8, 5.0)])
    def test_matches_riccati_coefficients(self, b0, s, s0, T):
        prior, model = GaussianPrior.from_volatility(b0, s0), MarketModel(s, T)
        r0 = b0 * b0 * gaussian_M(prior, model, 0.0)[0, 0] + gaussian_U(prior, model, 0.0)
        assert sharpe_learning_gaussian(b0, s, s0, T) == pytest.approx(sharpe_learning(r0), rel=1e-12)


class TestNonLearning:
    def test_dirac_equals_learning(self):
        m = MarketModel(0.05, 1.0)
        d = DiracPrior([0.05])
        assert sharpe_nonlearning(d, m) == pytest.approx(np.sqrt(np.e - 1), rel=1e-13)
        assert sharpe_nonlearning(d, m) == pytest.approx(nl_upper_bound([0.05], m), rel=1e-13)

    @pytest.mark.parametrize("b0,s,s0,T", [(0.05, 0.05, 0.1, 1.0), (0.05, 0.2, 0.4, 1.0),
                                           (0.1, 0.05, 0.05, 1.0), (0.05, 0.2, 0.75, 30.0)])
    def test_gaussian_explicit(self, b0, s, s0, T):
        prior, model = GaussianPrior.from_volatility(b0, s0), MarketModel(s, T)
        assert sharpe_nonlearning(prior, model) == pytest.approx(
            sharpe_nonlearning_gaussian(b0, s, s0, T), rel=1e-12)

    @pytest.mark.parametrize("b0,s,s0", [(0.05, 0.05, 0.1), (0.05, 0.2, 0.4), (0.1, 0.05, 0.05),
                                         (0.05, 0.1, 0.3)])
    def test_quadrature_cross_check(self, b0, s, s0):
        prior, model = GaussianPrior.from_volatility(b0, s0), MarketModel(s, 1.0)
        assert sharpe_nonlearning(prior, model, method="quadrature") == pytest.approx(
            sharpe_nonlearning(prior, model), abs=1e-8)

    def test_overflow_regime(self):
        # naive I2 overflows here
        prior, model = GaussianPrior.from_volatility(0.05, 1.0), MarketModel(0.05, 1.0)
        l1, l2 = log_exponential_moments(prior, model, 1.0)
        assert l2 > 700
        val = sharpe_nonlearning(prior, model)
        assert np.isfinite(val) and abs(val) < 1e-80

    def test_discrete_finite_sum(self):
        model = MarketModel(0.2, 1.0)
        prior = DiscretePrior(np.array([[0.0, 0.1, 0.2]]), np.array([0.2, 0.5, 0.3]))
        b0 = prior.mean[0]
        v = prior.support[0]
        i1 = np.sum(prior.weights * np.exp(-b0 * v / 0.04))
        i2 = np.sum(prior.weights * np.exp(-b0 * (2 * v - b0) / 0.04))
        assert sharpe_nonlearning(prior, model) == pytest.approx((1 - i1) / np.sqrt(i2 - i1 ** 2),
                                                                 rel=1e-12)

    def test_zero_mean_degenerate(self):
        with pytest.raises(DegenerateModelError):
            sharpe_nonlearning(GaussianPrior.from_volatility(0.0, 0.1), MarketModel(0.2, 1.0))

    def test_upper_bound(self):
        m = MarketModel(0.05, 1.0)
        assert nl_upper_bound([0.0], m) == 0.0
        bound = nl_upper_bound([0.05], m)
        for s0 in np.linspace(0.01, 1.0, 25):
            assert sharpe_nonlearning(GaussianPrior.from_volatility(0.05, s0), m) < bound


class TestWealthMoments:
    def test_start(self, asset8):
        mean, var = nl_wealth_moments(*asset8, 0.01, 0.0)
        assert mean == 0.0 and var == 0.0

    def test_dirac_terminal_variance(self):
        m = MarketModel(0.05, 1.0, x0=0.3)
        mean, var = nl_wealth_moments(DiracPrior([0.05]), m, 0.01, 1.0)
        assert var == pytest.approx(0.01, rel=1e-12)
        assert mean == pytest.approx(0.3 + np.sqrt(0.01 * (np.e - 1)), rel=1e-12)

    def test_ratio_is_sharpe(self, asset8):
        prior, model = asset8
        mean, var = nl_wealth_moments(prior, model, 0.01, 0.6)
        assert (mean - model.x0) / np.sqrt(var) == pytest.approx(
            sharpe_nonlearning(prior, model, 0.6), rel=1e-12)


class TestReport:
    def test_dirac_zero(self):
        r = value_of_information(DiracPrior([0.05]), MarketModel(0.05, 1.0))
        assert r.value_of_information == pytest.approx(0.0, abs=1e-12)

    def test_asset1(self):
        r = value_of_information(GaussianPrior.from_volatility(0.05, 0.1), MarketModel(0.05, 1.0), 0.01)
        assert r.value_of_information == pytest.approx(1.0, abs=0.1)
        assert r.sh_nonlearning <= r.nl_upper_bound
        row = r.csv_row()
        assert len(row) == len(SharpeReport.CSV_COLUMNS)
        assert row[2] == r.value_of_information

    def test_asset4_bump_points(self):
        m = MarketModel(0.05, 1.0)
        vi = {s0: value_of_information(GaussianPrior.from_volatility(0.1, s0), m).value_of_information
              for s0 in (0.02, 0.05, 0.1)}
        assert vi[0.05] > vi[0.02] and vi[0.05] > vi[0.1]

    def test_independent_of_budget_and_wealth(self, asset8):
        prior, _ = asset8
        vals = {value_of_information(prior, MarketModel(0.2, 1.0, x0=x0), th).sh_learning
                for x0 in (0.0, 5.0) for th in (0.01, 1.0)}
        assert len(vals) == 1

    def test_continuity_at_zero_prior_volatility(self):
        vi = [sharpe_learning_gaussian(0.05, 0.05, s0, 1) - sharpe_nonlearning_gaussian(0.05, 0.05, s0, 1)
              for s0 in (0.0, 1e-4, 1e-3)]
        assert vi[0] == pytest.approx(0.0, abs=1e-14)
        assert abs(vi[1]) < abs(vi[2]) < 1e-3

    def test_discrete_prior_uses_grid(self, two_point):
        prior, _ = two_point
        prior = DiscretePrior(np.array([[0.0, 0.1]]), np.array([0.5, 0.5]))
        r = value_of_information(prior, MarketModel(0.2, 1.0))
        assert r.value_of_information > 0


class TestMeasureChange:
    def test_matches_pde(self):
        from bayesmarkowitz.performance import discrete_r0_by_measure_change
        from bayesmarkowitz.risk_premium import GridSpec, solve_pde_1d
        prior = DiscretePrior(np.array([[0.0, 0.1]]), np.array([0.5, 0.5]))
        model = MarketModel(0.2, 1.0)
        r0 = discrete_r0_by_measure_change(prior, model)
        assert solve_pde_1d(prior, model, GridSpec(200, 1000)).r0 == pytest.approx(r0, rel=1e-3)

    def test_collapsing_support(self):
        from bayesmarkowitz.performance import discrete_r0_by_measure_change
        m = MarketModel(0.2, 1.0)
        prior = DiscretePrior(np.array([[0.05, 0.05 + 1e-9]]), np.array([0.5, 0.5]))
        assert discrete_r0_by_measure_change(prior, m) == pytest.approx(constant_drift_R([0.05], m, 0.0),
                                                                        rel=1e-7)

    def test_rejects_other_priors(self, asset8):
        from bayesmarkowitz.performance import discrete_r0_by_measure_change
        with pytest.raises(DomainError):
            discrete_r0_by_measure_change(*asset8)


def test_unrepresentable_sharpe_raises():
    from bayesmarkowitz.errors import NumericalError
    assert np.isfinite(sharpe_learning(1400.0))
    with pytest.raises(NumericalError, match="exceeds double precision"):
        sharpe_learning(1500.0)
