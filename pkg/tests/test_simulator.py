import numpy as np
import pytest

from bayesmarkowitz.core_model import DiracPrior, DiscretePrior, GaussianPrior, MarketModel
from bayesmarkowitz.errors import DomainError, NumericalError
from bayesmarkowitz.performance import nl_wealth_moments, sharpe_nonlearning, value_of_information
from bayesmarkowitz.risk_premium import GridSpec, solve_pde_1d
from bayesmarkowitz.simulator import (PathEnsemble, SimulationSpec, StrategyKind, empirical_sharpe,
                                      ensemble_moments, path_generator, sharpe_standard_error,
                                      simulate)


@pytest.fixture(scope="module")
def ens8():
    prior, model = GaussianPrior.from_volatility(0.05, 0.4), MarketModel(0.2, 1.0)
    return simulate(SimulationSpec(model, prior, 0.01, 20_000, 100, seed=11, store_stride=10))


def test_spec_validation():
    model, prior = MarketModel(0.2, 1.0), DiracPrior([0.05])
    with pytest.raises(DomainError):
        SimulationSpec(model, prior, 0.0, 10)
    with pytest.raises(DomainError):
        SimulationSpec(model, prior, 0.01, 10, seed=-1)
    spec = SimulationSpec(model, prior, 0.01, 10, 250, store_stride=60, strategy_kind="learning")
    assert spec.strategy_kind is StrategyKind.LEARNING
    assert spec.dt * spec.n_steps == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_array_equal(spec.stored_steps(), [0, 60, 120, 180, 240, 250])


def test_path_streams_are_distinct_and_repeatable():
    a = path_generator(5, 0).standard_normal(4)
    np.testing.assert_array_equal(a, path_generator(5, 0).standard_normal(4))
    assert not np.array_equal(a, path_generator(5, 1).standard_normal(4))
    assert not np.array_equal(a, path_generator(6, 0).standard_normal(4))


def test_dirac_strategies_identical():
    spec = SimulationSpec(MarketModel(0.05, 1.0), DiracPrior([0.05]), 0.01, 500, 50, seed=3,
                          store_stride=5)
    e = simulate(spec)
    np.testing.assert_array_equal(e.x_learning, e.x_nonlearning)


def test_worker_count_does_not_change_results():
    prior, model = GaussianPrior.from_volatility(0.05, 0.4), MarketModel(0.2, 1.0)
    spec = SimulationSpec(model, prior, 0.01, 700, 20, seed=99, chunk_size=64, store_stride=4)
    base = simulate(spec, workers=1)
    for w in (4, 8):
        other = simulate(spec, workers=w)
        np.testing.assert_array_equal(base.x_learning, other.x_learning)
        np.testing.assert_array_equal(base.x_nonlearning, other.x_nonlearning)
        np.testing.assert_array_equal(base.b_hat, other.b_hat)


def test_prefix_property():
    # path i depends only on (seed, i): a smaller ensemble is a prefix of a larger one
    prior, model = GaussianPrior.from_volatility(0.05, 0.4), MarketModel(0.2, 1.0)
    small = simulate(SimulationSpec(model, prior, 0.01, 50, 10, seed=1, chunk_size=16))
    big = simulate(SimulationSpec(model, prior, 0.01, 120, 10, seed=1, chunk_size=32))
    np.testing.assert_array_equal(small.x_learning, big.x_learning[:50])


def test_start_moments(ens8):
    mo = ensemble_moments(ens8, 0)
    assert mo.mean == 0.0 and mo.variance == 0.0
    with pytest.raises(NumericalError):
        empirical_sharpe(ens8, 0)


def test_terminal_statistics(ens8):
    rep = value_of_information(ens8.spec.prior, ens8.spec.model)
    sh, se = empirical_sharpe(ens8), sharpe_standard_error(ens8)
    assert abs(sh - rep.sh_learning) < 3 * se
    mo = ensemble_moments(ens8)
    assert abs(mo.variance - 0.01) < 3 * mo.variance_se
    assert abs(mo.mean - np.sqrt(0.01 * np.expm1(rep.r0))) < 3 * mo.mean_se


def test_martingale_posterior_mean(ens8):
    for i in range(len(ens8.steps)):
        mo = ensemble_moments(ens8, i)
        assert abs(mo.b_hat_mean[0] - 0.05) <= 3 * mo.b_hat_se[0] + 1e-15


def test_nonlearning_matches_closed_form(ens8):
    prior, model = ens8.spec.prior, ens8.spec.model
    for i in (3, 6, len(ens8.steps) - 1):
        t = ens8.times[i]
        mean, var = nl_wealth_moments(prior, model, 0.01, t)
        mo = ensemble_moments(ens8, i, "nonlearning")
        assert abs(mo.mean - mean) < 3 * mo.mean_se
        assert abs(mo.variance - var) < 3 * mo.variance_se
        sh = empirical_sharpe(ens8, i, "nonlearning")
        assert abs(sh - sharpe_nonlearning(prior, model, t)) < 3 * sharpe_standard_error(ens8, i, "nonlearning")


def test_learning_beats_nonlearning(ens8):
    se = sharpe_standard_error(ens8) + sharpe_standard_error(ens8, -1, "nonlearning")
    assert empirical_sharpe(ens8) >= empirical_sharpe(ens8, -1, "nonlearning") - 3 * se


def test_step_halving_stable():
    prior, model = GaussianPrior.from_volatility(0.05, 0.4), MarketModel(0.2, 1.0)
    a = simulate(SimulationSpec(model, prior, 0.01, 20_000, 50, seed=2, strategy_kind="learning"))
    b = simulate(SimulationSpec(model, prior, 0.01, 20_000, 100, seed=2, strategy_kind="learning"))
    assert abs(empirical_sharpe(a) - empirical_sharpe(b)) < sharpe_standard_error(b)


def test_discrete_prior_with_grid():
    model = MarketModel(0.2, 1.0)
    prior = DiscretePrior(np.array([[-0.05, 0.15]]), np.array([0.5, 0.5]))
    rp = solve_pde_1d(prior, model, GridSpec(200, 400))
    e = simulate(SimulationSpec(model, prior, 0.01, 4000, 50, seed=4, rp=rp))
    assert e.clamp_count <= 1e-3 * 4000 * 50
    mo = ensemble_moments(e)
    assert abs(mo.variance - 0.01) < 4 * mo.variance_se


def test_clamp_budget_exceeded():
    model = MarketModel(0.2, 1.0)
    prior = DiscretePrior(np.array([[-0.05, 0.15]]), np.array([0.5, 0.5]))
    rp = solve_pde_1d(prior, model, GridSpec(60, 100, b_min=0.0, b_max=0.1))
    with pytest.raises(NumericalError, match="left the premium domain"):
        simulate(SimulationSpec(model, prior, 0.01, 200, 20, seed=4, rp=rp))


def test_npz_round_trip(tmp_path, ens8):
    ens8.save_npz(tmp_path / "e.npz")
    e2 = PathEnsemble.load_npz(tmp_path / "e.npz", ens8.spec)
    np.testing.assert_array_equal(e2.x_learning, ens8.x_learning)
    other = SimulationSpec(ens8.spec.model, ens8.spec.prior, 0.01, 10, seed=12)
    with pytest.raises(DomainError):
        PathEnsemble.load_npz(tmp_path / "e.npz", other)


def test_missing_strategy():
    e = simulate(SimulationSpec(MarketModel(0.2, 1.0), DiracPrior([0.05]), 0.01, 10, 5,
                                strategy_kind="learning"))
    with pytest.raises(DomainError):
        e.wealth("nonlearning")
