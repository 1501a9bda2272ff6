import numpy as np
import pytest

from bayesmarkowitz.core_model import DiscretePrior, GaussianPrior, MarketModel


@pytest.fixture
def asset8():
    """b0 = 5%, sigma = 20%, sigma0 = 40%, T = 1."""
    return GaussianPrior.from_volatility(0.05, 0.4), MarketModel(0.2, 1.0)


@pytest.fixture
def two_point():
    """Symmetric two-point prior on {-0.1, 0.1}, sigma = 0.2."""
    return DiscretePrior(np.array([[-0.1, 0.1]]), np.array([0.5, 0.5])), MarketModel(0.2, 1.0)


@pytest.fixture
def market2():
    sigma = np.array([[0.2, 0.0], [0.05, 0.15]])
    prior = GaussianPrior(np.array([0.05, 0.03]), np.array([[0.04, 0.01], [0.01, 0.02]]))
    return prior, MarketModel(sigma, 1.0)


@pytest.fixture
def discrete2():
    support = np.array([[-0.1, 0.15, 0.0, 0.05], [-0.05, 0.0, 0.12, 0.02]])
    prior = DiscretePrior(support, np.array([0.3, 0.3, 0.2, 0.2]))
    return prior, MarketModel(np.array([[0.2, 0.0], [0.05, 0.15]]), 1.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
