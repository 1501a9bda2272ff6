"""Analytic Sharpe ratios of the learning and non-learning strategies.

The learning Sharpe ratio depends only on R0 = R(0, b0). The non-learning one
is built from two exponential moments of the prior,

    I1(t) = E[exp(-b0' Sigma^{-1} B t)],   I2(t) = E[exp(-b0' Sigma^{-1} (2B - b0) t)],

which are evaluated in log space: for large horizons or drift volatilities
I2 overflows double precision long before the ratio does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate as spi
from scipy.special import logsumexp

from . import core_model as cm
from .core_model import DiracPrior, DiscretePrior, GaussianPrior, MarketModel
from .errors import DegenerateModelError, DomainError, NumericalError
from .quadrature import integrate
from .risk_premium import RiskPremium, premium_for
from .strategy import lambda_for_budget


def log_abs_expm1(a: float) -> float:
    """log|e^a - 1| without overflow for large ``a``."""
    a = float(a)
    if a > 0:
        return a + float(np.log(-np.expm1(-a)))
    if a < 0:
        return float(np.log(-np.expm1(a)))
    return -np.inf


_LOG_MAX = float(np.log(np.finfo(float).max))


def _exp_checked(log_value: float) -> float:
    if log_value > _LOG_MAX:
        raise NumericalError(f"Sharpe ratio e^{log_value:.1f} exceeds double precision")
    return float(np.exp(log_value))


def _sqrt_expm1(a: float) -> float:
    """sqrt(e^a - 1) for a >= 0, finite up to a ~ 1419."""
    return 0.0 if a == 0 else _exp_checked(0.5 * log_abs_expm1(a))


def _ratio_expm1(a: float, c: float) -> float:
    """(e^a - 1) / sqrt(e^c - 1) in log space, for c > 0."""
    if not c > 0:
        raise NumericalError(f"non-positive variance argument {c}")
    if a == 0:
        return 0.0
    return float(np.sign(a)) * _exp_checked(log_abs_expm1(a) - 0.5 * log_abs_expm1(c))


# ---------------------------------------------------------------------------
# Learning
# ---------------------------------------------------------------------------


def sharpe_learning(r0: float) -> float:
    if r0 < 0:
        raise DomainError(f"R0 must be non-negative, got {r0}")
    return _sqrt_expm1(r0)


def sharpe_learning_gaussian(b0: float, sigma: float, sigma0: float, T: float) -> float:
    """Closed-form learning Sharpe ratio for one asset with a Gaussian prior."""
    if not (sigma > 0 and sigma0 >= 0 and T > 0):
        raise DomainError("need sigma > 0, sigma0 >= 0, T > 0")
    s2 = sigma * sigma
    v = sigma0 * sigma0 * T
    arg = (np.log(s2 + v) - np.log(sigma) - 0.5 * np.log(s2 + 2.0 * v)
           + b0 * b0 * T / (s2 + 2.0 * v))
    return _sqrt_expm1(max(float(arg), 0.0))


# ---------------------------------------------------------------------------
# Non-learning
# ---------------------------------------------------------------------------


def discrete_r0_by_measure_change(prior: DiscretePrior, model: MarketModel) -> float:
    """R(0, b0) for a one-asset discrete prior without solving the PDE.

    The learning optimum is a multiple of the state-price density 1/L_T, where
    L_T(y) = sum_k w_k exp(c_k y - c_k^2 T / 2), c_k = v_k / sigma, is the
    likelihood of the observation path against Brownian motion. Hence
    e^{R0} = E[1/L_T^2] = E_W[1/L_T(Y_T)] with Y_T ~ N(0, T) under the
    reference measure, a one-dimensional integral.
    """
    if not isinstance(prior, DiscretePrior) or prior.n != 1 or model.n != 1:
        raise DomainError("measure-change R0 is implemented for one-asset discrete priors")
    T = model.horizon
    c = prior.support[0] / model.sigma[0, 0]
    logw = np.log(prior.weights)
    rt = np.sqrt(T)

    def log_f(z):
        z = np.asarray(z, dtype=float)
        terms = logw + c * rt * z[..., None] - 0.5 * c * c * T
        return -0.5 * z * z - logsumexp(terms, axis=-1)

    span = float(np.max(np.abs(c))) * rt + 40.0
    z = np.linspace(-span, span, 4001)
    zpk = float(z[np.argmax(log_f(z))])
    top = float(log_f(zpk))
    val, _ = spi.quad(lambda v: float(np.exp(log_f(v) - top)), -span, span, points=[zpk],
                      limit=400, epsabs=0.0, epsrel=1e-12)
    return float(top + np.log(val) - 0.5 * np.log(2 * np.pi))


def _b0(prior) -> np.ndarray:
    return np.atleast_1d(np.asarray(prior.mean, dtype=float))


def log_exponential_moments(prior: cm.Prior, model: MarketModel, t: float) -> tuple[float, float]:
    """(log I1(t), log I2(t)) for the given prior."""
    cm._check_prior(prior, model)
    t = model.check_time(t)
    b0 = _b0(prior)
    c = -t * (model.cov_inv @ b0)
    q = model.sharpe_sq(b0) * t
    if isinstance(prior, DiracPrior):
        return float(c @ b0), float(2.0 * c @ b0 + q)
    if isinstance(prior, GaussianPrior):
        s0 = prior.cov
        l1 = c @ b0 + 0.5 * c @ s0 @ c
        l2 = q + 2.0 * c @ b0 + 2.0 * c @ s0 @ c
        return float(l1), float(l2)
    logw = np.log(prior.weights)
    e = c @ prior.support
    return float(logsumexp(logw + e)), float(q + logsumexp(logw + 2.0 * e))


def _quadrature_moments(prior: GaussianPrior, model: MarketModel, t: float,
                        tol: float = 1e-12, width: float = 12.0) -> tuple[float, float]:
    """I1, I2 by adaptive quadrature against the prior density (n = 1 only).

    Each integrand exp(g(b)) has a quadratic exponent; it is integrated on a
    window around the maximizer of g and rescaled by exp(max g) so that the
    absolute tolerance is meaningful at any magnitude.
    """
    if prior.n != 1:
        raise DomainError("quadrature moments are implemented for one asset only")
    b0 = float(prior.mean[0])
    sd = float(np.sqrt(prior.cov[0, 0]))
    k = float(model.cov_inv[0, 0]) * b0 * t
    out = []
    for slope, shift in ((k, 0.0), (2.0 * k, k * b0)):
        def g(b, slope=slope, shift=shift):
            return -slope * b + shift - 0.5 * ((b - b0) / sd) ** 2
        peak = b0 - slope * sd * sd
        gmax = g(peak)
        val = integrate(lambda b: np.exp(g(b) - gmax), peak - width * sd, peak + width * sd,
                        tol=tol)
        out.append(float(val) * np.exp(gmax) / (sd * np.sqrt(2.0 * np.pi)))
    return out[0], out[1]


def _sharpe_from_logs(l1: float, l2: float) -> float:
    gap = 2.0 * l1 - l2
    if not gap < 0:
        raise NumericalError(f"non-learning wealth variance is not positive (log gap {gap:g})")
    log_den = 0.5 * l2 + 0.5 * float(np.log(-np.expm1(gap)))
    if l1 == 0:
        return 0.0
    return -float(np.sign(l1)) * _exp_checked(log_abs_expm1(l1) - log_den)


def sharpe_nonlearning(prior: cm.Prior, model: MarketModel, t: float | None = None,
                       method: str = "mgf") -> float:
    """Sharpe ratio of the known-drift strategy built on the prior mean.

    ``t`` defaults to the horizon. ``method="quadrature"`` integrates a
    one-dimensional Gaussian prior numerically instead of using its moment
    generating function.
    """
    t = model.horizon if t is None else t
    b0 = _b0(prior)
    if not np.any(b0):
        raise DegenerateModelError("prior mean drift is zero: no risky opportunity")
    if method == "mgf":
        l1, l2 = log_exponential_moments(prior, model, t)
    elif method == "quadrature":
        if not isinstance(prior, GaussianPrior):
            raise DomainError("quadrature path is available for Gaussian priors")
        i1, i2 = _quadrature_moments(prior, model, model.check_time(t))
        if not i2 - i1 * i1 > 0:
            raise NumericalError("non-learning wealth variance is not positive")
        return float((1.0 - i1) / np.sqrt(i2 - i1 * i1))
    else:
        raise ValueError(f"unknown method {method!r}")
    return _sharpe_from_logs(l1, l2)


def sharpe_nonlearning_gaussian(b0: float, sigma: float, sigma0: float, T: float) -> float:
    """Closed-form non-learning Sharpe ratio for one asset with a Gaussian prior."""
    if not (sigma > 0 and sigma0 >= 0 and T > 0):
        raise DomainError("need sigma > 0, sigma0 >= 0, T > 0")
    a = b0 * b0 * T / (sigma * sigma)
    k = sigma0 * sigma0 * T / (sigma * sigma)
    return _ratio_expm1(a * (1.0 - 0.5 * k), a * (1.0 + k))


def nl_upper_bound(b0, model: MarketModel) -> float:
    return _sqrt_expm1(float(model.sharpe_sq(np.atleast_1d(b0)) * model.horizon))


def nl_wealth_moments(prior: cm.Prior, model: MarketModel, theta: float,
                      t: float) -> tuple[float, float]:
    """Mean and variance of the non-learning wealth at time ``t``."""
    b0 = _b0(prior)
    r_const = model.sharpe_sq(b0) * model.horizon
    lam0 = lambda_for_budget(theta, r_const)
    l1, l2 = log_exponential_moments(prior, model, t)
    # C1 = e^{|sigma^{-1} b0|^2 T} / (2 lam0); keep it in log form
    log_c1 = r_const - np.log(2.0 * lam0)
    mean = model.x0 - float(np.exp(log_c1) * np.expm1(l1))
    gap = 2.0 * l1 - l2
    if gap >= 0:
        return mean, 0.0
    var = float(np.exp(2.0 * log_c1 + l2 + np.log(-np.expm1(gap))))
    return mean, var


# ---------------------------------------------------------------------------
# Value of information
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SharpeReport:
    sh_learning: float
    sh_nonlearning: float
    value_of_information: float
    nl_upper_bound: float
    r0: float
    prior: cm.Prior
    model: MarketModel
    theta: float | None = None

    CSV_COLUMNS = ("sh_learning", "sh_nonlearning", "value_of_information",
                   "nl_upper_bound", "r0")

    def csv_row(self) -> tuple[float, ...]:
        """Values in :attr:`CSV_COLUMNS` order."""
        return tuple(getattr(self, c) for c in self.CSV_COLUMNS)


def value_of_information(prior: cm.Prior, model: MarketModel, theta: float | None = None,
                         rp: RiskPremium | None = None) -> SharpeReport:
    """Learning and non-learning Sharpe ratios and their difference.

    ``theta`` is only echoed: both Sharpe ratios are budget-free.
    """
    rp = premium_for(prior, model) if rp is None else rp
    r0 = float(rp.r0)
    b0 = _b0(prior)
    sh_l = sharpe_learning(max(r0, 0.0))
    sh_nl = sharpe_nonlearning(prior, model)
    return SharpeReport(sh_l, sh_nl, sh_l - sh_nl, nl_upper_bound(b0, model), r0,
                        prior, model, theta)
