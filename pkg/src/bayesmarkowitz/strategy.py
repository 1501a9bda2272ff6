"""Mean-variance embedding and the optimal learning / non-learning controls.

Controls are amounts of currency held in each risky asset. The learning control
is affine in wealth,

    a(t, x, b) = (x0 - x + e^{R0} / (2 lam)) (Sigma^{-1} b - (psi sigma^{-1})^T grad R(t, b)),

and reduces to the known-drift control when psi vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import MarketModel
from .errors import DegenerateModelError, DomainError


def lambda_for_budget(theta: float, r0: float) -> float:
    """Lagrange multiplier binding the terminal variance to ``theta``."""
    if not theta > 0:
        raise DomainError(f"variance budget must be positive, got {theta}")
    if not r0 > 0:
        raise DegenerateModelError(f"risk premium R0={r0} offers no risky opportunity")
    return float(np.sqrt(np.expm1(r0) / (4.0 * theta)))


def value_V0(lam: float, r0: float, x0: float) -> float:
    """Optimal mean-variance criterion inf E[lam Var - E] at multiplier ``lam``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return float(-np.expm1(r0) / (4.0 * lam) - x0)


def value_U0(theta: float, r0: float, x0: float) -> float:
    """Best expected terminal wealth with variance at most ``theta``."""
    if theta < 0:
        raise DomainError("variance budget must be non-negative")
    return float(x0 + np.sqrt(theta * np.expm1(r0)))


def gamma_star(lam: float, r0: float, x0: float) -> float:
    return float(x0 + np.expm1(r0) / (2.0 * lam))


def expected_optimal_terminal_wealth(lam: float, r0: float, x0: float) -> float:
    """E[X_T] under the optimal control for multiplier ``lam`` (equals gamma*)."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return gamma_star(lam, r0, x0)


@dataclass(frozen=True)
class StrategyParams:
    variance_budget: float
    lam: float
    gamma_star: float
    r0: float
    x0: float

    @classmethod
    def from_budget(cls, theta: float, r0: float, x0: float) -> "StrategyParams":
        lam = lambda_for_budget(theta, r0)
        return cls(float(theta), lam, gamma_star(lam, r0, x0), float(r0), float(x0))

    @property
    def target(self) -> float:
        """Wealth level x0 + e^{R0} / (2 lam) at which the control vanishes."""
        return self.x0 + np.exp(self.r0) / (2.0 * self.lam)


def control_direction(t, b, rp, psi_value=None) -> np.ndarray:
    """Sigma^{-1} b - (psi sigma^{-1})^T grad R(t, b), for one vector or a batch."""
    model = rp.model
    b = np.asarray(b, dtype=float)
    direction = b @ model.cov_inv.T
    p = rp.psi(t, b) if psi_value is None else np.asarray(psi_value, dtype=float)
    if not np.any(p):
        return direction
    grad = np.asarray(rp.gradient(t, b), dtype=float).reshape(b.shape)
    # (psi sigma^{-1})^T g = sigma^{-T} psi^T g
    pt_g = np.einsum("...ji,...j->...i", p, grad)
    return direction - pt_g @ model.sigma_inv


def bayes_control(t, x, b, params: StrategyParams, rp, psi_value=None) -> np.ndarray:
    """Optimal learning control at wealth ``x`` and posterior mean ``b``.

    ``x`` may be an array matching a batch of ``b`` rows. ``psi_value`` lets a
    caller that already knows the posterior covariance skip the inversion.
    """
    x = np.asarray(x, dtype=float)
    scale = params.x0 - x + np.exp(params.r0) / (2.0 * params.lam)
    return scale[..., None] * control_direction(t, b, rp, psi_value)


def nonlearning_lambda(theta: float, model: MarketModel, b0) -> float:
    """Multiplier of the known-drift strategy built on the prior mean."""
    r0 = model.sharpe_sq(np.atleast_1d(b0)) * model.horizon
    if not r0 > 0:
        raise DegenerateModelError("prior mean drift is zero: no risky opportunity")
    return lambda_for_budget(theta, r0)


def nonlearning_params(theta: float, model: MarketModel, b0) -> StrategyParams:
    r0 = model.sharpe_sq(np.atleast_1d(b0)) * model.horizon
    if not r0 > 0:
        raise DegenerateModelError("prior mean drift is zero: no risky opportunity")
    return StrategyParams.from_budget(theta, r0, model.x0)


def nonlearning_control(t, x, params: StrategyParams, model: MarketModel, b0) -> np.ndarray:
    """Known-drift control (x0 - x + e^{|sigma^{-1} b0|^2 T} / (2 lam)) Sigma^{-1} b0."""
    model.check_time(t)
    x = np.asarray(x, dtype=float)
    b0 = np.atleast_1d(np.asarray(b0, dtype=float))
    r0 = model.sharpe_sq(b0) * model.horizon
    scale = params.x0 - x + np.exp(r0) / (2.0 * params.lam)
    return scale[..., None] * (b0 @ model.cov_inv.T)


def value_v_lambda_gamma(t, x, b, lam: float, gamma: float, rp) -> float:
    """Value of the auxiliary quadratic problem min E[lam X_T^2 - (1 + 2 lam gamma) X_T]."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    c = 1.0 + 2.0 * lam * gamma
    r = np.asarray(rp.value(t, b), dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.exp(-r) * (lam * x * x - c * x + c * c / (4.0 * lam)) - c * c / (4.0 * lam)
    return float(out) if out.ndim == 0 else out
