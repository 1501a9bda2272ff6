"""
From a variance budget to a trading rule
========================================

Given R0 and a terminal variance budget theta, the Lagrange multiplier,
target wealth and feedback control follow in closed form.
"""

import numpy as np

from bayesmarkowitz.core_model import GaussianPrior, MarketModel
from bayesmarkowitz.risk_premium import GaussianPremium
from bayesmarkowitz.strategy import (StrategyParams, bayes_control, nonlearning_control, nonlearning_params,
                                     value_U0, value_V0)

model = MarketModel(0.2, 1.0)
prior = GaussianPrior.from_volatility(0.05, 0.4)
rp = GaussianPremium(prior, model)
theta = 0.01

p = StrategyParams.from_budget(theta, rp.r0, model.x0)
print(f"R0 = {p.r0:.5f}  lambda = {p.lam:.4f}  gamma* = {p.gamma_star:.4f}")
print("best expected wealth U0 =", value_U0(theta, p.r0, model.x0))
print("duality gap:", value_U0(theta, p.r0, model.x0) - (p.lam * theta - value_V0(p.lam, p.r0, model.x0)))

# dollar amount in the stock, learning vs non-learning, as the estimate moves
nlp = nonlearning_params(theta, model, prior.mean)
for b in (0.0, 0.05, 0.10):
    a_l = bayes_control(0.25, 0.0, [b], p, rp)[0]
    a_nl = nonlearning_control(0.25, 0.0, nlp, model, prior.mean)[0]
    print(f"b-hat = {b:.2f}: learning holds {a_l:7.4f}, non-learning holds {a_nl:7.4f}")

# the position shrinks linearly as wealth approaches the target
xs = np.linspace(0.0, p.target, 5)
print("holding vs wealth:", bayes_control(0.25, xs, np.full((5, 1), 0.05), p, rp)[:, 0].round(4))
