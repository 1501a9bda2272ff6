"""
Learning the drift from prices
==============================

A single stock with 20% volatility and an unknown drift. We compare a
Gaussian prior with a two-point prior and watch the posterior mean react to
the same observation.
"""

import numpy as np

from bayesmarkowitz.core_model import (DiscretePrior, GaussianPrior, MarketModel, invert_posterior_mean,
                                       observation_from_prices, posterior_covariance, posterior_mean, psi)

model = MarketModel(0.2, horizon=1.0)
gauss = GaussianPrior.from_volatility(0.05, 0.4)
two_point = DiscretePrior(np.array([[-0.05, 0.15]]), np.array([0.5, 0.5]))

# Prices are turned into the observation Y_t = sigma^{-1} B t + W_t
t = 0.5
prices = np.array([[0.9], [1.0], [1.1], [1.25]])
y = observation_from_prices(model, t, prices)
print("observations Y_t:", y.ravel().round(4))

for name, prior in (("gaussian", gauss), ("two-point", two_point)):
    b = posterior_mean(prior, model, t, y)
    sd = np.sqrt(posterior_covariance(prior, model, t, y)[:, 0, 0])
    print(f"{name:>9}: posterior mean {b.ravel().round(4)}  sd {sd.round(4)}")

# The two-point posterior mean never leaves (-5%, 15%), and its volatility
# psi vanishes at the support points
for b in (-0.0499, 0.05, 0.1499):
    print(f"psi(t, {b:+.4f}) = {psi(two_point, model, t, [b])[0, 0]:.5f}")

# f_t is invertible on the hull interior
b = posterior_mean(two_point, model, t, y)
print("round trip error:", np.abs(invert_posterior_mean(two_point, model, t, b) - y).max())
