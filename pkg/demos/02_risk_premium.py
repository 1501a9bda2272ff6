"""
The Bayesian risk premium
=========================

R(t, b) replaces the squared Sharpe ratio times remaining time. For a
Gaussian prior it is quadratic in b; for other priors we solve its PDE on a
grid. Here both are computed for the same Gaussian prior and compared.
"""

import time

import numpy as np

from bayesmarkowitz.core_model import DiscretePrior, GaussianPrior, MarketModel
from bayesmarkowitz.risk_premium import (GridSpec, constant_drift_R, gaussian_M, gaussian_R, gaussian_U,
                                         riccati_residual, solve_pde_1d)

model = MarketModel(0.2, 1.0)
prior = GaussianPrior.from_volatility(0.05, 0.4)

print("known drift:   R(0, 5%) =", constant_drift_R([0.05], model, 0.0))
print("gaussian prior R(0, 5%) =", gaussian_R(prior, model, 0.0, [0.05]))
print("M(0) =", gaussian_M(prior, model, 0.0)[0, 0], " U(0) =", gaussian_U(prior, model, 0.0))

rm, ru = riccati_residual(prior, model, 0.5)
print(f"ODE residuals at t=0.5: {rm[0, 0]:.1e} {ru:.1e}")

# first-order convergence of the grid solver
for ns, nt in ((100, 500), (200, 1000), (400, 2000)):
    start = time.perf_counter()
    g = solve_pde_1d(prior, model, GridSpec(ns, nt))
    lo, hi = g.domain
    inner = (g.b_grid > lo + 0.1 * (hi - lo)) & (g.b_grid < hi - 0.1 * (hi - lo))
    exact = gaussian_R(prior, model, 0.0, g.b_grid[inner][:, None])
    err = np.max(np.abs(g.values[0][inner] - exact) / exact)
    print(f"{ns}x{nt}: max rel. error {err:.2e}  ({time.perf_counter() - start:.2f} s)")

# a discrete prior has no closed form; the grid is the only route
g = solve_pde_1d(DiscretePrior(np.array([[-0.05, 0.15]]), np.array([0.5, 0.5])), model)
print("two-point prior R0 =", g.r0)
