"""
How much is learning worth?
===========================

Value of information VI = Sh(learning) - Sh(non-learning) across prior
uncertainty, asset Sharpe ratio and horizon, using the built-in scenarios.
"""

import numpy as np

from bayesmarkowitz import reports
from bayesmarkowitz.config import BUILTIN

t = reports.sweep_sigma0(BUILTIN["figure1"])
for name in ("Asset 1", "Asset 2", "Asset 3"):
    rows = [r for r in t.rows if r[0] == name]
    s0 = np.array([r[1] for r in rows])
    vi = np.array([r[4] for r in rows])
    print(f"{name}: VI at sigma0=10% {np.interp(0.1, s0, vi):.3f}, at 100% {vi[-1]:.3f}")

# Asset 4 has a bump at small prior volatility
t = reports.sweep_sigma0(BUILTIN["figure2"])
s0, vi = t.column("sigma0"), t.column("value_of_information")
k = np.nonzero(np.diff(vi) < 0)[0][0]
print(f"Asset 4: VI peaks at sigma0={s0[k]:.3f} (VI={vi[k]:.3f}), dips to {vi[s0 <= 0.1][-1]:.3f} at 10%")

t = reports.sweep_horizon(BUILTIN["figure5"])
T = t.column("T")
for c in t.columns[1:4]:
    print(f"{c}: VI(T=1) {np.interp(1.0, T, t.column(c)):.3f}, VI(T=50) {t.column(c)[-1]:.3f}")

print(reports.sweep_sharpe(BUILTIN["figure3"]).to_csv().splitlines()[-1])
