"""Bayesian risk premium R(t, b) and its gradient.

R solves, backward from R(T, .) = 0, the semi-linear equation

    -R_t - 1/2 tr(psi psi^T D^2 R) + 2 (psi sigma^{-1} b)^T grad R
         - 1/2 |psi^T grad R|^2 - |sigma^{-1} b|^2 = 0

where psi is the diffusion matrix of the posterior mean.  Three evaluators are
provided: the known-drift case (R linear in t), the Gaussian prior (R quadratic
in b with Riccati coefficients) and a finite-difference grid for one asset.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from . import core_model as cm
from .core_model import (DiracPrior, DiscretePrior, GaussianPrior, MarketModel,
                         spd_inverse, spd_solve)
from .errors import ConfigError, DomainError, NumericalError
from .quadrature import integrate

QUAD_TOL = 1e-10


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def constant_drift_R(b0, model: MarketModel, t: float) -> float:
    """|sigma^{-1} b0|^2 (T - t)."""
    t = model.check_time(t)
    return model.sharpe_sq(np.atleast_1d(b0)) * (model.horizon - t)


def _info_gain(prior: GaussianPrior, model: MarketModel, s: float) -> np.ndarray:
    """G(s)^T Sigma G(s) = Sigma0 (Sigma + Sigma0 s)^{-1} Sigma (Sigma + Sigma0 s)^{-1} Sigma0."""
    a = model.cov + prior.cov * s
    a = 0.5 * (a + a.T)
    g = spd_solve(a, prior.cov)
    h = g.T @ model.cov @ g
    return 0.5 * (h + h.T)


def _terminal_posterior_cov(prior: GaussianPrior, model: MarketModel) -> np.ndarray:
    return spd_inverse(prior.cov_inv + model.cov_inv * model.horizon)


def _riccati_q(prior: GaussianPrior, model: MarketModel, t: float, tol: float) -> np.ndarray:
    """(Sigma0^{-1} + Sigma^{-1} T)^{-1} + 2 int_t^T G^T Sigma G ds."""
    k = integrate(lambda s: _info_gain(prior, model, s), t, model.horizon, tol=tol)
    q = _terminal_posterior_cov(prior, model) + 2.0 * k
    return 0.5 * (q + q.T)


def _use_explicit(prior, method):
    if method not in ("auto", "explicit", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "explicit" and prior.n != 1:
        raise DomainError("explicit formulas exist only for a single asset")
    return method == "explicit" or (method == "auto" and prior.n == 1)


def gaussian_M(prior: GaussianPrior, model: MarketModel, t: float,
               method: str = "auto", tol: float = QUAD_TOL) -> np.ndarray:
    """Quadratic coefficient M(t) of the Gaussian risk premium.

    One asset uses the explicit formula; otherwise the Riccati solution is
    assembled from an adaptive Gauss-Legendre integral.
    """
    t = model.check_time(t)
    T = model.horizon
    if t == T:
        return np.zeros((model.n, model.n))
    if _use_explicit(prior, method):
        s2 = model.cov[0, 0]
        s02 = prior.cov[0, 0]
        m = (s2 + s02 * t) * (T - t) / (s2 * (s2 + s02 * (2 * T - t)))
        return np.array([[m]])
    prec = prior.cov_inv + model.cov_inv * t
    m = prec - spd_inverse(_riccati_q(prior, model, t, tol))
    return 0.5 * (m + m.T)


def gaussian_U(prior: GaussianPrior, model: MarketModel, t: float,
               method: str = "auto", tol: float = QUAD_TOL) -> float:
    """Constant term U(t) of the Gaussian risk premium."""
    t = model.check_time(t)
    T = model.horizon
    if t == T:
        return 0.0
    if _use_explicit(prior, method):
        s2 = model.cov[0, 0]
        s02 = prior.cov[0, 0]
        return float(np.log((s2 + s02 * T) / np.sqrt((s2 + s02 * t) * (s2 + s02 * (2 * T - t)))))

    def integrand(s):
        a = model.cov + prior.cov * s
        a = 0.5 * (a + a.T)
        first = np.trace(prior.cov @ np.linalg.inv(a))
        h = _info_gain(prior, model, s)
        q = _riccati_q(prior, model, s, tol)
        return first - np.trace(spd_solve(q, h))

    return float(integrate(integrand, t, T, tol=tol))


def gaussian_R(prior: GaussianPrior, model: MarketModel, t: float, b, **kw):
    """b^T M(t) b + U(t); accepts one vector or a batch of rows."""
    m = gaussian_M(prior, model, t, **kw)
    u = gaussian_U(prior, model, t, **kw)
    bb = np.asarray(b, dtype=float)
    return np.einsum("...i,ij,...j->...", bb, m, bb) + u


def gaussian_grad_R(prior: GaussianPrior, model: MarketModel, t: float, b, **kw):
    """2 M(t) b."""
    m = gaussian_M(prior, model, t, **kw)
    return 2.0 * np.asarray(b, dtype=float) @ m.T


def gain_matrix(prior: GaussianPrior, model: MarketModel, t: float) -> np.ndarray:
    """G(t) = (Sigma + Sigma0 t)^{-1} Sigma0."""
    a = model.cov + prior.cov * t
    return spd_solve(0.5 * (a + a.T), prior.cov)


def riccati_residual(prior: GaussianPrior, model: MarketModel, t: float,
                     h: float | None = None, **kw) -> tuple[np.ndarray, float]:
    """Residuals of the M and U equations at ``t``, derivatives by 5-point central differences."""
    T = model.horizon
    if not 0 < t < T:
        raise DomainError("riccati_residual needs 0 < t < T")
    if h is None:
        # M varies on the scale 1/lambda_max(Sigma^{-1} Sigma0), which can be far shorter than T
        rate = float(np.max(np.abs(np.linalg.eigvals(model.cov_inv @ prior.cov))))
        h = min(1e-3 * min(T, 1.0 / rate) if rate > 0 else 1e-3 * T, 0.25 * min(t, T - t))
    ts = [t - 2 * h, t - h, t + h, t + 2 * h]
    ms = [gaussian_M(prior, model, s, **kw) for s in ts]
    us = [gaussian_U(prior, model, s, **kw) for s in ts]
    dm = (ms[0] - 8 * ms[1] + 8 * ms[2] - ms[3]) / (12 * h)
    du = (us[0] - 8 * us[1] + 8 * us[2] - us[3]) / (12 * h)
    m = gaussian_M(prior, model, t, **kw)
    g = gain_matrix(prior, model, t)
    gsg = g.T @ model.cov @ g
    res_m = -dm - 2 * m.T @ gsg @ m + 4 * g @ m - model.cov_inv
    res_u = -du - np.trace(gsg @ m)
    return res_m, float(res_u)


# ---------------------------------------------------------------------------
# Evaluators
# ---------------------------------------------------------------------------


class RiskPremium:
    """Common interface of the risk-premium evaluators.

    ``value(t, b)`` and ``gradient(t, b)`` take one drift vector or a batch of
    rows; ``psi(t, b)`` is the posterior-mean diffusion matrix used by the
    control and the equation residual.
    """

    prior: cm.Prior
    model: MarketModel

    def value(self, t, b):
        raise NotImplementedError

    def gradient(self, t, b):
        raise NotImplementedError

    def psi(self, t, b):
        return cm.psi(self.prior, self.model, t, b)

    @property
    def r0(self) -> float:
        return float(self.value(0.0, self.prior.mean))

    def project(self, t, b):
        """Clamp rows of ``b`` into the evaluator's domain; returns (b, n_clamped)."""
        return np.asarray(b, dtype=float), 0


class ConstantDriftPremium(RiskPremium):
    """Known drift ``b0``: R(t) = |sigma^{-1} b0|^2 (T - t), flat in b, psi = 0."""

    def __init__(self, model: MarketModel, b0):
        self.model = model
        self.prior = DiracPrior(b0)

    def value(self, t, b):
        r = constant_drift_R(self.prior.point, self.model, t)
        bb = np.asarray(b, dtype=float)
        return r if bb.ndim <= 1 else np.full(bb.shape[0], r)

    def gradient(self, t, b):
        self.model.check_time(t)
        return np.zeros_like(np.asarray(b, dtype=float))

    def psi(self, t, b):
        bb = np.asarray(b, dtype=float)
        n = self.model.n
        return np.zeros((n, n)) if bb.ndim <= 1 else np.zeros((bb.shape[0], n, n))


class GaussianPremium(RiskPremium):
    """Closed-form premium for a Gaussian prior, with M and U cached per time."""

    def __init__(self, prior: GaussianPrior, model: MarketModel, method: str = "auto",
                 tol: float = QUAD_TOL):
        if prior.n != model.n:
            raise DomainError("prior and market dimensions differ")
        self.prior = prior
        self.model = model
        self._kw = {"method": method, "tol": tol}
        self._cache: dict[float, tuple[np.ndarray, float]] = {}
        self._psi_cache: dict[float, np.ndarray] = {}

    def coefficients(self, t: float) -> tuple[np.ndarray, float]:
        t = float(t)
        hit = self._cache.get(t)
        if hit is None:
            hit = (gaussian_M(self.prior, self.model, t, **self._kw),
                   gaussian_U(self.prior, self.model, t, **self._kw))
            if len(self._cache) > 100_000:
                self._cache.clear()
            self._cache[t] = hit
        return hit

    def value(self, t, b):
        m, u = self.coefficients(t)
        bb = np.asarray(b, dtype=float)
        return np.einsum("...i,ij,...j->...", bb, m, bb) + u

    def gradient(self, t, b):
        m, _ = self.coefficients(t)
        return 2.0 * np.asarray(b, dtype=float) @ m.T

    def psi(self, t, b):
        t = float(t)
        val = self._psi_cache.get(t)
        if val is None:
            val = cm.psi(self.prior, self.model, t, self.prior.mean)
            self._psi_cache[t] = val
        bb = np.asarray(b, dtype=float)
        return val if bb.ndim <= 1 else np.broadcast_to(val, (bb.shape[0],) + val.shape)


def premium_for(prior: cm.Prior, model: MarketModel, grid: "GridSpec | None" = None) -> RiskPremium:
    """Natural evaluator for a prior: closed form when available, else a 1-d grid."""
    if isinstance(prior, DiracPrior):
        return ConstantDriftPremium(model, prior.point)
    if isinstance(prior, GaussianPrior):
        return GaussianPremium(prior, model)
    return solve_pde_1d(prior, model, grid)


# ---------------------------------------------------------------------------
# One-dimensional finite-difference solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Grid settings for :func:`solve_pde_1d`.

    When ``b_min``/``b_max`` are omitted the domain is b0 +/- ``width_sd`` prior
    standard deviations (Gaussian) or the support interval shrunk by
    ``edge_frac`` of its span (discrete).

    ``gradient_term`` selects how the quadratic gradient term is advanced:
    ``"linearized"`` treats it as an implicit drift with the previous gradient
    as coefficient; ``"lagged"`` evaluates it explicitly and is subject to the
    step restriction ``max_gradient_cfl``.
    """

    n_space: int = 400
    n_time: int = 2000
    b_min: float | None = None
    b_max: float | None = None
    width_sd: float = 6.0
    edge_frac: float = 1e-4
    gradient_term: str = "linearized"
    max_gradient_cfl: float = 1.0


class GridPremium(RiskPremium):
    """Tabulated premium on a (t, b) grid with bilinear interpolation."""

    def __init__(self, prior, model, t_grid, b_grid, values, grads, meta=None):
        self.prior = prior
        self.model = model
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.b_grid = np.asarray(b_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.grads = np.asarray(grads, dtype=float)
        self.meta = dict(meta or {})
        for a in (self.t_grid, self.b_grid, self.values, self.grads):
            a.setflags(write=False)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.b_grid[0]), float(self.b_grid[-1])

    def _interp(self, table, t, b):
        t = self.model.check_time(t)
        bb = np.asarray(b, dtype=float)
        flat = bb.reshape(-1)
        lo, hi = self.domain
        if np.any((flat < lo - 1e-12) | (flat > hi + 1e-12)):
            raise DomainError(f"b outside grid domain [{lo}, {hi}]")
        k = int(np.clip(np.searchsorted(self.t_grid, t, side="right") - 1, 0, len(self.t_grid) - 2))
        t0, t1 = self.t_grid[k], self.t_grid[k + 1]
        w = (t - t0) / (t1 - t0)
        row = (1.0 - w) * table[k] + w * table[k + 1]
        return np.interp(flat, self.b_grid, row), bb.ndim

    def value(self, t, b):
        out, nd = self._interp(self.values, t, b)
        return float(out[0]) if nd <= 1 else out

    def gradient(self, t, b):
        out, nd = self._interp(self.grads, t, b)
        return out.reshape(1) if nd <= 1 else out.reshape(-1, 1)

    def psi(self, t, b):
        bb = np.asarray(b, dtype=float)
        lo, hi = self.domain
        return cm.psi(self.prior, self.model, t, np.clip(bb, lo, hi))

    def project(self, t, b):
        bb = np.asarray(b, dtype=float)
        lo, hi = self.domain
        clipped = np.clip(bb, lo, hi)
        return clipped, int(np.count_nonzero(clipped != bb))

    # -- serialization -----------------------------------------------------

    def to_csv(self, path) -> None:
        """Flat table: t_index, b_index, t, b, R, dR_db (17 significant digits)."""
        path = Path(path)
        ti, bi = np.meshgrid(np.arange(len(self.t_grid)), np.arange(len(self.b_grid)), indexing="ij")
        with path.open("w", newline="\n") as fh:
            for key, val in sorted(self.meta.items()):
                fh.write(f"# {key}={val}\n")
            fh.write("t_index,b_index,t,b,R,dR_db\n")
            for i, j in zip(ti.ravel(), bi.ravel()):
                fh.write("%d,%d,%.17g,%.17g,%.17g,%.17g\n" % (
                    i, j, self.t_grid[i], self.b_grid[j], self.values[i, j], self.grads[i, j]))

    @classmethod
    def from_csv(cls, path, prior, model) -> "GridPremium":
        meta = {}
        header = 0
        with Path(path).open() as fh:
            for line in fh:
                header += 1
                if not line.startswith("#"):
                    break
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
        data = np.loadtxt(path, delimiter=",", skiprows=header, ndmin=2)
        nt = int(data[:, 0].max()) + 1
        nb = int(data[:, 1].max()) + 1
        order = np.lexsort((data[:, 1], data[:, 0]))
        data = data[order]
        return cls(prior, model, data[::nb, 2], data[:nb, 3],
                   data[:, 4].reshape(nt, nb), data[:, 5].reshape(nt, nb), meta)

    def save_npz(self, path) -> None:
        np.savez(path, t_grid=self.t_grid, b_grid=self.b_grid, values=self.values,
                 grads=self.grads, meta=np.array(sorted(self.meta.items()), dtype=str))

    @classmethod
    def load_npz(cls, path, prior, model) -> "GridPremium":
        with np.load(path) as z:
            meta = {k: v for k, v in z["meta"]} if z["meta"].size else {}
            return cls(prior, model, z["t_grid"], z["b_grid"], z["values"], z["grads"], meta)


def _grid_gradient(r: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences inside, second-order one-sided at the ends."""
    g = np.empty_like(r)
    g[2:-2] = (-r[4:] + 8 * r[3:-1] - 8 * r[1:-3] + r[:-4]) / (12 * h)
    g[1] = (r[2] - r[0]) / (2 * h)
    g[-2] = (r[-1] - r[-3]) / (2 * h)
    g[0] = (-3 * r[0] + 4 * r[1] - r[2]) / (2 * h)
    g[-1] = (3 * r[-1] - 4 * r[-2] + r[-3]) / (2 * h)
    return g


def _default_domain(prior, grid: GridSpec) -> tuple[float, float, str]:
    if isinstance(prior, GaussianPrior):
        b0 = float(prior.mean[0])
        sd = float(np.sqrt(prior.cov[0, 0]))
        lo, hi = b0 - grid.width_sd * sd, b0 + grid.width_sd * sd
        kind = "linear"
    else:
        v = prior.support[0]
        span = float(v.max() - v.min())
        lo, hi = float(v.min()) + grid.edge_frac * span, float(v.max()) - grid.edge_frac * span
        kind = "degenerate"
    if grid.b_min is not None:
        lo = grid.b_min
    if grid.b_max is not None:
        hi = grid.b_max
    return lo, hi, kind


def _psi_1d(prior, model, t, b) -> np.ndarray:
    if isinstance(prior, GaussianPrior):
        val = float(cm.psi(prior, model, t, prior.mean)[0, 0])
        return np.full(b.shape, val)
    return cm.psi(prior, model, t, b[:, None])[:, 0, 0]


def solve_pde_1d(prior: cm.Prior, model: MarketModel, grid: GridSpec | None = None) -> GridPremium:
    """Backward time-marching solution of the risk-premium equation for one asset.

    Semi-implicit Euler: diffusion and drift terms implicit, the quadratic
    gradient term either linearized around the previous level or lagged. The drift term uses central differences where the cell
    Peclet number is at most one and upwinding elsewhere. Gaussian runs close
    the domain with zero second derivative at both ends; discrete runs use
    one-sided differences at the edges where psi degenerates.
    """
    grid = grid or GridSpec()
    if model.n != 1:
        raise DomainError("the grid solver handles a single asset only")
    if isinstance(prior, DiracPrior):
        raise DomainError("a Dirac prior has the closed-form constant-drift premium")
    if prior.n != 1:
        raise DomainError("prior dimension must be 1")
    if grid.n_space < 5 or grid.n_time < 1:
        raise ConfigError("grid needs n_space >= 5 and n_time >= 1")
    if grid.gradient_term not in ("linearized", "lagged"):
        raise ConfigError(f"unknown gradient_term {grid.gradient_term!r}")
    lagged = grid.gradient_term == "lagged"
    lo, hi, edge = _default_domain(prior, grid)
    if not hi > lo:
        raise ConfigError(f"empty domain [{lo}, {hi}]")
    if isinstance(prior, DiscretePrior):
        cm.check_interior(prior, np.array([[lo], [hi]]))

    T = model.horizon
    sig = float(model.sigma[0, 0])
    nb, nt = grid.n_space, grid.n_time
    b = np.linspace(lo, hi, nb)
    if np.isclose(lo, -hi):
        b = 0.5 * (b - b[::-1])          # exact mirror symmetry
    h = b[1] - b[0]
    dt = T / nt
    t_grid = np.linspace(0.0, T, nt + 1)
    t_grid[-1] = T
    src = (b / sig) ** 2

    values = np.zeros((nt + 1, nb))
    grads = np.zeros((nt + 1, nb))
    r = np.zeros(nb)
    rb = np.zeros(nb)
    ab = np.zeros((5, nb))                # banded storage, l = u = 2
    for step in range(nt):
        k = nt - step - 1                 # unknown level
        t = t_grid[k]
        p = _psi_1d(prior, model, t, b)
        diff = 0.5 * p * p
        vel = 2.0 * p * b / sig
        if lagged:
            cfl = dt * float(np.max(2.0 * diff * np.abs(rb))) / h
            if cfl > grid.max_gradient_cfl:
                raise ConfigError(
                    f"grid too coarse: lagged gradient term CFL {cfl:.3g} exceeds "
                    f"{grid.max_gradient_cfl} at step {step}")
            rhs = r / dt + diff * rb * rb + src
        else:
            vel = vel - diff * rb
            rhs = r / dt + src
        ab[:] = 0.0

        i = np.arange(1, nb - 1)
        d = diff[i] / h ** 2
        v = vel[i]
        central = np.abs(v) * h <= 2.0 * diff[i]
        lower = -d - np.where(central, v / (2 * h), np.where(v > 0, v / h, 0.0))
        upper = -d + np.where(central, v / (2 * h), np.where(v < 0, v / h, 0.0))
        main = 1.0 / dt + 2 * d + np.where(central, 0.0, np.abs(v) / h)
        ab[2, i] = main
        ab[3, i - 1] = lower              # A[i, i-1]
        ab[1, i + 1] = upper              # A[i, i+1]

        if edge == "linear":
            # R_0 - 2 R_1 + R_2 = 0 and mirror
            ab[2, 0], ab[1, 1], ab[0, 2] = 1.0, -2.0, 1.0
            ab[2, -1], ab[3, -2], ab[4, -3] = 1.0, -2.0, 1.0
            rhs[0] = rhs[-1] = 0.0
        else:
            for j, s in ((0, 1), (nb - 1, -1)):
                dd = diff[j] / h ** 2
                vv = vel[j] * s / h       # one-sided toward the interior
                # second derivative (R_j - 2R_{j+s} + R_{j+2s}) / h^2, first derivative (R_{j+s} - R_j) s / h
                coeffs = {j: 1.0 / dt - dd - vv, j + s: 2 * dd + vv, j + 2 * s: -dd}
                for col, val in coeffs.items():
                    ab[2 + j - col, col] += val
        r = solve_banded((2, 2), ab, rhs)
        if not np.all(np.isfinite(r)):
            raise NumericalError(f"non-finite values in grid solution at step {step}", step=step)
        rb = _grid_gradient(r, h)
        values[k] = r
        grads[k] = rb
    meta = {"n_space": nb, "n_time": nt, "b_min": repr(float(lo)), "b_max": repr(float(hi)),
            "boundary": edge, "gradient_term": grid.gradient_term}
    return GridPremium(prior, model, t_grid, b, values, grads, meta)


# ---------------------------------------------------------------------------
# Residual of the equation
# ---------------------------------------------------------------------------


def pde_residual(rp: RiskPremium, t: float, b, h_t: float | None = None,
                 h_b: float | None = None) -> float:
    """Left-hand side of the risk-premium equation at (t, b), by finite differences.

    Step sizes default to two grid cells for tabulated evaluators and to small
    absolute steps for closed forms.
    """
    model = rp.model
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = model.n
    if isinstance(rp, GridPremium):
        h_t = h_t or 2 * (rp.t_grid[1] - rp.t_grid[0])
        h_b = h_b or 2 * (rp.b_grid[1] - rp.b_grid[0])
    else:
        h_t = h_t or 1e-3 * model.horizon
        h_b = h_b or 1e-3
    h_t = min(h_t, 0.5 * t, 0.5 * (model.horizon - t)) if 0 < t < model.horizon else h_t

    def val(s, x):
        return float(np.asarray(rp.value(s, x)).reshape(-1)[0])

    r_t = (val(t + h_t, b) - val(t - h_t, b)) / (2 * h_t)
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    r_c = val(t, b)
    eye = np.eye(n) * h_b
    for i in range(n):
        rp_i = val(t, b + eye[i])
        rm_i = val(t, b - eye[i])
        grad[i] = (rp_i - rm_i) / (2 * h_b)
        hess[i, i] = (rp_i - 2 * r_c + rm_i) / h_b ** 2
        for j in range(i):
            hess[i, j] = hess[j, i] = (
                val(t, b + eye[i] + eye[j]) - val(t, b + eye[i] - eye[j])
                - val(t, b - eye[i] + eye[j]) + val(t, b - eye[i] - eye[j])) / (4 * h_b ** 2)
    p = np.asarray(rp.psi(t, b), dtype=float).reshape(n, n)
    sb = model.sigma_inv @ b
    return float(-r_t - 0.5 * np.trace(p @ p.T @ hess) + 2 * (p @ sb) @ grad
                 - 0.5 * np.sum((p.T @ grad) ** 2) - sb @ sb)
