"""Market and prior types, the observation transform and the Bayesian drift filter.

The investor observes prices ``S`` driven by ``dS = diag(S)(B dt + sigma dW)``
with an unknown drift vector ``B``.  All information in the prices is carried by
the observation process ``Y_t = sigma^{-1} B t + W_t``; the posterior law of
``B`` given ``Y_t = y`` is the prior tilted by
``exp(<sigma^{-1} b, y> - |sigma^{-1} b|^2 t / 2)``.

Every function here accepts either a single ``n``-vector or a batch of shape
``(m, n)`` for the observation / drift argument and returns matching shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericalError

SPD_PIVOT_TOL = 1e-12
INTERIOR_MARGIN = 1e-8
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


class TimeRangeError(DomainError):
    """Time argument outside [0, T]."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def cholesky_spd(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Raises NumericalError when a pivot falls below ``SPD_PIVOT_TOL`` relative to
    the largest diagonal entry; nothing is regularized.
    """
    a = np.asarray(a, dtype=float)
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-14 * max(1.0, np.abs(a).max())):
        raise NumericalError("matrix is not symmetric")
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"matrix is not positive definite: {exc}") from None
    scale = max(float(np.max(np.diag(a))), np.finfo(float).tiny)
    if float(np.min(np.diag(low))) ** 2 <= SPD_PIVOT_TOL * scale:
        raise NumericalError("matrix is numerically singular (Cholesky pivot below tolerance)")
    return low


def spd_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    low = cholesky_spd(a)
    return linalg.cho_solve((low, True), rhs)


def spd_inverse(a: np.ndarray) -> np.ndarray:
    inv = spd_solve(a, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


# ---------------------------------------------------------------------------
# Market
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarketModel:
    """Known part of the market: volatility matrix, horizon, initial wealth and prices.

    ``sigma`` may be given as a scalar for a single asset. ``s0`` defaults to a
    vector of ones.
    """

    sigma: np.ndarray
    horizon: float
    x0: float = 0.0
    s0: np.ndarray | None = None
    max_condition: float = 1e10

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        n = sigma.shape[0]
        if sigma.shape != (n, n):
            raise DomainError(f"sigma must be square, got shape {sigma.shape}")
        if not np.all(np.isfinite(sigma)):
            raise DomainError("sigma has non-finite entries")
        cond = np.linalg.cond(sigma)
        if not np.isfinite(cond) or cond > self.max_condition:
            raise DomainError(
                f"sigma is not invertible within condition bound {self.max_condition:g} (cond={cond:g})")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        s0 = np.ones(n) if self.s0 is None else np.atleast_1d(np.asarray(self.s0, dtype=float))
        if s0.shape != (n,) or np.any(s0 <= 0):
            raise DomainError("s0 must be a vector of n positive prices")
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "s0", _frozen(s0))
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "x0", float(self.x0))
        cov = sigma @ sigma.T
        cov = 0.5 * (cov + cov.T)
        cholesky_spd(cov)
        object.__setattr__(self, "_cov", _frozen(cov))
        object.__setattr__(self, "_sigma_inv", _frozen(np.linalg.inv(sigma)))
        object.__setattr__(self, "_cov_inv", _frozen(spd_inverse(cov)))

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def cov(self) -> np.ndarray:
        """Sigma = sigma sigma^T."""
        return self._cov

    @property
    def sigma_inv(self) -> np.ndarray:
        return self._sigma_inv

    @property
    def cov_inv(self) -> np.ndarray:
        return self._cov_inv

    def check_time(self, t: float) -> float:
        t = float(t)
        if not (0.0 <= t <= self.horizon):
            raise TimeRangeError(f"t={t} outside [0, {self.horizon}]")
        return t

    def sharpe_sq(self, b) -> float:
        """|sigma^{-1} b|^2."""
        z = self.sigma_inv @ np.asarray(b, dtype=float)
        return float(z @ z)


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianPrior:
    """Normal prior N(mean, cov) on the drift."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise DomainError(f"prior covariance must be {n}x{n}, got {cov.shape}")
        try:
            cholesky_spd(cov)
        except NumericalError as exc:
            raise DomainError(f"Gaussian prior covariance must be SPD: {exc}") from None
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @classmethod
    def from_volatility(cls, b0: float, sigma0: float) -> "GaussianPrior":
        """One-dimensional prior with mean ``b0`` and drift volatility ``sigma0``."""
        return cls(np.array([b0]), np.array([[sigma0 ** 2]]))

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def cov_inv(self) -> np.ndarray:
        return _frozen(spd_inverse(self.cov))

    @property
    def covariance(self) -> np.ndarray:
        return self.cov

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        low = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((size, self.n)) @ low.T


@dataclass(frozen=True)
class DiscretePrior:
    """Prior with mass ``weights[i]`` on the column ``support[:, i]``."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.support, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        w = np.asarray(self.weights, dtype=float)
        n, m = v.shape
        if w.shape != (m,):
            raise DomainError(f"need {m} weights, got shape {w.shape}")
        if np.any(w <= 0) or np.any(w >= 1):
            raise DomainError("discrete prior weights must lie in (0, 1)")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"discrete prior weights sum to {w.sum()!r}, not 1")
        if m <= n:
            raise DomainError(f"need more support points than dimensions (N={m}, n={n})")
        if np.linalg.matrix_rank(v) != n:
            raise DomainError("support matrix must have rank n")
        mean = v @ w
        cov = (v - mean[:, None]) * w @ (v - mean[:, None]).T
        try:
            cholesky_spd(0.5 * (cov + cov.T))
        except NumericalError:
            raise DomainError("discrete prior covariance is not positive definite") from None
        object.__setattr__(self, "support", _frozen(v))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def n(self) -> int:
        return self.support.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.support @ self.weights

    @property
    def covariance(self) -> np.ndarray:
        c = self.support - self.mean[:, None]
        cov = (c * self.weights) @ c.T
        return 0.5 * (cov + cov.T)

    @cached_property
    def _hull(self):
        from scipy.spatial import ConvexHull

        return ConvexHull(self.support.T)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(np.cumsum(self.weights), u, side="right")
        idx = np.minimum(idx, len(self.weights) - 1)
        return self.support[:, idx].T


@dataclass(frozen=True)
class DiracPrior:
    """Known drift. Degenerate: the posterior never moves and psi is zero."""

    point: np.ndarray
    degenerate: bool = field(default=True, init=False)

    def __post_init__(self):
        object.__setattr__(self, "point", _frozen(np.atleast_1d(np.asarray(self.point, dtype=float))))

    @property
    def n(self) -> int:
        return self.point.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.point

    @property
    def covariance(self) -> np.ndarray:
        return np.zeros((self.n, self.n))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.broadcast_to(self.point, (size, self.n)).copy()


Prior = Union[GaussianPrior, DiscretePrior, DiracPrior]


def _check_prior(prior, model: MarketModel):
    if not isinstance(prior, (GaussianPrior, DiscretePrior, DiracPrior)):
        raise TypeError(f"unsupported prior type {type(prior).__name__}")
    if prior.n != model.n:
        raise DomainError(f"prior dimension {prior.n} does not match market dimension {model.n}")


def _as_batch(x, n: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and n == 1:
        x = x.reshape(1)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.shape[-1] != n:
        raise DomainError(f"expected vectors of length {n}, got shape {x.shape}")
    return batch, single


def _unbatch(x: np.ndarray, single: bool):
    return x[0] if single else x


# ---------------------------------------------------------------------------
# Observation transform
# ---------------------------------------------------------------------------


def observation_from_prices(model: MarketModel, t: float, prices) -> np.ndarray:
    """Map observed prices at time ``t`` to the observation value ``Y_t``."""
    t = model.check_time(t)
    s, single = _as_batch(prices, model.n)
    if np.any(~(s > 0)):
        raise DomainError("prices must be strictly positive")
    half_var = 0.5 * np.sum(model.sigma ** 2, axis=1) * t
    z = np.log(s / model.s0) + half_var
    return _unbatch(z @ model.sigma_inv.T, single)


def prices_from_observation(model: MarketModel, t: float, y) -> np.ndarray:
    """Inverse of :func:`observation_from_prices`."""
    t = model.check_time(t)
    yb, single = _as_batch(y, model.n)
    half_var = 0.5 * np.sum(model.sigma ** 2, axis=1) * t
    return _unbatch(model.s0 * np.exp(yb @ model.sigma.T - half_var), single)


# ---------------------------------------------------------------------------
# Posterior
# ---------------------------------------------------------------------------


def _gaussian_precision(prior: GaussianPrior, model: MarketModel, t: float) -> np.ndarray:
    p = prior.cov_inv + model.cov_inv * t
    return 0.5 * (p + p.T)


def _discrete_logits(prior: DiscretePrior, model: MarketModel, t: float, y: np.ndarray) -> np.ndarray:
    sv = model.sigma_inv @ prior.support              # n x N
    quad = 0.5 * np.sum(sv * sv, axis=0) * t           # |sigma^{-1} V_i|^2 t / 2
    return np.log(prior.weights) + y @ sv - quad


def posterior_weights(prior: DiscretePrior, model: MarketModel, t: float, y) -> np.ndarray:
    """Posterior masses on the support points of a discrete prior (max-shifted softmax)."""
    t = model.check_time(t)
    yb, single = _as_batch(y, model.n)
    logits = _discrete_logits(prior, model, t, yb)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return _unbatch(p, single)


def posterior_mean(prior: Prior, model: MarketModel, t: float, y) -> np.ndarray:
    """Posterior mean of the drift given ``Y_t = y``."""
    _check_prior(prior, model)
    t = model.check_time(t)
    yb, single = _as_batch(y, model.n)
    if isinstance(prior, DiracPrior):
        out = np.broadcast_to(prior.point, yb.shape).copy()
    elif isinstance(prior, GaussianPrior):
        rhs = prior.cov_inv @ prior.mean + yb @ model.sigma_inv
        out = spd_solve(_gaussian_precision(prior, model, t), rhs.T).T
    else:
        out = posterior_weights(prior, model, t, yb) @ prior.support.T
    return _unbatch(out, single)


def posterior_covariance(prior: Prior, model: MarketModel, t: float, y) -> np.ndarray:
    """Conditional covariance of the drift given ``Y_t = y``."""
    _check_prior(prior, model)
    t = model.check_time(t)
    yb, single = _as_batch(y, model.n)
    n = model.n
    if isinstance(prior, DiracPrior):
        out = np.zeros((yb.shape[0], n, n))
    elif isinstance(prior, GaussianPrior):
        cov = spd_inverse(_gaussian_precision(prior, model, t))
        out = np.broadcast_to(cov, (yb.shape[0], n, n)).copy()
    else:
        p = posterior_weights(prior, model, t, yb)              # m x N
        mean = p @ prior.support.T                              # m x n
        dev = prior.support.T[None, :, :] - mean[:, None, :]    # m x N x n
        out = np.einsum("mk,mki,mkj->mij", p, dev, dev)
        out = 0.5 * (out + np.swapaxes(out, 1, 2))
    return _unbatch(out, single)


def posterior_jacobian(prior: Prior, model: MarketModel, t: float, y) -> np.ndarray:
    """Jacobian of the posterior mean in ``y``: Cov(B | Y_t = y) (sigma^{-1})^T."""
    cov = posterior_covariance(prior, model, t, y)
    return cov @ model.sigma_inv.T


@dataclass(frozen=True)
class PosteriorState:
    """Filter state at time ``t``."""

    t: float
    y: np.ndarray
    b_hat: np.ndarray
    cov: np.ndarray


def posterior_state(prior: Prior, model: MarketModel, t: float, y) -> PosteriorState:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return PosteriorState(
        t=float(t), y=_frozen(y),
        b_hat=_frozen(posterior_mean(prior, model, t, y)),
        cov=_frozen(posterior_covariance(prior, model, t, y)))


# ---------------------------------------------------------------------------
# Domain of the posterior mean and its inverse
# ---------------------------------------------------------------------------


def check_interior(prior: Prior, b, margin: float = INTERIOR_MARGIN) -> None:
    """Raise DomainError if some row of ``b`` is not inside the image of the posterior mean.

    For a discrete prior that image is the open convex hull of the support;
    points closer than ``margin`` (relative to the hull diameter) to a face are
    rejected. Gaussian images are all of R^n.
    """
    if isinstance(prior, GaussianPrior):
        return
    if isinstance(prior, DiracPrior):
        raise DomainError("the posterior mean of a Dirac prior is not invertible")
    bb, _ = _as_batch(b, prior.n)
    v = prior.support
    span = float(np.max(np.ptp(v, axis=1)))
    tol = margin * span
    if prior.n == 1:
        lo, hi = float(v.min()), float(v.max())
        bad_lo = bb[:, 0] <= lo + tol
        bad_hi = bb[:, 0] >= hi - tol
        if np.any(bad_lo | bad_hi):
            k = int(np.argmax(bad_lo | bad_hi))
            face = f"lower face b={lo!r}" if bad_lo[k] else f"upper face b={hi!r}"
            raise DomainError(f"b={bb[k, 0]!r} is not inside the open hull ({face})")
        return
    hull = prior._hull
    dist = bb @ hull.equations[:, :-1].T + hull.equations[:, -1]   # m x faces, <0 inside
    worst = dist.max(axis=1)
    if np.any(worst >= -tol):
        k = int(np.argmax(worst >= -tol))
        face = int(np.argmax(dist[k]))
        verts = hull.simplices[face].tolist()
        raise DomainError(
            f"b={bb[k].tolist()} is not inside the open hull (face through support points {verts})")


def _moment_matched_inverse(prior: Prior, model: MarketModel, t: float, b: np.ndarray) -> np.ndarray:
    """Inverse of the Gaussian posterior mean with the prior's first two moments."""
    cov0_inv = spd_inverse(prior.covariance)
    prec = cov0_inv + model.cov_inv * t
    return (b @ prec.T - prior.mean @ cov0_inv.T) @ model.sigma


def invert_posterior_mean(prior: Prior, model: MarketModel, t: float, b,
                          tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
    """Observation value ``y`` with ``posterior_mean(t, y) = b``.

    Damped Newton iteration on the residual using the Jacobian
    ``Cov(B | Y_t = y) (sigma^{-1})^T``, started from the moment-matched Gaussian
    inverse. The step is halved while the residual norm increases.
    """
    _check_prior(prior, model)
    t = model.check_time(t)
    bb, single = _as_batch(b, model.n)
    check_interior(prior, bb)
    y = _moment_matched_inverse(prior, model, t, bb)
    res = posterior_mean(prior, model, t, y) - bb
    norm = np.linalg.norm(res, axis=1)
    active = norm > tol
    for _ in range(max_iter):
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        jac = posterior_jacobian(prior, model, t, y[idx])
        try:
            step = np.linalg.solve(jac, res[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise NumericalError("singular Jacobian in posterior-mean inversion",
                                 residual=float(norm.max())) from None
        scale = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        new_y = y[idx].copy()
        new_res = res[idx].copy()
        new_norm = norm[idx].copy()
        for _ in range(60):
            cand = y[idx][pending] - scale[pending, None] * step[pending]
            cres = posterior_mean(prior, model, t, cand) - bb[idx][pending]
            cnorm = np.linalg.norm(cres, axis=1)
            ok = np.isfinite(cnorm) & (cnorm <= norm[idx][pending])
            sub = np.nonzero(pending)[0]
            new_y[sub[ok]] = cand[ok]
            new_res[sub[ok]] = cres[ok]
            new_norm[sub[ok]] = cnorm[ok]
            pending[sub[ok]] = False
            if not np.any(pending):
                break
            scale[pending] *= 0.5
        y[idx], res[idx], norm[idx] = new_y, new_res, new_norm
        active = norm > tol
    if np.any(active):
        raise NumericalError(
            f"posterior-mean inversion did not converge in {max_iter} iterations",
            residual=float(norm.max()))
    # a residual of tol in b is a much larger error in y when the Jacobian is
    # small; one undamped polishing step squares it away
    for _ in range(2):
        jac = posterior_jacobian(prior, model, t, y)
        try:
            cand = y - np.linalg.solve(jac, res[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        cres = posterior_mean(prior, model, t, cand) - bb
        cnorm = np.linalg.norm(cres, axis=1)
        ok = np.isfinite(cnorm) & (cnorm <= norm)
        y[ok], res[ok], norm[ok] = cand[ok], cres[ok], cnorm[ok]
    return _unbatch(y, single)


def psi(prior: Prior, model: MarketModel, t: float, b) -> np.ndarray:
    """Diffusion matrix of the posterior-mean process at ``(t, b)``.

    ``psi(t, b) = Cov(B | Y_t = y*) (sigma^{-1})^T`` with ``y*`` the unique
    observation producing posterior mean ``b``. Zero for a Dirac prior.
    """
    _check_prior(prior, model)
    t = model.check_time(t)
    bb, single = _as_batch(b, model.n)
    n = model.n
    if isinstance(prior, DiracPrior):
        out = np.zeros((bb.shape[0], n, n))
    elif isinstance(prior, GaussianPrior):
        a = model.cov + prior.cov * t
        a = 0.5 * (a + a.T)
        val = prior.cov @ spd_solve(a, model.sigma)
        out = np.broadcast_to(val, (bb.shape[0], n, n)).copy()
    else:
        y = invert_posterior_mean(prior, model, t, bb)
        out = posterior_jacobian(prior, model, t, np.atleast_2d(y))
    return _unbatch(out, single)
