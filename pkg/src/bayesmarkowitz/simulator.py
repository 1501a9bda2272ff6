"""Monte Carlo engine for learning and non-learning wealth paths.

Each path owns a Philox stream keyed by (seed, path index), so results do not
depend on how paths are split across workers. Wealth is advanced with an
Euler step on dX = a'(B dt + sigma dW) under the true drift B; the posterior
mean is recomputed exactly from the accumulated observation Y_t rather than
by discretizing its own diffusion.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core_model as cm
from .core_model import MarketModel
from .errors import DomainError, NumericalError
from .risk_premium import RiskPremium, premium_for
from .strategy import StrategyParams, bayes_control, nonlearning_control, nonlearning_params

DEFAULT_STEPS = 250
DEFAULT_CHUNK = 2048
DEFAULT_CLAMP_BUDGET = 1e-3


class StrategyKind(str, enum.Enum):
    LEARNING = "learning"
    NONLEARNING = "nonlearning"
    BOTH = "both"


@dataclass(frozen=True)
class SimulationSpec:
    """What to simulate.

    ``store_stride`` controls the stored time series: None keeps only t=0 and
    t=T, k keeps every k-th step (and always the last one). ``chunk_size`` is
    the unit of work handed to a worker; it is fixed so that the split is the
    same for any worker count.
    """

    model: MarketModel
    prior: cm.Prior
    theta: float
    n_paths: int
    n_steps: int = DEFAULT_STEPS
    seed: int = 0
    strategy_kind: StrategyKind = StrategyKind.BOTH
    rp: RiskPremium | None = None
    store_stride: int | None = None
    clamp_budget: float = DEFAULT_CLAMP_BUDGET
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("variance budget must be positive")
        if self.n_paths < 1 or self.n_steps < 1:
            raise DomainError("n_paths and n_steps must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.store_stride is not None and self.store_stride < 1:
            raise DomainError("store_stride must be positive")
        object.__setattr__(self, "strategy_kind", StrategyKind(self.strategy_kind))

    @property
    def dt(self) -> float:
        return self.model.horizon / self.n_steps

    def stored_steps(self) -> np.ndarray:
        stride = self.store_stride or self.n_steps
        steps = np.arange(0, self.n_steps + 1, stride)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps


@dataclass(frozen=True)
class PathEnsemble:
    """Simulated paths. Wealth arrays have shape (n_paths, n_stored)."""

    spec: SimulationSpec
    steps: np.ndarray
    drift: np.ndarray
    x_learning: np.ndarray | None
    x_nonlearning: np.ndarray | None
    b_hat: np.ndarray
    y: np.ndarray
    clamp_count: int
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.spec.dt

    @property
    def n_paths(self) -> int:
        return self.drift.shape[0]

    def wealth(self, strategy: str = "learning") -> np.ndarray:
        arr = self.x_learning if StrategyKind(strategy) is StrategyKind.LEARNING else self.x_nonlearning
        if arr is None:
            raise DomainError(f"{strategy} strategy was not simulated")
        return arr

    def terminal_wealth(self, strategy: str = "learning") -> np.ndarray:
        return self.wealth(strategy)[:, -1]

    def save_npz(self, path) -> None:
        arrays = {"steps": self.steps, "drift": self.drift, "b_hat": self.b_hat, "y": self.y,
                  "clamp_count": np.array(self.clamp_count), "seed": np.array(self.spec.seed, dtype=np.uint64)}
        if self.x_learning is not None:
            arrays["x_learning"] = self.x_learning
        if self.x_nonlearning is not None:
            arrays["x_nonlearning"] = self.x_nonlearning
        np.savez_compressed(Path(path), **arrays)

    @classmethod
    def load_npz(cls, path, spec: SimulationSpec) -> "PathEnsemble":
        with np.load(Path(path)) as z:
            if int(z["seed"]) != spec.seed:
                raise DomainError("cached ensemble was produced with a different seed")
            return cls(spec, z["steps"], z["drift"],
                       z["x_learning"] if "x_learning" in z else None,
                       z["x_nonlearning"] if "x_nonlearning" in z else None,
                       z["b_hat"], z["y"], int(z["clamp_count"]))


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Independent stream for one path, fixed by (seed, path_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(path_index,))))


def _draw_chunk(spec: SimulationSpec, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    n = spec.model.n
    m = stop - start
    drift = np.empty((m, n))
    dw = np.empty((spec.n_steps, m, n))
    sq = np.sqrt(spec.dt)
    for j in range(m):
        g = path_generator(spec.seed, start + j)
        drift[j] = spec.prior.sample(g, 1)[0]
        dw[:, j, :] = g.standard_normal((spec.n_steps, n)) * sq
    return drift, dw


def _run_chunk(spec: SimulationSpec, rp: RiskPremium, lp: StrategyParams | None,
               nlp: StrategyParams | None, start: int, stop: int):
    model, prior = spec.model, spec.prior
    drift, dw = _draw_chunk(spec, start, stop)
    m, n = drift.shape
    dt = spec.dt
    steps = spec.stored_steps()
    k_out = len(steps)
    x_l = np.full(m, model.x0)
    x_nl = np.full(m, model.x0)
    y = np.zeros((m, n))
    out_l = np.empty((m, k_out)) if lp is not None else None
    out_nl = np.empty((m, k_out)) if nlp is not None else None
    out_b = np.empty((m, k_out, n))
    out_y = np.empty((m, k_out, n))
    b0 = np.atleast_1d(prior.mean)
    obs_drift = drift @ model.sigma_inv.T * dt
    clamps = 0
    slot = 0
    for k in range(spec.n_steps + 1):
        t = k * dt if k < spec.n_steps else model.horizon
        b_hat = cm.posterior_mean(prior, model, t, y)
        if slot < k_out and steps[slot] == k:
            out_b[:, slot] = b_hat
            out_y[:, slot] = y
            if out_l is not None:
                out_l[:, slot] = x_l
            if out_nl is not None:
                out_nl[:, slot] = x_nl
            slot += 1
        if k == spec.n_steps:
            break
        ret = drift * dt + dw[k] @ model.sigma.T
        if lp is not None:
            b_eval, c = rp.project(t, b_hat)
            clamps += c
            jac = cm.posterior_jacobian(prior, model, t, y)
            a = bayes_control(t, x_l, b_eval, lp, rp, psi_value=jac)
            x_l = x_l + np.sum(a * ret, axis=1)
        if nlp is not None:
            a = nonlearning_control(t, x_nl, nlp, model, b0)
            x_nl = x_nl + np.sum(a * ret, axis=1)
        y = y + obs_drift + dw[k]
    for arr in (out_l, out_nl, out_b):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite values in paths {start}..{stop - 1}")
    return drift, out_l, out_nl, out_b, out_y, clamps


def simulate(spec: SimulationSpec, workers: int = 1) -> PathEnsemble:
    """Run the ensemble on ``workers`` threads; output is independent of ``workers``."""
    kind = spec.strategy_kind
    # the non-learning strategy and the filter never touch the risk premium
    rp = spec.rp
    if rp is None and kind is not StrategyKind.NONLEARNING:
        rp = premium_for(spec.prior, spec.model)
    lp = nlp = None
    if kind in (StrategyKind.LEARNING, StrategyKind.BOTH):
        lp = StrategyParams.from_budget(spec.theta, rp.r0, spec.model.x0)
    if kind in (StrategyKind.NONLEARNING, StrategyKind.BOTH):
        nlp = nonlearning_params(spec.theta, spec.model, np.atleast_1d(spec.prior.mean))

    bounds = [(s, min(s + spec.chunk_size, spec.n_paths))
              for s in range(0, spec.n_paths, spec.chunk_size)]

    def job(b):
        return _run_chunk(spec, rp, lp, nlp, *b)

    if workers <= 1:
        parts = [job(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))

    clamps = sum(p[5] for p in parts)
    total = spec.n_paths * spec.n_steps
    if lp is not None and clamps > spec.clamp_budget * total:
        lo, hi = getattr(rp, "domain", (None, None))
        raise NumericalError(
            f"posterior mean left the premium domain [{lo}, {hi}] on {clamps} of {total} steps "
            f"(budget {spec.clamp_budget:g})")

    def cat(i):
        return None if parts[0][i] is None else np.concatenate([p[i] for p in parts])

    ens = PathEnsemble(spec, spec.stored_steps(), cat(0), cat(1), cat(2), cat(3), cat(4), clamps,
                       {"seed": spec.seed, "n_paths": spec.n_paths, "n_steps": spec.n_steps,
                        "r0": float(rp.r0) if rp is not None else float("nan"),
                        "clamp_fraction": clamps / total})
    for a in (ens.steps, ens.drift, ens.x_learning, ens.x_nonlearning, ens.b_hat, ens.y):
        if a is not None:
            a.setflags(write=False)
    return ens


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def empirical_sharpe(ensemble: PathEnsemble, t_index: int = -1, strategy: str = "learning") -> float:
    """Sample Sharpe ratio (mean(X_t) - x0) / sd(X_t), sd with the N - 1 normalization.

    Written as sqrt(N - 1) / N * sum(X - x0) / sqrt(sum X^2 - (sum X)^2 / N).
    """
    x = ensemble.wealth(strategy)[:, t_index]
    n = x.size
    x0 = ensemble.spec.model.x0
    centered = x - x.mean()
    ss = float(centered @ centered)
    if not ss > 0:
        raise NumericalError("zero sample variance: Sharpe ratio undefined")
    return float(np.sqrt(n - 1) / n * np.sum(x - x0) / np.sqrt(ss))


def sharpe_standard_error(ensemble: PathEnsemble, t_index: int = -1,
                          strategy: str = "learning") -> float:
    """Delta-method standard error of :func:`empirical_sharpe` (non-normal returns)."""
    x = ensemble.wealth(strategy)[:, t_index]
    n = x.size
    sh = empirical_sharpe(ensemble, t_index, strategy)
    z = (x - x.mean()) / x.std()
    skew = float(np.mean(z ** 3))
    kurt = float(np.mean(z ** 4))
    return float(np.sqrt(max(1.0 - skew * sh + 0.25 * (kurt - 1.0) * sh * sh, 0.0) / n))


@dataclass(frozen=True)
class EnsembleMoments:
    mean: float
    variance: float
    mean_se: float
    variance_se: float
    b_hat_mean: np.ndarray
    b_hat_se: np.ndarray


def ensemble_moments(ensemble: PathEnsemble, t_index: int = -1,
                     strategy: str = "learning") -> EnsembleMoments:
    """Unbiased sample mean/variance of wealth at a stored time, with standard errors."""
    x = ensemble.wealth(strategy)[:, t_index]
    n = x.size
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    # sqrt((m4 - var^2) / n), scaled by the variance so huge wealth does not overflow
    if var > 0:
        kurt = float(np.mean(((x - mean) / np.sqrt(var)) ** 4))
        var_se = var * float(np.sqrt(max(kurt - 1.0, 0.0) / n))
    else:
        var_se = 0.0
    b = ensemble.b_hat[:, t_index]
    b_se = b.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(b.shape[1])
    return EnsembleMoments(mean, var, float(np.sqrt(var / n)), var_se, b.mean(axis=0), b_se)
