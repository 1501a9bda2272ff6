"""Scenario configuration files.

INI layout (all keys optional unless noted)::

    [asset Asset 1]          one section per asset, name after "asset "
    b0 = 0.05                prior mean drift (required)
    sigma = 0.05             asset volatility (required)
    T = 1                    horizon
    sigma0 = 0.1             prior drift volatility (Gaussian prior)
    support = 0.0, 0.1       discrete prior support (instead of sigma0)
    weights = 0.5, 0.5       discrete prior weights
    theta = 0.01             terminal variance budget
    x0 = 0                   initial wealth

    [sweep]
    start = 0                axis range, inclusive
    stop = 1
    points = 200

    [mc]
    n_paths = 100000
    n_steps = 250
    seed = 0
    store_stride = 10
    workers = 1

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core_model import DiracPrior, DiscretePrior, GaussianPrior, MarketModel
from .errors import BayesMarkowitzError, ConfigError

ASSET_KEYS = {"b0", "sigma", "t", "sigma0", "support", "weights", "theta", "x0"}
SWEEP_KEYS = {"start", "stop", "points"}
MC_KEYS = {"n_paths", "n_steps", "seed", "store_stride", "workers"}

DEFAULT_POINTS = 200


@dataclass(frozen=True)
class AssetConfig:
    name: str
    b0: float
    sigma: float
    T: float = 1.0
    sigma0: float | None = None
    support: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None
    theta: float = 0.01
    x0: float = 0.0

    def model(self) -> MarketModel:
        return MarketModel(self.sigma, self.T, x0=self.x0)

    def prior(self):
        if self.support is not None:
            return DiscretePrior(np.array([self.support]), np.array(self.weights))
        if self.sigma0 is None or self.sigma0 == 0:
            return DiracPrior([self.b0])
        return GaussianPrior.from_volatility(self.b0, self.sigma0)


@dataclass(frozen=True)
class SweepConfig:
    start: float
    stop: float
    points: int = DEFAULT_POINTS

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 100_000
    n_steps: int = 250
    seed: int = 0
    store_stride: int = 10
    workers: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    assets: tuple[AssetConfig, ...]
    sweep: SweepConfig | None = None
    mc: MCConfig = field(default_factory=MCConfig)
    source: str = "builtin"

    def with_mc(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, mc=replace(self.mc, **kw)) if kw else self

    def echo(self) -> list[str]:
        """Resolved configuration as 'key = value' lines for output headers."""
        lines = [f"config = {self.source}"]
        for a in self.assets:
            for k, v in vars(a).items():
                if k != "name" and v is not None:
                    lines.append(f"{a.name}.{k} = {_fmt(v)}")
        if self.sweep is not None:
            for k, v in vars(self.sweep).items():
                lines.append(f"sweep.{k} = {_fmt(v)}")
        for k, v in vars(self.mc).items():
            lines.append(f"mc.{k} = {_fmt(v)}")
        return lines


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _float(section: str, key: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    if not np.isfinite(v):
        raise ConfigError(f"[{section}] {key}: must be finite")
    return v


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def _floats(section: str, key: str, raw: str) -> tuple[float, ...]:
    return tuple(_float(section, key, x) for x in raw.split(",") if x.strip())


def _check_keys(section: str, got, allowed) -> None:
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(extra)}")


def _asset(name: str, sec) -> AssetConfig:
    label = f"asset {name}"
    _check_keys(label, sec.keys(), ASSET_KEYS)
    for req in ("b0", "sigma"):
        if req not in sec:
            raise ConfigError(f"[{label}] missing required key {req}")
    kw = {}
    for k in ("b0", "sigma", "sigma0", "theta", "x0"):
        if k in sec:
            kw[k] = _float(label, k, sec[k])
    if "t" in sec:
        kw["T"] = _float(label, "T", sec["t"])
    if "support" in sec or "weights" in sec:
        if "sigma0" in sec:
            raise ConfigError(f"[{label}] give either sigma0 or support/weights, not both")
        if not ("support" in sec and "weights" in sec):
            raise ConfigError(f"[{label}] support and weights must be given together")
        kw["support"] = _floats(label, "support", sec["support"])
        kw["weights"] = _floats(label, "weights", sec["weights"])
        if len(kw["support"]) != len(kw["weights"]):
            raise ConfigError(f"[{label}] support and weights differ in length")
        mean = float(np.dot(kw["support"], kw["weights"]))
        if abs(mean - kw["b0"]) > 1e-12 * max(1.0, abs(mean)):
            raise ConfigError(f"[{label}] b0={kw['b0']!r} differs from the prior mean {mean!r}")
    a = AssetConfig(name=name, **kw)
    if not a.sigma > 0:
        raise ConfigError(f"[{label}] sigma: must be positive")
    if not a.T >= 0:
        raise ConfigError(f"[{label}] T: must be non-negative")
    if a.sigma0 is not None and a.sigma0 < 0:
        raise ConfigError(f"[{label}] sigma0: must be non-negative")
    if not a.theta > 0:
        raise ConfigError(f"[{label}] theta: must be positive")
    return a


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    assets, sweep, mc = [], None, MCConfig()
    for name in cp.sections():
        sec = cp[name]
        if name.startswith("asset "):
            assets.append(_asset(name[6:].strip(), sec))
        elif name == "sweep":
            _check_keys(name, sec.keys(), SWEEP_KEYS)
            for req in ("start", "stop"):
                if req not in sec:
                    raise ConfigError(f"[sweep] missing required key {req}")
            sweep = SweepConfig(_float(name, "start", sec["start"]), _float(name, "stop", sec["stop"]),
                                _int(name, "points", sec.get("points", str(DEFAULT_POINTS))))
            if not sweep.stop > sweep.start:
                raise ConfigError("[sweep] stop must be greater than start")
            if sweep.points < 2:
                raise ConfigError("[sweep] points must be at least 2")
        elif name == "mc":
            _check_keys(name, sec.keys(), MC_KEYS)
            mc = MCConfig(**{k: _int(name, k, v) for k, v in sec.items()})
        else:
            raise ConfigError(f"unknown section [{name}]")
    if not assets:
        raise ConfigError(f"{source}: no [asset ...] section")
    if mc.n_paths < 2 or mc.n_steps < 1 or mc.store_stride < 1 or mc.workers < 1:
        raise ConfigError("[mc] n_paths >= 2, n_steps >= 1, store_stride >= 1, workers >= 1 required")
    if not 0 <= mc.seed < 2 ** 64:
        raise ConfigError("[mc] seed must be an unsigned 64-bit integer")
    return ScenarioConfig(tuple(assets), sweep, mc, source)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path.name)


def build_prior_and_model(asset: AssetConfig):
    """Turn an asset section into (prior, model), mapping model errors to ConfigError."""
    try:
        return asset.prior(), asset.model()
    except ConfigError:
        raise
    except (BayesMarkowitzError, ValueError) as exc:
        raise ConfigError(f"[asset {asset.name}] {exc}") from None


# Parameter sets behind the five figures.

def _assets(*rows) -> tuple[AssetConfig, ...]:
    return tuple(AssetConfig(*r) for r in rows)


BUILTIN = {
    "figure1": ScenarioConfig(
        _assets(("Asset 1", 0.05, 0.05, 1.0), ("Asset 2", 0.05, 0.10, 1.0),
                ("Asset 3", 0.05, 0.20, 1.0)),
        SweepConfig(0.0, 1.0, DEFAULT_POINTS), source="builtin:figure1"),
    "figure2": ScenarioConfig(
        _assets(("Asset 4", 0.10, 0.05, 1.0)),
        SweepConfig(0.0, 0.30, 512), source="builtin:figure2"),
    "figure3": ScenarioConfig(
        _assets(("Asset 5", 0.05, 1.0, 1.0, 0.75), ("Asset 6", 0.05, 1.0, 1.0, 0.35),
                ("Asset 7", 0.05, 1.0, 1.0, 0.10)),
        SweepConfig(0.01, 1.0, DEFAULT_POINTS), source="builtin:figure3"),
    "figure4": ScenarioConfig(
        _assets(("Asset 8", 0.05, 0.20, 1.0, 0.40, None, None, 0.01)),
        None, MCConfig(n_paths=100_000, n_steps=250, seed=20240601, store_stride=10),
        source="builtin:figure4"),
    "figure5": ScenarioConfig(
        _assets(("Asset 9", 0.05, 0.20, 1.0, 0.75), ("Asset 10", 0.05, 0.20, 1.0, 0.35),
                ("Asset 11", 0.05, 0.20, 1.0, 0.10)),
        SweepConfig(0.0, 50.0, DEFAULT_POINTS), source="builtin:figure5"),
}
