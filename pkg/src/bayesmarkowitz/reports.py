"""Sensitivity sweeps and their CSV / SVG output."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .config import AssetConfig, ScenarioConfig, build_prior_and_model
from .errors import ConfigError
from .performance import (nl_wealth_moments, sharpe_learning_gaussian,
                          sharpe_nonlearning, sharpe_nonlearning_gaussian, value_of_information)
from .simulator import (SimulationSpec, StrategyKind, empirical_sharpe, ensemble_moments,
                        sharpe_standard_error, simulate)


@dataclass
class Table:
    """Named columns plus '#' metadata lines."""

    columns: list[str]
    rows: list[tuple]
    meta: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.meta:
            buf.write(f"# {line}\n")
        buf.write(",".join(self.columns) + "\n")
        for r in self.rows:
            buf.write(",".join(_cell(v) for v in r) + "\n")
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def read_csv(path) -> Table:
    meta, rows, cols = [], [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            meta.append(line[1:].strip())
        elif cols is None:
            cols = line.split(",")
        elif line:
            rows.append(tuple(line.split(",")))
    return Table(cols or [], rows, meta)


def _require_sweep(cfg: ScenarioConfig):
    if cfg.sweep is None:
        raise ConfigError("this command needs a [sweep] section")
    return cfg.sweep.grid()


def _label(name: str) -> str:
    return name.strip().lower().replace(" ", "_")


# ---------------------------------------------------------------------------
# Analytic sweeps (closed forms for one asset with a Gaussian prior)
# ---------------------------------------------------------------------------


def _vi_gaussian(b0, sigma, sigma0, T) -> tuple[float, float]:
    shl = sharpe_learning_gaussian(b0, sigma, sigma0, T)
    shnl = sharpe_nonlearning_gaussian(b0, sigma, sigma0, T)
    return shl, shnl


def sweep_sigma0(cfg: ScenarioConfig) -> Table:
    """Rows (asset, sigma0, sh_L, sh_NL, VI) over the sweep range of sigma0."""
    grid = _require_sweep(cfg)
    if grid[0] < 0:
        raise ConfigError("[sweep] sigma0 range must be non-negative")
    rows = []
    for a in cfg.assets:
        for s0 in grid:
            shl, shnl = _vi_gaussian(a.b0, a.sigma, s0, a.T)
            rows.append((a.name, s0, shl, shnl, shl - shnl))
    meta = cfg.echo() + ["axis = sigma0 (overrides each asset sigma0)", "evaluation = closed form, Gaussian prior"]
    return Table(["asset", "sigma0", "sh_learning", "sh_nonlearning", "value_of_information"],
                 rows, meta)


def sweep_sharpe(cfg: ScenarioConfig) -> Table:
    """Rows (sigma, asset_sharpe, VI per asset); b0 and sigma0 come from each asset."""
    grid = _require_sweep(cfg)
    if not grid[0] > 0:
        raise ConfigError("[sweep] sigma range must be positive")
    b0s = {a.b0 for a in cfg.assets}
    if len(b0s) != 1:
        raise ConfigError("sweep-sharpe needs one common b0 across assets")
    for a in cfg.assets:
        if a.sigma0 is None:
            raise ConfigError(f"[asset {a.name}] sigma0 is required for sweep-sharpe")
    b0 = b0s.pop()
    rows = []
    for s in grid:
        vis = []
        for a in cfg.assets:
            shl, shnl = _vi_gaussian(a.b0, s, a.sigma0, a.T)
            vis.append(shl - shnl)
        rows.append((s, b0 / s, *vis))
    cols = ["sigma", "asset_sharpe"] + [f"vi_{_label(a.name)}" for a in cfg.assets]
    meta = cfg.echo() + ["axis = sigma (overrides each asset sigma)", "evaluation = closed form, Gaussian prior"]
    return Table(cols, rows, meta)


def sweep_horizon(cfg: ScenarioConfig) -> Table:
    """Rows (T, VI per asset, limit flag). VI at T = 0 is reported as 0 (flag = 1)."""
    grid = _require_sweep(cfg)
    if grid[0] < 0:
        raise ConfigError("[sweep] horizon range must be non-negative")
    for a in cfg.assets:
        if a.sigma0 is None:
            raise ConfigError(f"[asset {a.name}] sigma0 is required for sweep-horizon")
    rows = []
    for T in grid:
        if T == 0:
            rows.append((T, *([0.0] * len(cfg.assets)), 1))
            continue
        vis = []
        for a in cfg.assets:
            shl, shnl = _vi_gaussian(a.b0, a.sigma, a.sigma0, T)
            vis.append(shl - shnl)
        rows.append((T, *vis, 0))
    cols = ["T"] + [f"vi_{_label(a.name)}" for a in cfg.assets] + ["vi_by_convention"]
    meta = cfg.echo() + ["axis = T (overrides each asset T)", "evaluation = closed form, Gaussian prior",
                         "vi_by_convention = 1 marks T = 0 where both Sharpe ratios are 0/0"]
    return Table(cols, rows, meta)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def _spec(cfg: ScenarioConfig, kind: StrategyKind, stride: int | None) -> tuple[SimulationSpec, AssetConfig]:
    if len(cfg.assets) != 1:
        raise ConfigError("Monte Carlo commands take exactly one [asset ...] section")
    a = cfg.assets[0]
    prior, model = build_prior_and_model(a)
    mc = cfg.mc
    return SimulationSpec(model, prior, a.theta, mc.n_paths, mc.n_steps, mc.seed, kind,
                          store_stride=stride), a


def sweep_time(cfg: ScenarioConfig) -> Table:
    """Rows (t, empirical learning Sharpe and SE, analytic non-learning Sharpe, VI, flag)."""
    spec, a = _spec(cfg, StrategyKind.LEARNING, cfg.mc.store_stride)
    ens = simulate(spec, workers=cfg.mc.workers)
    rows = []
    for i, t in enumerate(ens.times):
        if i == 0:
            rows.append((t, 0.0, 0.0, 0.0, 0.0, 1))
            continue
        shl = empirical_sharpe(ens, i)
        se = sharpe_standard_error(ens, i)
        shnl = sharpe_nonlearning(spec.prior, spec.model, t)
        rows.append((t, shl, se, shnl, shl - shnl, 0))
    meta = cfg.echo() + [
        "axis = t", "learning = empirical Sharpe over simulated paths",
        "nonlearning = closed-form moments at t",
        "vi_by_convention = 1 marks t = 0 where both Sharpe ratios are 0/0",
        f"clamp_fraction = {ens.meta['clamp_fraction']!r}"]
    return Table(["t", "sh_learning_empirical", "sh_learning_se", "sh_nonlearning",
                  "value_of_information", "vi_by_convention"], rows, meta)


def run_simulation(cfg: ScenarioConfig):
    """Both strategies at the horizon; returns (summary table, ensemble)."""
    spec, a = _spec(cfg, StrategyKind.BOTH, None)
    ens = simulate(spec, workers=cfg.mc.workers)
    rep = value_of_information(spec.prior, spec.model, a.theta)
    ml = ensemble_moments(ens, -1, "learning")
    mn = ensemble_moments(ens, -1, "nonlearning")
    nl_mean, nl_var = nl_wealth_moments(spec.prior, spec.model, a.theta, spec.model.horizon)
    row = {
        "n_paths": spec.n_paths, "n_steps": spec.n_steps, "seed": spec.seed,
        "sh_learning_empirical": empirical_sharpe(ens, -1, "learning"),
        "sh_learning_se": sharpe_standard_error(ens, -1, "learning"),
        "sh_learning": rep.sh_learning,
        "sh_nonlearning_empirical": empirical_sharpe(ens, -1, "nonlearning"),
        "sh_nonlearning_se": sharpe_standard_error(ens, -1, "nonlearning"),
        "sh_nonlearning": rep.sh_nonlearning,
        "var_learning": ml.variance, "var_learning_se": ml.variance_se, "theta": a.theta,
        "mean_learning": ml.mean, "mean_learning_se": ml.mean_se,
        "mean_nonlearning": mn.mean, "mean_nonlearning_se": mn.mean_se,
        "mean_nonlearning_analytic": nl_mean,
        "var_nonlearning": mn.variance, "var_nonlearning_analytic": nl_var,
        "b_hat_mean": float(ml.b_hat_mean[0]), "b_hat_se": float(ml.b_hat_se[0]),
        "clamp_fraction": ens.meta["clamp_fraction"],
    }
    return Table(list(row), [tuple(row.values())], cfg.echo()), ens


def path_table(ens) -> Table:
    cols = ["path", "drift", "x_learning_T", "x_nonlearning_T"]
    rows = list(zip(range(ens.n_paths), ens.drift[:, 0], ens.terminal_wealth("learning"),
                    ens.terminal_wealth("nonlearning")))
    return Table(cols, rows, [f"seed = {ens.spec.seed}"])


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def line_chart_svg(series: dict, title: str, xlabel: str, ylabel: str,
                   width: int = 640, height: int = 420) -> str:
    """Polyline chart with axes, ticks and a legend. ``series`` maps label -> (x, y)."""
    ml, mr, mt, mb = 70, 150, 40, 50
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(min(ys.min(), 0.0)), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for v in np.linspace(x0, x1, 6):
        out.append(f'<line x1="{px(v):.1f}" y1="{mt + ph}" x2="{px(v):.1f}" y2="{mt + ph + 5}" stroke="black"/>'
                   f'<text x="{px(v):.1f}" y="{mt + ph + 18}" text-anchor="middle">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 6):
        out.append(f'<line x1="{ml - 5}" y1="{py(v):.1f}" x2="{ml}" y2="{py(v):.1f}" stroke="black"/>'
                   f'<text x="{ml - 8}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, (x, y)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = mt + 15 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>'
                   f'<text x="{ml + pw + 35}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def chart_for(kind: str, table: Table) -> str:
    """Default chart of a sweep table."""
    if kind == "sweep-sigma0":
        series = {}
        names = [r[0] for r in table.rows]
        s0 = table.column("sigma0")
        for name in dict.fromkeys(names):
            idx = [i for i, n in enumerate(names) if n == name]
            series[f"VI {name}"] = (s0[idx], table.column("value_of_information")[idx])
            if len(set(names)) == 1:
                series[f"Sh L {name}"] = (s0[idx], table.column("sh_learning")[idx])
                series[f"Sh NL {name}"] = (s0[idx], table.column("sh_nonlearning")[idx])
        return line_chart_svg(series, "Value of information vs drift volatility", "sigma0", "Sharpe")
    if kind == "sweep-sharpe":
        x = table.column("asset_sharpe")
        series = {c[3:]: (x, table.column(c)) for c in table.columns if c.startswith("vi_")}
        return line_chart_svg(series, "Value of information vs asset Sharpe ratio",
                              "b0 / sigma", "VI")
    if kind == "sweep-horizon":
        x = table.column("T")
        series = {c[3:]: (x, table.column(c)) for c in table.columns
                  if c.startswith("vi_") and c != "vi_by_convention"}
        return line_chart_svg(series, "Value of information vs horizon", "T", "VI")
    if kind == "sweep-time":
        x = table.column("t")
        series = {"VI": (x, table.column("value_of_information")),
                  "Sh L (MC)": (x, table.column("sh_learning_empirical")),
                  "Sh NL": (x, table.column("sh_nonlearning"))}
        return line_chart_svg(series, "Value of information over time", "t", "Sharpe")
    raise ValueError(kind)
