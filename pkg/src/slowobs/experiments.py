"""Scenario orchestration: configs, runs, sweeps, scaling fits, CSV output.

A scenario fixes (model, size, observable, preparation recipe, time grid,
seeds) and emits every diagnostic as rows of one long-form CSV file per
diagnostic.  Sweeps repeat a scenario over system sizes and fit power
laws in the sector dimension.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from slowobs import diagnostics as dg
from slowobs.basis import build_basis
from slowobs.operators import (
    HermitianOperator,
    build_density_wave,
    build_energy_difference,
    build_tilted_ising,
    build_xxz,
    coarse_grain,
    _site_op,
    _SZ,
)
from slowobs.propagation import PureState
from slowobs.spectral import Spectrum, diagonalize
from slowobs.states import (
    canonical_product_state,
    gaussian_random_state,
    microcanonical_window_state,
    tilted_state,
    two_subspace_from_delta,
)
from slowobs.time_reversal import TimeReversal

CSV_COLUMNS = [
    "scenario_id",
    "model",
    "L",
    "q",
    "delta_X",
    "recipe_kind",
    "kappa",
    "seed",
    "theta",
    "t",
    "tau",
    "value",
]

# time columns are in simulation units with hbar = 1

_MODELS = ("xxz", "coupled-ising")
_RECIPES = (
    "gaussian",
    "tilted-gaussian",
    "two-subspace",
    "microcanonical-window",
    "canonical-product",
)
_THETAS = ("Kz", "rotated-Kz")


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries the key path."""


@dataclass
class ScenarioConfig:
    scenario_id: str
    model: str
    L: int  # chain length for xxz; sites per chain for coupled-ising
    q: int | None = None
    delta_X: float | None = None
    recipe: dict = field(default_factory=lambda: {"kind": "tilted-gaussian", "kappa": 0.1})
    theta: str = "Kz"
    tau_rule: str = "t_th/30"
    n_points: int = 200
    t_max: float | None = None
    seeds: list = field(default_factory=lambda: list(range(5)))
    t_th_seeds: int = 10
    model_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delta_X is None:
            self.delta_X = 0.74 if self.model == "xxz" else 0.5

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        known = {
            "scenario_id",
            "model",
            "L",
            "n",
            "q",
            "delta_X",
            "recipe",
            "theta",
            "tau_rule",
            "n_points",
            "t_max",
            "seeds",
            "t_th_seeds",
            "model_params",
        }
        for key in raw:
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
        model = raw.get("model")
        if model not in _MODELS:
            raise ConfigError(f"'model' must be one of {_MODELS}, got {model!r}")
        size = raw.get("L", raw.get("n"))
        if not isinstance(size, int) or size < 2:
            raise ConfigError("'L' (or 'n') must be an integer >= 2")
        q = raw.get("q")
        if model == "xxz":
            if not isinstance(q, int) or not 1 <= q <= size // 2:
                raise ConfigError(f"'q' must be an integer in [1, L/2], got {q!r}")
        recipe = raw.get("recipe", {"kind": "tilted-gaussian", "kappa": 0.1})
        if not isinstance(recipe, dict) or "kind" not in recipe:
            raise ConfigError("'recipe.kind' is required")
        if recipe["kind"] not in _RECIPES:
            raise ConfigError(f"'recipe.kind' must be one of {_RECIPES}, got {recipe['kind']!r}")
        theta = raw.get("theta", "Kz")
        if theta not in _THETAS:
            raise ConfigError(f"'theta' must be one of {_THETAS}, got {theta!r}")
        if model == "coupled-ising" and theta != "Kz":
            raise ConfigError("'theta': rotated-Kz is only defined for the xxz sector model")
        seeds = raw.get("seeds", list(range(5)))
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds) or not seeds:
            raise ConfigError("'seeds' must be a non-empty list of integers")
        n_points = raw.get("n_points", 200)
        if not isinstance(n_points, int) or n_points < 8:
            raise ConfigError("'n_points' must be an integer >= 8")
        delta_X = raw.get("delta_X")
        if delta_X is not None and not (isinstance(delta_X, (int, float)) and delta_X > 0):
            raise ConfigError("'delta_X' must be a positive number")
        return cls(
            scenario_id=str(raw.get("scenario_id", f"{model}-{size}")),
            model=model,
            L=size,
            q=q,
            delta_X=delta_X,
            recipe=dict(recipe),
            theta=theta,
            tau_rule=str(raw.get("tau_rule", "t_th/30")),
            n_points=n_points,
            t_max=raw.get("t_max"),
            seeds=list(seeds),
            t_th_seeds=int(raw.get("t_th_seeds", 10)),
            model_params=dict(raw.get("model_params", {})),
        )

    @classmethod
    def from_yaml(cls, path) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error in {path}: {exc}") from exc
        return cls.from_dict(raw)

    def canonical(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "scenario_id", "model", "L", "q", "delta_X", "recipe", "theta",
            "tau_rule", "n_points", "t_max", "seeds", "t_th_seeds", "model_params",
        )}
        return out

    @property
    def kappa(self) -> float | None:
        k = self.recipe.get("kappa")
        return float(k) if k is not None else None


@dataclass
class ScenarioContext:
    """Diagonalized model plus coarse observable, ready for diagnostics."""

    config: ScenarioConfig
    obs: object
    spec: Spectrum
    H: HermitianOperator
    theta: TimeReversal
    basis: object = None
    sub_spec: Spectrum | None = None  # single-chain spectrum (coupled model)

    @property
    def dim(self) -> int:
        return self.spec.dim


def build_context(config: ScenarioConfig) -> ScenarioContext:
    if config.model == "xxz":
        basis = build_basis(config.L)
        H = build_xxz(basis)
        lam, norm = build_density_wave(basis, config.q)
        obs = coarse_grain(lam, config.delta_X, norm, basis_tag=H.basis_tag)
        spec = diagonalize(H)
        theta = TimeReversal(config.theta, basis=basis if config.theta == "rotated-Kz" else None)
        return ScenarioContext(config=config, obs=obs, spec=spec, H=H, theta=theta, basis=basis)

    n = config.L
    params = {k: config.model_params.get(k, v) for k, v in
              (("h_x", 1.0), ("h_z", 0.5), ("g_z", 1.0))}
    lambda_c = config.model_params.get("lambda_c", 0.5)
    HA = build_tilted_ising(n, **params)
    eA, UA = np.linalg.eigh(HA)
    sub_spec = Spectrum(energies=eA, vectors=UA, basis_tag=f"tilted-ising-n{n}")
    lam, norm = build_energy_difference(eA, eA)
    obs = coarse_grain(lam, config.delta_X, norm, basis_tag=f"coupled-ising-n{n}-prodbasis")
    # full Hamiltonian in the product eigenbasis of the two chains, where
    # the energy-difference projectors are diagonal masks
    szr = UA.T @ _site_op(_SZ, n, n) @ UA
    Hfull = np.diag((eA[None, :] + eA[:, None]).ravel()) + lambda_c * np.kron(szr, szr)
    H = HermitianOperator(matrix=Hfull, basis_tag=obs.basis_tag, spin_convention="sigma")
    spec = diagonalize(H)
    theta = TimeReversal("Kz")
    return ScenarioContext(config=config, obs=obs, spec=spec, H=H, theta=theta, sub_spec=sub_spec)


def prepare_state(ctx: ScenarioContext, seed: int) -> PureState:
    recipe = ctx.config.recipe
    kind = recipe["kind"]
    if kind == "gaussian":
        return gaussian_random_state(ctx.dim, seed)
    if kind == "tilted-gaussian":
        kappa = float(recipe.get("kappa", 0.1))
        return tilted_state(gaussian_random_state(ctx.dim, seed), ctx.obs, kappa)
    if kind == "two-subspace":
        delta_p = float(recipe.get("delta_p", 0.2))
        return two_subspace_from_delta(ctx.obs, delta_p, seeds=(seed, seed + 104729))
    if kind == "microcanonical-window":
        return microcanonical_window_state(
            ctx.spec,
            float(recipe.get("beta", 0.0)),
            float(recipe.get("delta_E", ctx.spec.delta_E)),
            ctx.obs,
            float(recipe.get("kappa", 0.1)),
            seed,
        )
    if kind == "canonical-product":
        if ctx.sub_spec is None:
            raise ConfigError("'recipe.kind' canonical-product needs the coupled-ising model")
        psi = canonical_product_state(
            ctx.sub_spec,
            ctx.sub_spec,
            float(recipe.get("beta_A", 0.1)),
            float(recipe.get("beta_B", -0.1)),
            seeds=(seed, seed + 104729),
        )
        # constructed in the chain eigenbases = the product working basis
        return psi
    raise ConfigError(f"'recipe.kind' unknown: {kind}")


def thermalization_window(
    ctx: ScenarioContext, threshold: float = 0.01
) -> tuple[float, float, float]:
    """(t_th, tau, t_f) with tau = t_th/30 and t_f = 3 t_th.

    t_th is taken from the deterministic infinite-temperature
    autocorrelation C(t) = tr{X(t) X} / tr{X^2}: the first time |C| falls
    to the threshold.  At accessible dimensions the equilibrium
    fluctuations of C sit well above 1e-2, so the threshold is floored at
    twice the late-time RMS of |C|; per-seed expectation trajectories are
    too noisy here to support the plain 1%-and-hold rule.
    """
    from slowobs.spectral import _in_eigenbasis, _phase_autocorrelation

    cfg = ctx.config
    Xe = _in_eigenbasis(ctx.obs.lambda_vals, ctx.spec)
    E = ctx.spec.energies
    horizon = cfg.t_max or 100.0
    for _ in range(7):
        grid = np.linspace(0.0, horizon, 800)
        C = _phase_autocorrelation(Xe, E, grid)
        C = C / C[0]
        late_rms = float(np.sqrt(np.mean(np.square(C[len(C) // 2 :]))))
        thr = max(threshold, 2.0 * late_rms)
        idx = np.nonzero(np.abs(C) <= thr)[0]
        if idx.size and idx[0] > 0:
            t_th = float(grid[idx[0]])
            return t_th, t_th / 30.0, 3.0 * t_th
        if cfg.t_max is not None:
            break
        horizon *= 2.0
    raise RuntimeError("autocorrelation never decayed to the threshold")


def _row(cfg: ScenarioConfig, seed, t, tau, value) -> dict:
    return {
        "scenario_id": cfg.scenario_id,
        "model": cfg.model,
        "L": cfg.L,
        "q": cfg.q if cfg.q is not None else "",
        "delta_X": _fmt(cfg.delta_X),
        "recipe_kind": cfg.recipe["kind"],
        "kappa": _fmt(cfg.kappa) if cfg.kappa is not None else "",
        "seed": seed,
        "theta": cfg.theta,
        "t": _fmt(t),
        "tau": _fmt(tau) if tau is not None else "",
        "value": _fmt(value),
    }


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, rows: list, append: bool = False) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    exists = path.exists()
    mode = "a" if append and exists else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if mode == "w":
            writer.writeheader()
        writer.writerows(rows)


ALL_DIAGNOSTICS = ("expectation", "entropy", "q_tau", "delta")


def run_scenario(
    config: ScenarioConfig,
    out_dir,
    append: bool = False,
    which: tuple = ALL_DIAGNOSTICS,
) -> dict:
    """Execute one scenario and write long-form CSVs per diagnostic.

    Emits expectation.csv, entropy.csv, q_tau.csv and delta.csv (or the
    requested subset) plus a manifest; deterministic for a fixed config.
    """
    out_dir = Path(out_dir)
    ctx = build_context(config)
    t_th, tau, t_f = thermalization_window(ctx)
    grid = np.linspace(0.0, t_f, config.n_points)

    rows: dict[str, list] = {key: [] for key in which}
    for seed in config.seeds:
        psi0 = prepare_state(ctx, seed)
        series_by_key = {}
        if "expectation" in which:
            series_by_key["expectation"] = dg.rescaled_expectation_series(
                psi0, grid, ctx.obs, ctx.spec
            )
        if "entropy" in which:
            series_by_key["entropy"] = dg.entropy_series(psi0, grid, ctx.obs, ctx.spec)[1]
        if "q_tau" in which:
            series_by_key["q_tau"] = dg.q_tau_series(psi0, grid, tau, ctx.obs, ctx.spec)
        if "delta" in which:
            series_by_key["delta"] = dg.ldb_series(
                psi0, grid, tau, ctx.obs, ctx.spec, ctx.theta
            )
        for key, series in series_by_key.items():
            stau = series.metadata.get("tau")
            for t, v in zip(series.times, series.values):
                rows[key].append(_row(config, seed, t, stau, v))

    paths = {}
    for key, key_rows in rows.items():
        paths[key] = out_dir / f"{key}.csv"
        write_csv(paths[key], key_rows, append=append)

    manifest = {
        "scenario_id": config.scenario_id,
        "config_sha256": hashlib.sha256(
            json.dumps(config.canonical(), sort_keys=True).encode()
        ).hexdigest(),
        "seeds": config.seeds,
        "t_th": t_th,
        "tau": tau,
        "t_f": t_f,
        "n_points": config.n_points,
        "dim": ctx.dim,
    }
    manifest_path = out_dir / f"manifest-{config.scenario_id}.json"
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    paths["manifest"] = manifest_path
    return paths


@dataclass
class ScalingFit:
    """Least-squares power law value = C * D^(-alpha) on log-log axes."""

    points: list  # (D, value)
    alpha: float
    intercept: float
    stderr: float

    def __post_init__(self):
        if len(self.points) < 3:
            raise ValueError("scaling fit needs at least 3 points")


def fit_alpha(points) -> ScalingFit:
    """Fit ln(value) = intercept - alpha ln(D)."""
    pts = [(float(D), float(v)) for D, v in points]
    if len(pts) < 3:
        raise ValueError("scaling fit needs at least 3 points")
    if any(v <= 0 for _, v in pts):
        raise ValueError("scaling fit needs positive values")
    lx = np.log([D for D, _ in pts])
    ly = np.log([v for _, v in pts])
    res = stats.linregress(lx, ly)
    return ScalingFit(points=pts, alpha=-res.slope, intercept=res.intercept, stderr=res.stderr)


def sweep_q_tau(Ls, template: dict, diagnostics=("q_tau",), out_dir=None) -> dict:
    """Repeat a scenario over system sizes; fit each time-averaged diagnostic.

    Returns {"points": {name: [(D, value)]}, "fits": {name: ScalingFit}}.
    On a scenario failure the points gathered so far are saved (if an
    output directory was given) before the error propagates.
    """
    Ls = list(Ls)
    if Ls != sorted(Ls) or any(L % 2 for L in Ls):
        raise ConfigError("'sweep' sizes must be ascending and even")
    points: dict[str, list] = {name: [] for name in diagnostics}
    try:
        for L in Ls:
            raw = dict(template)
            raw["L"] = L
            raw["scenario_id"] = f"{template.get('scenario_id', 'sweep')}-L{L}"
            cfg = ScenarioConfig.from_dict(raw)
            ctx = build_context(cfg)
            t_th, tau, t_f = thermalization_window(ctx)
            grid = np.linspace(0.0, t_f, cfg.n_points)
            per_seed: dict[str, list] = {name: [] for name in diagnostics}
            for seed in cfg.seeds:
                psi0 = prepare_state(ctx, seed)
                if "q_tau" in diagnostics:
                    series = dg.q_tau_series(psi0, grid, tau, ctx.obs, ctx.spec)
                    per_seed["q_tau"].append(dg.time_average(series, t_th, t_f))
                if "delta" in diagnostics:
                    series = dg.ldb_series(psi0, grid, tau, ctx.obs, ctx.spec, ctx.theta)
                    vals = series.values[np.isfinite(series.values)]
                    finite = dg.DiagnosticSeries("Delta", grid[np.isfinite(series.values)], vals)
                    per_seed["delta"].append(
                        dg.time_average(finite, max(t_th, finite.times[0]), min(t_f, finite.times[-1]))
                    )
            for name in diagnostics:
                points[name].append((ctx.dim, float(np.mean(per_seed[name]))))
    except Exception:
        if out_dir is not None:
            _save_sweep_points(points, out_dir)
        raise
    fits = {}
    for name, pts in points.items():
        if len(pts) >= 3:
            fits[name] = fit_alpha(pts)
        else:
            warnings.warn(f"sweep '{name}': {len(pts)} points, need >= 3 for a fit")
    if out_dir is not None:
        _save_sweep_points(points, out_dir, fits)
    return {"points": points, "fits": fits}


def _save_sweep_points(points: dict, out_dir, fits: dict | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "points": {k: [[_fmt(D), _fmt(v)] for D, v in pts] for k, pts in points.items()},
    }
    if fits:
        payload["fits"] = {
            k: {"alpha": _fmt(f.alpha), "stderr": _fmt(f.stderr), "intercept": _fmt(f.intercept)}
            for k, f in fits.items()
        }
    with open(out_dir / "sweep.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
