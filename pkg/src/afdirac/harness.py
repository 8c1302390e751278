"""Experiment harness: configs in TOML, deterministic runs, JSON/CSV reports."""

from __future__ import annotations

import json
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .evolution import (
    dirac_initial_velocity,
    evolve_dirac,
    evolve_squared,
)
from .metric import MetricFamily, MetricParams, Taper
from .norms import (
    AdmissibleTriple,
    local_smoothing_functional,
    norm_equivalence_check,
    sobolev_norm,
    strichartz_functional,
)
from .operators import (
    Grid,
    SpinorField,
    build_gammas,
    build_geometry_field,
    default_taper,
    squaring_residual,
)

EXPERIMENTS = (
    "IdentityCheck",
    "Convergence",
    "Smoothing",
    "Strichartz",
    "NormEquivalence",
    "WaveCrossCheck",
)

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    experiment: str
    metric: MetricParams
    grid_L: float
    grid_N: int
    mass: float = 0.0
    T: float = 1.0
    dt: float | None = None
    snapshot_stride: int = 1
    center: tuple = (0.0, 0.0, 0.0)
    width: float = 1.0
    carrier: tuple = (2.0, 0.0, 0.0)
    polarization: int = 0
    triples: list[AdmissibleTriple] = field(default_factory=list)
    eps: float = 0.05
    seed: int = 0
    carriers: list[float] = field(default_factory=lambda: [2.0, 4.0, 8.0])
    n_values: list[int] = field(default_factory=lambda: [32, 48, 64])
    n_draws: int = 20
    residual_threshold: float | None = None
    ratio_band: float = 2.0
    min_order: float = 4.0
    crosscheck_tol: float = 1e-4
    tail_tol: float = 1e-8
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            exp = d["experiment"]
            if exp not in EXPERIMENTS:
                raise ConfigError(f"unknown experiment {exp!r}")
            md = d.get("metric", {})
            metric = MetricParams(
                family=MetricFamily(md.get("family", "Flat")),
                amplitude=float(md.get("amplitude", 0.1)),
                decay_sigma=float(md.get("decay_sigma", 0.5)),
                cutoff_radius=float(md.get("cutoff_radius", 4.0)),
                slow_profile=bool(md.get("slow_profile", False)),
            )
            gd = d.get("grid", {})
            N = int(gd.get("N", 32))
            if N < 4 or N % 2:
                raise ConfigError("grid.N must be even and at least 4")
            td = d.get("time", {})
            dd = d.get("data", {})
            triples = [
                AdmissibleTriple(
                    s=float(t["s"]), q=float(t["q"]), r=float(t["r"]),
                    kind=t.get("kind", "Wave"),
                )
                for t in d.get("triples", [])
            ]
            return cls(
                experiment=exp,
                metric=metric,
                grid_L=float(gd.get("L", 8.0)),
                grid_N=N,
                mass=float(d.get("mass", 0.0)),
                T=float(td.get("T", 1.0)),
                dt=float(td["dt"]) if "dt" in td else None,
                snapshot_stride=int(td.get("snapshot_stride", 1)),
                center=tuple(dd.get("center", (0.0, 0.0, 0.0))),
                width=float(dd.get("width", 1.0)),
                carrier=tuple(dd.get("carrier", (2.0, 0.0, 0.0))),
                polarization=int(dd.get("polarization", 0)),
                triples=triples,
                eps=float(d.get("eps", 0.05)),
                seed=int(d.get("seed", 0)),
                carriers=[float(c) for c in d.get("carriers", [2.0, 4.0, 8.0])],
                n_values=[int(n) for n in d.get("n_values", [32, 48, 64])],
                n_draws=int(d.get("n_draws", 20)),
                residual_threshold=(
                    float(d["residual_threshold"]) if "residual_threshold" in d else None
                ),
                ratio_band=float(d.get("ratio_band", 2.0)),
                min_order=float(d.get("min_order", 4.0)),
                crosscheck_tol=float(d.get("crosscheck_tol", 1e-4)),
                tail_tol=float(d.get("tail_tol", 1e-8)),
                raw=d,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> Grid:
        return Grid(self.grid_L, self.grid_N)


# ---------------------------------------------------------------------------
# Data builders.
# ---------------------------------------------------------------------------


def make_wavepacket(
    grid: Grid,
    center=(0.0, 0.0, 0.0),
    width: float = 1.0,
    carrier=(2.0, 0.0, 0.0),
    polarization: int = 0,
    window: Taper | None = None,
) -> SpinorField:
    """Modulated Gaussian e^{ik.x} e^{-|x-x0|^2/(2w^2)} on a canonical spinor."""
    x = grid.points()
    d = x - np.asarray(center, dtype=float)
    envelope = np.exp(-np.sum(d * d, axis=-1) / (2.0 * width**2))
    phase = np.exp(1j * np.einsum("...i,i->...", x, np.asarray(carrier, dtype=float)))
    values = np.zeros((4, grid.N, grid.N, grid.N), dtype=complex)
    values[polarization] = envelope * phase
    if window is not None:
        values *= window.window(x)
    return SpinorField(grid, values)


def make_random_tapered_field(
    grid: Grid,
    rng: np.random.Generator,
    spectral_width: float = 2.0,
    window: Taper | None = None,
) -> SpinorField:
    """Seeded random field with a Gaussian spectral envelope, spatially tapered."""
    k = grid.freqs
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    envelope = np.exp(-k2 / (2.0 * spectral_width**2))
    shape = (4, grid.N, grid.N, grid.N)
    hat = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * envelope
    values = np.fft.ifftn(hat, axes=(1, 2, 3))
    if window is None:
        window = Taper(0.5 * grid.L, grid.L - 2.0 * grid.spacing)
    values *= window.window(grid.points())
    values /= np.sqrt(np.sum(np.abs(values) ** 2) * grid.spacing**3)
    return SpinorField(grid, values)


# ---------------------------------------------------------------------------
# Experiments.
# ---------------------------------------------------------------------------


def _check(name, value, threshold, passed, **extra):
    entry = {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}
    entry.update(extra)
    return entry


def _spread_ok(values, band):
    values = [v for v in values if np.isfinite(v)]
    if len(values) < 2 or min(values) <= 0.0:
        return False
    return max(values) / min(values) <= band


def _run_identity(cfg: ExperimentConfig):
    grid = cfg.grid()
    geo = build_geometry_field(cfg.metric, grid)
    u0 = make_wavepacket(grid, cfg.center, cfg.width, cfg.carrier, cfg.polarization)
    res1, res2 = squaring_residual(u0, geo, cfg.mass, tail_tol=cfg.tail_tol)
    thr = cfg.residual_threshold
    if thr is None:
        thr = 1e-10 if cfg.metric.family is MetricFamily.FLAT else 1e-2
    return [
        _check("squaring_residual_covariant", res1, thr, res1 <= thr),
        _check("squaring_residual_omega_split", res2, thr, res2 <= thr),
        _check("residual_split_agreement", abs(res1 - res2), 1e-9, abs(res1 - res2) <= 1e-9),
    ]


def _run_convergence(cfg: ExperimentConfig):
    residuals = []
    for N in cfg.n_values:
        grid = Grid(cfg.grid_L, N)
        geo = build_geometry_field(cfg.metric, grid)
        u0 = make_wavepacket(grid, cfg.center, cfg.width, cfg.carrier, cfg.polarization)
        _, res2 = squaring_residual(u0, geo, cfg.mass, tail_tol=1.0)
        residuals.append(res2)
    logs_n = np.log(np.asarray(cfg.n_values, dtype=float))
    logs_r = np.log(np.asarray(residuals))
    order = -np.polyfit(logs_n, logs_r, 1)[0]
    checks = [
        _check(
            "residual_convergence_order", float(order), cfg.min_order,
            order >= cfg.min_order,
            residuals={str(n): r for n, r in zip(cfg.n_values, residuals)},
        )
    ]
    return checks


def _data_window(cfg: ExperimentConfig, geo, grid):
    return None if geo.is_flat else default_taper(grid, cfg.metric)


def _series_rows(name: str, key, rep) -> list:
    times = rep.meta.get("times", []) if rep.meta else []
    samples = rep.meta.get("samples", []) if rep.meta else []
    return [
        {"check": name, "key": str(key), "t": t, "value": v}
        for t, v in zip(times, samples)
    ]


def _sweep_trajectories(cfg: ExperimentConfig, geo, grid):
    """One Dirac trajectory per carrier magnitude (carrier along x)."""
    window = _data_window(cfg, geo, grid)
    out = {}
    for c in cfg.carriers:
        u0 = make_wavepacket(
            grid, cfg.center, cfg.width, (c, 0.0, 0.0), cfg.polarization, window=window
        )
        out[c] = evolve_dirac(
            u0, geo, cfg.mass, cfg.T, cfg.dt,
            snapshot_stride=cfg.snapshot_stride, store_dtype=np.complex64,
        )
    return out


def _run_smoothing(cfg: ExperimentConfig):
    grid = cfg.grid()
    geo = build_geometry_field(cfg.metric, grid)
    trajs = _sweep_trajectories(cfg, geo, grid)
    ratios, series = {}, []
    name = "local_smoothing_frequency_sweep"
    for c, traj in trajs.items():
        rep = local_smoothing_functional(traj, geo, cfg.eps)
        ratios[str(c)] = rep.ratio
        series.extend(_series_rows(name, c, rep))
    ok = _spread_ok(list(ratios.values()), cfg.ratio_band)
    return [_check(name, ratios, cfg.ratio_band, ok)], series


def _run_strichartz(cfg: ExperimentConfig):
    if not cfg.triples:
        raise ConfigError("Strichartz experiment requires at least one triple")
    grid = cfg.grid()
    geo = build_geometry_field(cfg.metric, grid)
    trajs = _sweep_trajectories(cfg, geo, grid)
    checks, series = [], []
    for triple in cfg.triples:
        ratios = {}
        name = f"strichartz_sweep_{triple.kind}_q{triple.q}_r{triple.r}"
        for c, traj in trajs.items():
            rep = strichartz_functional(traj, geo, triple, cfg.mass)
            ratios[str(c)] = rep.ratio
            series.extend(_series_rows(name, c, rep))
        ok = _spread_ok(list(ratios.values()), cfg.ratio_band)
        checks.append(_check(name, ratios, cfg.ratio_band, ok))
    return checks, series


def _run_norm_equivalence(cfg: ExperimentConfig):
    grid = cfg.grid()
    geo = build_geometry_field(cfg.metric, grid)
    rng = np.random.default_rng(cfg.seed)
    window = default_taper(grid, cfg.metric) if not geo.is_flat else None
    ratios = []
    for _ in range(cfg.n_draws):
        u = make_random_tapered_field(grid, rng, window=window)
        rep = norm_equivalence_check(u, geo, cfg.mass)
        ratios.append(rep.meta["ratio_quadratic_form"])
    lo, hi = min(ratios), max(ratios)
    ok = lo >= 0.5 and hi <= 2.0
    return [
        _check(
            "norm_equivalence_ratios", {"min": lo, "max": hi}, [0.5, 2.0], ok,
            n_draws=cfg.n_draws,
        )
    ]


def _run_wave_crosscheck(cfg: ExperimentConfig):
    grid = cfg.grid()
    geo = build_geometry_field(cfg.metric, grid)
    u0 = make_wavepacket(
        grid, cfg.center, cfg.width, cfg.carrier, cfg.polarization,
        window=_data_window(cfg, geo, grid),
    )
    dirac_traj = evolve_dirac(u0, geo, cfg.mass, cfg.T, cfg.dt, snapshot_stride=10**9)
    u1 = dirac_initial_velocity(u0, geo, cfg.mass)
    sq_traj = evolve_squared(
        u0, u1, geo, cfg.mass, cfg.T, cfg.dt, snapshot_stride=10**9, log_energy=False
    )
    diff = dirac_traj.final_state - sq_traj.final_state
    scale = sobolev_norm(u0.values, geo, 1.0, 2.0, homogeneous=False)
    err = float(np.sqrt(np.sum(np.abs(diff) ** 2) * grid.spacing**3) / scale)
    return [
        _check("dirac_vs_squared_final_state", err, cfg.crosscheck_tol,
               err <= cfg.crosscheck_tol)
    ]


_RUNNERS = {
    "IdentityCheck": _run_identity,
    "Convergence": _run_convergence,
    "Smoothing": _run_smoothing,
    "Strichartz": _run_strichartz,
    "NormEquivalence": _run_norm_equivalence,
    "WaveCrossCheck": _run_wave_crosscheck,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; deterministic given (config, seed)."""
    start = time.time()
    result = _RUNNERS[cfg.experiment](cfg)
    checks, series = result if isinstance(result, tuple) else (result, [])
    return {
        "schema": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": _jsonable(cfg.raw),
        "seed": cfg.seed,
        "checks": checks,
        "series": series,
        "passed": all(c["passed"] for c in checks),
        "wall_clock_s": time.time() - start,
        "code_version": __version__,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def emit_report(report: dict, out_dir) -> tuple[Path, Path]:
    """Write the JSON report (stable key order) and a CSV of check rows."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath = out / "report.json"
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    cpath = out / "report.csv"
    with open(cpath, "w", encoding="utf-8") as fh:
        fh.write("check,key,t,value\n")
        for row in report.get("series", []):
            fh.write(f"{row['check']},{row['key']},{row['t']},{row['value']}\n")
        # Checks without a time series still get one summary row each.
        for c in report.get("checks", []):
            value = c["value"]
            rows = value.items() if isinstance(value, dict) else [("summary", value)]
            for key, v in rows:
                fh.write(f"{c['name']},{key},,{v}\n")
    return jpath, cpath


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
