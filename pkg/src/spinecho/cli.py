"""Reproducible experiment runner: config in, CSV/JSON data products out.

Every command re-run with the same config and seed produces byte-identical
files for any worker count: sample streams are keyed by sample index, floats
are serialized with 17 significant digits, and every file gets a sidecar
recording the config hash, seed and package version.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys as _sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__, analytics
from .channels import (
    IntegrationStepError,
    axis_averaged_channel,
    depolarizing_step,
    noisy_echo_mc,
    small_theta_qfi,
    small_theta_qfi_fidelity,
)
from .echo import EnsembleSpec, echo_sweep, qfi_convergence
from .ensembles import RngStream, default_twist_strength, haar_unitary
from .mmse import build_gamma_eta, mmse_estimate, solve_mmse_observable
from .replica import DimensionGuardError, build_heff, cluster_spectrum
from .spin_core import SpinSystem, coherent_state, dicke_state, husimi_q, make_spin_system, unit_axis

__all__ = ["main", "RunConfig", "ConfigError"]


class ConfigError(ValueError):
    """Invalid or out-of-range configuration; exits with status 2."""


_NOISE_MODELS = ("isotropic_collective", "z_collective")
_ENSEMBLES = ("haar", "oat", "brownian")


@dataclass
class NoiseConfig:
    model: str = "isotropic_collective"
    gamma: float = 0.0
    t_steps: int = 8
    t_oneway: float | None = None  # None: t_steps * twist strength


@dataclass
class RunConfig:
    """All knobs for one run; defaults follow the reference figure settings."""

    n: int = 100
    seed: int = 20260809
    n_circuits: int = 100
    n_axes: int = 1000
    theta_min: float = 0.0
    theta_max: float | None = None  # None: 3 pi / S
    theta_points: int = 121
    ensemble: str = "oat"
    oat_steps: int = 8
    twist_scale: float = 1.0
    fixed_axis: list | None = field(default_factory=lambda: [0.0, 1.0, 0.0])
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    out_dir: str = "out"
    format: str = "csv"
    workers: int = 1
    # per-command extras
    x_max: float = float(np.pi)
    x_points: int = 161
    cgt_values: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0, 2.0])
    s_values: list = field(default_factory=lambda: [v / 2 for v in range(1, 21)])
    heff_k2_spins: list = field(default_factory=list)
    mmse_theta_max: float = 0.01
    mmse_n_quad: int = 32
    channel_thetas: list = field(default_factory=lambda: [0.02, 0.04, 0.08])
    channel_probes: int = 1000
    husimi_state: str = "polarized"  # polarized | coherent_x | scrambled
    husimi_n_polar: int = 64
    husimi_n_azimuth: int = 128

    def spin_system(self) -> SpinSystem:
        return make_spin_system(self.n)

    def theta_grid(self) -> np.ndarray:
        hi = self.theta_max if self.theta_max is not None else 6 * np.pi / self.n
        if self.theta_points == 1:
            return np.array([self.theta_min])
        return np.linspace(self.theta_min, hi, self.theta_points)

    def ensemble_spec(self) -> EnsembleSpec:
        strength = default_twist_strength(self.n) * self.twist_scale
        return EnsembleSpec(self.ensemble, oat_steps=self.oat_steps, twist_strength=strength)

    def t_oneway(self) -> float:
        if self.noise.t_oneway is not None:
            return self.noise.t_oneway
        return self.noise.t_steps * default_twist_strength(self.n) * self.twist_scale


def _check(cond: bool, name: str, msg: str):
    if not cond:
        raise ConfigError(f"config field '{name}': {msg}")


def load_config(path: str | None, overrides: dict) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config field 'config': file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config field 'config': invalid JSON ({exc})")
        if not isinstance(doc, dict):
            raise ConfigError("config field 'config': top level must be a JSON object")
    doc.update({k: v for k, v in overrides.items() if v is not None})

    known = {f for f in RunConfig.__dataclass_fields__}
    for key in doc:
        if key not in known:
            raise ConfigError(f"config field '{key}': unknown field")
    noise_doc = doc.pop("noise", None)
    cfg = RunConfig(**doc)
    if noise_doc is not None:
        if not isinstance(noise_doc, dict):
            raise ConfigError("config field 'noise': must be an object")
        known_noise = {f for f in NoiseConfig.__dataclass_fields__}
        for key in noise_doc:
            if key not in known_noise:
                raise ConfigError(f"config field 'noise.{key}': unknown field")
        cfg.noise = NoiseConfig(**noise_doc)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    _check(isinstance(cfg.n, int) and cfg.n >= 1, "n", f"must be a positive integer, got {cfg.n}")
    _check(isinstance(cfg.seed, int) and cfg.seed >= 0, "seed", f"must be a non-negative integer, got {cfg.seed}")
    _check(cfg.n_circuits >= 0, "n_circuits", f"must be >= 0, got {cfg.n_circuits}")
    _check(cfg.n_axes >= 1, "n_axes", f"must be >= 1, got {cfg.n_axes}")
    _check(cfg.theta_points >= 1, "theta_points", f"must be >= 1, got {cfg.theta_points}")
    _check(cfg.theta_min >= 0, "theta_min", f"must be >= 0, got {cfg.theta_min}")
    if cfg.theta_max is not None:
        _check(cfg.theta_max > cfg.theta_min or cfg.theta_points == 1, "theta_max",
               f"must exceed theta_min {cfg.theta_min}, got {cfg.theta_max}")
    _check(cfg.ensemble in _ENSEMBLES, "ensemble", f"must be one of {_ENSEMBLES}, got {cfg.ensemble!r}")
    _check(cfg.oat_steps >= 0, "oat_steps", f"must be >= 0, got {cfg.oat_steps}")
    _check(cfg.twist_scale > 0, "twist_scale", f"must be > 0, got {cfg.twist_scale}")
    if cfg.fixed_axis is not None:
        _check(len(cfg.fixed_axis) == 3, "fixed_axis", f"must be a 3-vector or null, got {cfg.fixed_axis}")
    _check(cfg.noise.model in _NOISE_MODELS, "noise.model",
           f"must be one of {_NOISE_MODELS}, got {cfg.noise.model!r}")
    _check(cfg.noise.gamma >= 0, "noise.gamma", f"must be >= 0, got {cfg.noise.gamma}")
    _check(cfg.noise.t_steps >= 1, "noise.t_steps", f"must be >= 1, got {cfg.noise.t_steps}")
    _check(cfg.format in ("csv", "json"), "format", f"must be 'csv' or 'json', got {cfg.format!r}")
    _check(cfg.workers >= 1, "workers", f"must be >= 1, got {cfg.workers}")
    _check(cfg.x_max > 0, "x_max", f"must be > 0, got {cfg.x_max}")
    _check(cfg.x_points >= 2, "x_points", f"must be >= 2, got {cfg.x_points}")
    _check(len(cfg.cgt_values) >= 1 and min(cfg.cgt_values) >= 0, "cgt_values",
           f"must be non-empty, non-negative, got {cfg.cgt_values}")
    _check(cfg.mmse_theta_max > 0, "mmse_theta_max", f"must be > 0, got {cfg.mmse_theta_max}")
    _check(cfg.mmse_n_quad >= 8, "mmse_n_quad", f"must be >= 8, got {cfg.mmse_n_quad}")
    _check(cfg.husimi_state in ("polarized", "coherent_x", "scrambled"), "husimi_state",
           f"must be polarized|coherent_x|scrambled, got {cfg.husimi_state!r}")
    _check(cfg.husimi_n_polar >= 2 and cfg.husimi_n_azimuth >= 2, "husimi_n_polar",
           "grid needs at least 2 points per dimension")
    for s in cfg.s_values:
        _check(abs(2 * s - round(2 * s)) < 1e-12 and s >= 0.5, "s_values",
               f"entries must be positive half-integers, got {s}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if v == float("-inf"):
        v = analytics.GAIN_DB_FLOOR
    return f"{v:.17g}"


def config_hash(cfg: RunConfig) -> str:
    doc = asdict(cfg)
    # execution-only knobs do not change the data products
    doc.pop("workers", None)
    doc.pop("out_dir", None)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class OutputWriter:
    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def _sidecar(self, path: Path):
        meta = {
            "artifact_version": __version__,
            "command": self.command,
            "config_sha256": config_hash(self.cfg),
            "seed": self.cfg.seed,
        }
        side = path.with_name(path.name + ".meta.json")
        side.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
        self.written.append(side)

    def table(self, name: str, columns: list[str], rows) -> Path:
        rows = [[fmt(v) for v in row] for row in rows]
        if self.cfg.format == "json":
            path = self.out / f"{name}.json"
            doc = {"columns": columns, "rows": rows}
            path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        else:
            path = self.out / f"{name}.csv"
            lines = [",".join(columns)] + [",".join(r) for r in rows]
            path.write_text("\n".join(lines) + "\n")
        self._sidecar(path)
        self.written.append(path)
        return path

    def summary(self, name: str, doc: dict) -> Path:
        path = self.out / f"{name}.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        self._sidecar(path)
        self.written.append(path)
        return path


def _json_float(v) -> float:
    v = float(v)
    return analytics.GAIN_DB_FLOOR if v == float("-inf") else v


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_echo_sweep(cfg: RunConfig) -> list[Path]:
    sysm = cfg.spin_system()
    s = sysm.spin
    grid = cfg.theta_grid()
    axis = None if cfg.fixed_axis is None else unit_axis(cfg.fixed_axis)
    if cfg.n_circuits < 2:
        raise ConfigError(f"config field 'n_circuits': echo-sweep needs >= 2, got {cfg.n_circuits}")
    result = echo_sweep(sysm, cfg.ensemble_spec(), grid, cfg.n_circuits, RngStream(cfg.seed),
                        fixed_axis=axis, workers=cfg.workers)
    writer = OutputWriter(cfg, "echo-sweep")
    rows = []
    for k, p in enumerate(result.points):
        sem = np.sqrt(p.var_over_circuits_sz / p.n_samples) / s
        rows.append([p.theta, p.x, p.mean_sz / s, sem, p.var_over_circuits_sz,
                     result.sensitivity[k], result.gain_db[k], p.n_samples])
    writer.table("echo_sweep", ["theta", "x", "mean_sz_norm", "sem_sz_norm", "var_circ_sz",
                                "sensitivity", "gain_db", "n_samples"], rows)

    cgt = analytics.noise_shift_constant(s) * cfg.noise.gamma * cfg.t_oneway()
    arows = []
    for th in grid:
        x = s * th
        sig = analytics.noisy_signal(s, th, cgt) / s
        m2 = analytics.noisy_second_moment(s, th, cgt)
        noise = np.sqrt(max(m2 - (sig * s) ** 2, 0.0)) / s
        sens = analytics.angular_sensitivity(cfg.n, x, cgt)
        arows.append([th, x, sig, noise, sens, analytics.metrological_gain_db(sens, cfg.n)])
    writer.table("echo_sweep_analytic",
                 ["theta", "x", "mean_sz_norm", "delta_sz_norm", "sensitivity", "gain_db"], arows)

    finite = result.gain_db[np.isfinite(result.gain_db)]
    writer.summary("echo_sweep_summary", {
        "N": cfg.n,
        "seed": cfg.seed,
        "ensemble": cfg.ensemble,
        "n_circuits": cfg.n_circuits,
        "theta_bw": analytics.bandwidth(cfg.n),
        "peak_gain_db": _json_float(finite.max()) if finite.size else analytics.GAIN_DB_FLOOR,
        "c_gamma_T": _json_float(cgt),
    })
    return writer.written


def cmd_oat_converge(cfg: RunConfig) -> list[Path]:
    sysm = cfg.spin_system()
    if cfg.n_circuits < 1:
        raise ConfigError(f"config field 'n_circuits': oat-converge needs >= 1, got {cfg.n_circuits}")
    strength = default_twist_strength(cfg.n) * cfg.twist_scale
    stats = qfi_convergence(sysm, cfg.oat_steps, cfg.n_circuits, cfg.n_axes, RngStream(cfg.seed),
                            strength=strength, workers=cfg.workers)
    writer = OutputWriter(cfg, "oat-converge")
    writer.table("qfi_convergence", ["step", "mean_qfi", "std_qfi", "n_circuits", "n_axes"],
                 [[s.step, s.mean_qfi, s.std_qfi, s.n_circuits, s.n_axes] for s in stats])
    writer.summary("qfi_convergence_summary", {
        "N": cfg.n,
        "seed": cfg.seed,
        "theta_bw": analytics.bandwidth(cfg.n),
        "qfi_mean": analytics.haar_qfi_mean(cfg.n),
        "qfi_std": analytics.haar_qfi_std(cfg.n),
        "twist_strength": strength,
    })
    return writer.written


def cmd_noise_sweep(cfg: RunConfig) -> list[Path]:
    x_grid = np.linspace(0.0, cfg.x_max, cfg.x_points)
    surface = analytics.gain_surface(cfg.n, x_grid, cfg.cgt_values)
    writer = OutputWriter(cfg, "noise-sweep")
    rows = []
    for i, cgt in enumerate(surface.cgt_grid):
        for j, x in enumerate(surface.x_grid):
            rows.append([x, cgt, max(surface.gain_db[i, j], analytics.GAIN_DB_FLOOR)])
    writer.table("gain_surface", ["x", "c_gamma_T", "gain_db"], rows)
    writer.table("gain_optimal_x", ["c_gamma_T", "optimal_x"],
                 [[cgt, surface.optimal_x[i]] for i, cgt in enumerate(surface.cgt_grid)])

    # the gamma = 0 Monte Carlo is the clean echo (echo-sweep's job), so the
    # noisy side-by-side runs only when there is actual dissipation
    if cfg.n_circuits > 1 and cfg.noise.gamma > 0:
        sysm = cfg.spin_system()
        s = sysm.spin
        t_oneway = cfg.t_oneway()
        axis = None if cfg.fixed_axis is None else unit_axis(cfg.fixed_axis)
        mrows = []
        for k, th in enumerate(cfg.theta_grid()):
            stats = noisy_echo_mc(
                sysm, cfg.noise.gamma, t_oneway, cfg.noise.t_steps, float(th),
                cfg.n_circuits, RngStream(cfg.seed).offset(k * 2**40),
                scrambler="oat" if cfg.ensemble == "oat" else "brownian",
                model=cfg.noise.model, axis=axis,
                strength=default_twist_strength(cfg.n) * cfg.twist_scale,
                workers=cfg.workers,
            )
            sem = np.sqrt(stats.var_over_circuits_sz / stats.n_samples) / s
            mrows.append([stats.theta, cfg.noise.gamma, t_oneway, stats.mean_sz / s, sem,
                          stats.n_samples, cfg.noise.model])
        writer.table("noisy_echo_mc",
                     ["theta", "gamma", "T", "mean_sz_norm", "sem_sz_norm", "n_circuits", "model"],
                     mrows)

    writer.summary("noise_sweep_summary", {
        "N": cfg.n,
        "seed": cfg.seed,
        "c_gamma_T": [_json_float(v) for v in surface.cgt_grid],
        "optimal_x": [_json_float(v) for v in surface.optimal_x],
        "heisenberg_gain_db": _json_float(10 * np.log10(cfg.n)),
    })
    return writer.written


def cmd_heff(cfg: RunConfig) -> list[Path]:
    writer = OutputWriter(cfg, "heff")
    rows = []
    gaps = {}
    for s in cfg.s_values:
        sysm = make_spin_system(int(round(2 * s)))
        report = cluster_spectrum(np.linalg.eigvalsh(build_heff(sysm, k=1)))
        gaps[str(s)] = _json_float(report.gap)
        for idx, (e, d) in enumerate(zip(report.energies, report.degeneracies)):
            rows.append([s, 1, idx, e, int(d)])
    for s in cfg.heff_k2_spins:
        sysm = make_spin_system(int(round(2 * s)))
        report = cluster_spectrum(np.linalg.eigvalsh(build_heff(sysm, k=2)))
        for idx, (e, d) in enumerate(zip(report.energies, report.degeneracies)):
            rows.append([s, 2, idx, e, int(d)])
    writer.table("heff_spectrum", ["S", "k", "level_index", "energy_over_J", "degeneracy"], rows)
    writer.summary("heff_summary", {"seed": cfg.seed, "gaps_k1_over_J": gaps})
    return writer.written


def cmd_mmse(cfg: RunConfig) -> list[Path]:
    sysm = cfg.spin_system()
    polarized = dicke_state(sysm, sysm.spin)
    probe = haar_unitary(sysm.dim, RngStream(cfg.seed)) @ polarized
    rho = np.outer(probe, probe.conj())
    pair = build_gamma_eta(rho, cfg.mmse_theta_max, cfg.mmse_n_quad)
    observable = solve_mmse_observable(pair)
    residual = np.abs(pair.gamma_op @ observable + observable @ pair.gamma_op - 2 * pair.eta_op).max()
    bias = mmse_estimate(observable, rho)

    thetas = np.linspace(0.0, cfg.mmse_theta_max, 9)
    estimates, overlaps = [], []
    for th in thetas:
        encoded = depolarizing_step(rho, float(th))
        estimates.append(mmse_estimate(observable, encoded))
        overlaps.append(float(np.real(np.trace(rho @ encoded))))
    corr = float(np.corrcoef(estimates, overlaps)[0, 1])

    writer = OutputWriter(cfg, "mmse")
    writer.summary("mmse_report", {
        "N": cfg.n,
        "seed": cfg.seed,
        "theta_max": cfg.mmse_theta_max,
        "bias_at_zero": _json_float(bias),
        "residual": _json_float(residual),
        "overlap_correlation": _json_float(corr),
    })
    return writer.written


def cmd_channel_check(cfg: RunConfig) -> list[Path]:
    sysm = cfg.spin_system()
    polarized = dicke_state(sysm, sysm.spin)
    rho = np.outer(polarized, polarized.conj())
    residuals = []
    for th in cfg.channel_thetas:
        delta = axis_averaged_channel(rho, float(th), quadrature=True) - depolarizing_step(rho, float(th))
        residuals.append(float(np.abs(delta).max()))
    slope = float(np.polyfit(np.log(cfg.channel_thetas), np.log(residuals), 1)[0])

    stream = RngStream(cfg.seed)
    qfis = np.empty(cfg.channel_probes)
    for i in range(cfg.channel_probes):
        probe = haar_unitary(sysm.dim, stream.offset(1 + i)) @ polarized
        qfis[i] = small_theta_qfi(np.outer(probe, probe.conj()))
    s = sysm.spin
    predicted = 4 / 3 * s * (s + 1)

    writer = OutputWriter(cfg, "channel-check")
    writer.table("channel_residuals", ["theta", "residual_inf"],
                 [[th, r] for th, r in zip(cfg.channel_thetas, residuals)])
    writer.summary("channel_check", {
        "N": cfg.n,
        "seed": cfg.seed,
        "loglog_slope": _json_float(slope),
        "qfi_mean": _json_float(qfis.mean()),
        "qfi_se": _json_float(qfis.std(ddof=1) / np.sqrt(len(qfis))),
        "qfi_predicted": _json_float(predicted),
        "n_probes": cfg.channel_probes,
        "fidelity_route_example": _json_float(
            small_theta_qfi_fidelity(np.outer(polarized, polarized.conj()), 1e-3)
        ),
    })
    return writer.written


def cmd_husimi(cfg: RunConfig) -> list[Path]:
    sysm = cfg.spin_system()
    polarized = dicke_state(sysm, sysm.spin)
    if cfg.husimi_state == "polarized":
        psi = polarized
    elif cfg.husimi_state == "coherent_x":
        psi = coherent_state(sysm, np.array([1.0, 0.0, 0.0]))
    else:
        from .echo import sample_scrambler

        psi = sample_scrambler(sysm, cfg.ensemble_spec(), RngStream(cfg.seed)) @ polarized
    rho = np.outer(psi, psi.conj())
    polar, azimuth, q = husimi_q(rho, cfg.husimi_n_polar, cfg.husimi_n_azimuth)
    rows = []
    for i, th in enumerate(polar):
        for j, ph in enumerate(azimuth):
            rows.append([th, ph, q[i, j]])
    writer = OutputWriter(cfg, "husimi")
    writer.table("husimi", ["polar", "azimuth", "q"], rows)
    return writer.written


_COMMANDS = {
    "echo-sweep": cmd_echo_sweep,
    "oat-converge": cmd_oat_converge,
    "noise-sweep": cmd_noise_sweep,
    "heff": cmd_heff,
    "mmse": cmd_mmse,
    "channel-check": cmd_channel_check,
    "husimi": cmd_husimi,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinecho",
        description="Collective-spin echo simulator: reproducible data products per command.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="table format")
        p.add_argument("--workers", type=int, default=None, help="worker threads")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, {
            "seed": args.seed,
            "out_dir": args.out,
            "format": args.format,
            "workers": args.workers,
        })
        files = _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except (IntegrationStepError, DimensionGuardError) as exc:
        print(f"numerical guard: {exc}", file=_sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
