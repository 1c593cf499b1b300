"""Experiment runner: parse a config, execute the job, serialize results.

``tmi run <config> [--jobs N] [--out DIR] [--grid-scale K]``

Every run writes a summary JSON, plot-ready CSV files (one metadata header
block, fixed float formatting, deterministic field order) and a manifest
listing grid/step sizes, convergence diagnostics, wall-clock time, and a
checksum for every output file.  Exit codes: 0 success, 2 configuration
error, 3 numerical-convergence failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .adjoint import StageChain, direct_schmidt_analysis, optimal_theta
from .cascade import (
    CASCADE_COMPLETENESS_TOL,
    make_fwm_cascade,
    make_twm_cascade,
    multistage_target_ce,
    run_cascade,
    stage_count_sweep,
    theta_scan,
    zeta_sweep,
    _interface_shifts,
)
from .chirp import ChirpParams, chirp_family_check, prechirp_profiles
from .config import ExperimentConfig, parse_config
from .errors import ConfigError, ToolkitError
from .greenfn import extract_green, schmidt, _pump_width
from .solver import fwm_stage, propagate_arrays, twm_stage
from .timegrid import TimeGrid, default_grid

FLOAT_FMT = "%.12e"


@dataclass
class RunManifest:
    """Provenance and diagnostics for one experiment run."""

    config_hash: str
    version: str
    job_type: str
    grid: dict
    wall_time_s: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "version": self.version,
                "job_type": self.job_type,
                "grid": self.grid,
                "wall_time_s": round(self.wall_time_s, 3),
                "diagnostics": self.diagnostics,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )


class _Writer:
    def __init__(self, directory: str, manifest: RunManifest, formats: set[str]):
        self.directory = directory
        self.manifest = manifest
        self.formats = formats
        os.makedirs(directory, exist_ok=True)

    def _register(self, name: str, data: bytes):
        path = os.path.join(self.directory, name)
        with open(path, "wb") as fh:
            fh.write(data)
        self.manifest.outputs[name] = hashlib.sha256(data).hexdigest()[:16]

    def csv(self, name: str, header_lines: list[str], columns: dict):
        if "csv" not in self.formats:
            return
        lines = [f"# {h}" for h in header_lines]
        lines.append("# units: time in walk-off windows, length in stage lengths")
        lines.append(f"# config: {self.manifest.config_hash}")
        keys = list(columns)
        lines.append(",".join(keys))
        cols = [np.asarray(columns[k]) for k in keys]
        for row in zip(*cols):
            lines.append(",".join(FLOAT_FMT % float(v) for v in row))
        self._register(name, ("\n".join(lines) + "\n").encode())

    def json(self, name: str, payload: dict):
        if "json" not in self.formats:
            return
        self._register(name, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def _round_floats(obj, digits=12):
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, digits) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(round(float(obj), digits))
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, complex):
        return [float(round(obj.real, digits)), float(round(obj.imag, digits))]
    return obj


def _grid_from_config(cfg: ExperimentConfig, grid_scale: int) -> TimeGrid:
    return default_grid(cfg["grid", "n_samples"] * grid_scale, cfg["grid", "span"])


def _ctol(cfg) -> float | None:
    tol = cfg["job", "completeness_tol"]
    return None if tol is not None and tol <= 0 else tol


def _mode_columns(grid, modes, max_modes=4):
    cols = {"t": grid.times}
    for j, m in enumerate(modes[:max_modes]):
        cols[f"re_{j + 1}"] = m.samples.real
        cols[f"im_{j + 1}"] = m.samples.imag
        cols[f"abs_{j + 1}"] = np.abs(m.samples)
    return cols


def _write_mode_csvs(writer, schmidt_data, label):
    ports = (
        ("r_in", schmidt_data.modes_r_in),
        ("r_out", schmidt_data.modes_r_out),
        ("s_in", schmidt_data.modes_s_in),
        ("s_out", schmidt_data.modes_s_out),
    )
    for port, modes in ports:
        if not modes:
            continue
        writer.csv(
            f"modes_{port}.csv",
            [f"analogue: {label} Schmidt-mode profiles, port {port}"],
            _mode_columns(modes[0].grid, modes),
        )


def _build_cascade(cfg: ExperimentConfig, grid: TimeGrid):
    mixing = cfg["stage", "mixing"]
    n_stages = cfg["cascade", "n_stages"]
    target = cfg["stage", "target_ce"]
    if target is None and cfg["stage", "gamma"] is None:
        target = multistage_target_ce(n_stages)
    if mixing == "twm":
        return make_twm_cascade(
            grid,
            zeta=cfg["stage", "zeta"],
            gamma=cfg["stage", "gamma"],
            target_ce=target,
            n_stages=n_stages,
            configuration=cfg["cascade", "configuration"],
            theta=cfg["cascade", "theta"],
        )
    if n_stages != 2 or cfg["cascade", "configuration"] != "rc":
        raise ConfigError("FWM cascades support exactly two RC stages")
    return make_fwm_cascade(
        grid,
        tau_p=cfg["stage", "tau_p"],
        tau_q=cfg["stage", "tau_q"],
        gamma=cfg["stage", "gamma"],
        target_ce=target if target is not None else 0.5,
        epsilons=(cfg["stage", "epsilon_p"], cfg["stage", "epsilon_q"]),
        prechirp=cfg["stage", "prechirp"],
        theta=cfg["cascade", "theta"],
        matching_correction=cfg["stage", "matching_correction"],
    )


def _build_stage(cfg: ExperimentConfig, grid: TimeGrid, gamma: float):
    if cfg["stage", "mixing"] == "twm":
        return twm_stage(
            grid, cfg["stage", "zeta"], gamma, pump_partner=cfg["stage", "pump_partner"]
        )
    return fwm_stage(grid, cfg["stage", "tau_p"], cfg["stage", "tau_q"], gamma)


def _seed_params(stage):
    if stage.pump_partner == "s":
        width = _pump_width(stage.pump_p)
    else:
        width = 0.25 * stage.length
    center = 0.25 * stage.dispersion_sign * stage.length
    return width, center


def _step_doubling_delta(stage, seed_width, seed_center) -> float:
    from .timegrid import make_gaussian

    probe = make_gaussian(stage.grid, seed_center, seed_width)
    zeros = np.zeros_like(probe.samples)
    out1 = propagate_arrays(stage, zeros, probe.samples, n_substeps=1)
    out2 = propagate_arrays(stage, zeros, probe.samples, n_substeps=2)
    peak = max(np.max(np.abs(out1.r)), np.max(np.abs(out1.s)))
    return float(
        max(np.max(np.abs(out1.r - out2.r)), np.max(np.abs(out1.s - out2.s))) / peak
    )


def _summarize_report(rep) -> dict:
    sd = rep.schmidt
    summary = {
        "selectivity": sd.selectivity,
        "rho_sq": list(sd.rho_sq[:8]),
        "tau_sq": list(sd.tau_sq[:8]),
        "gamma_calibrated": rep.calibration["gamma"][0],
        "theta0": rep.theta0,
    }
    if rep.overlaps:
        summary["mu11"] = complex(rep.overlaps[0].mu[0, 0])
        summary["eta11"] = complex(rep.overlaps[0].eta[0, 0])
    else:
        summary["mu11"] = summary["eta11"] = None
    return summary


def _job_single_stage(cfg, grid, writer):
    gamma = cfg["stage", "gamma"]
    if gamma is None:
        from .cascade import calibrate_gamma

        target = cfg["stage", "target_ce"]
        target = 0.5 if target is None else target
        gamma = calibrate_gamma(_build_stage(cfg, grid, 1.0), target)
    stage = _build_stage(cfg, grid, gamma)
    op = extract_green(stage, basis_size=cfg["job", "basis_size"], completeness_tol=None)
    sd = schmidt(op, strict_pairing=False)
    width, center = _seed_params(stage)
    direct = direct_schmidt_analysis(
        StageChain((stage,)), n_modes=4, seed_width=width, seed_center=center,
        frobenius_basis=40,
    )
    writer.json(
        "summary.json",
        _round_floats(
            {
                "selectivity": sd.selectivity,
                "selectivity_direct": direct.selectivity,
                "rho_sq": list(sd.rho_sq[:8]),
                "rho_sq_direct": list(direct.rho_sq),
                "tau_sq": list(sd.tau_sq[:8]),
                "gamma_calibrated": gamma,
                "mu11": None,
                "eta11": None,
                "theta0": 0.0,
            }
        ),
    )
    _write_mode_csvs(writer, sd, "single-stage")
    return {
        "unitarity_residual": op.unitarity_residual(),
        "basis_residual": op.worst_residual,
        "step_doubling_delta": _step_doubling_delta(stage, width, center),
    }


def _job_green_extract(cfg, grid, writer):
    gamma = cfg["stage", "gamma"]
    gamma = 1.0 if gamma is None else gamma
    stage = _build_stage(cfg, grid, gamma)
    op = extract_green(stage, basis_size=cfg["job", "basis_size"], completeness_tol=None)
    k = op.n_r
    idx = np.arange(k)
    for name, block in (
        ("G_rr", op.G_rr), ("G_rs", op.G_rs), ("G_sr", op.G_sr), ("G_ss", op.G_ss)
    ):
        rows, cols = np.meshgrid(idx, idx, indexing="ij")
        writer.csv(
            f"{name.lower()}.csv",
            [f"analogue: stage Green-operator block {name} (basis representation)"],
            {
                "row": rows.ravel(),
                "col": cols.ravel(),
                "re": block.real.ravel(),
                "im": block.imag.ravel(),
            },
        )
    writer.json(
        "summary.json",
        _round_floats(
            {
                "singular_values": list(op.singular_values()),
                "unitarity_residual": op.unitarity_residual(),
                "worst_column_residual": op.worst_residual,
                "gamma": gamma,
            }
        ),
    )
    return {
        "unitarity_residual": op.unitarity_residual(),
        "basis_residual": op.worst_residual,
    }


def _job_cascade(cfg, grid, writer):
    spec, gamma = _build_cascade(cfg, grid)
    rep = run_cascade(
        spec, basis_size=cfg["job", "basis_size"], completeness_tol=_ctol(cfg)
    )
    stage0 = spec.stages[0]
    width, center = _seed_params(stage0)
    chain = StageChain(spec.stages, theta=spec.theta, interface_shifts=_interface_shifts(spec))
    direct = direct_schmidt_analysis(
        chain, n_modes=4, seed_width=width, seed_center=center, frobenius_basis=40
    )
    summary = _summarize_report(rep)
    summary["gamma_calibrated"] = gamma
    summary["selectivity_direct"] = direct.selectivity
    summary["rho_sq_direct"] = list(direct.rho_sq)
    writer.json("summary.json", _round_floats(summary))
    _write_mode_csvs(writer, rep.schmidt, "composite")
    if rep.energy_trace:
        z, frac = zip(*rep.energy_trace)
        writer.csv(
            "trace.csv",
            ["analogue: converted fraction of the target mode vs propagation distance"],
            {"z": z, "converted_fraction": frac},
        )
    return {
        "unitarity_residual": rep.composite.unitarity_residual(),
        "step_doubling_delta": _step_doubling_delta(stage0, width, center),
    }


def _job_zeta_sweep(cfg, grid, writer, jobs=1):
    spec, _ = make_twm_cascade(
        grid,
        zeta=cfg["stage", "zeta"],
        gamma=1.0,
        n_stages=cfg["cascade", "n_stages"],
        configuration=cfg["cascade", "configuration"],
        theta=cfg["cascade", "theta"],
    )
    zetas = cfg.zeta_values()
    if jobs > 1:
        points = _parallel_zeta(spec, zetas, cfg["job", "basis_size"], jobs)
    else:
        points = zeta_sweep(
            spec, zetas, basis_size=cfg["job", "basis_size"], completeness_tol=_ctol(cfg)
        )
    writer.csv(
        "zeta_sweep.csv",
        ["analogue: selectivity vs pump-width ratio"],
        {
            "zeta": [p.zeta for p in points],
            "selectivity": [p.selectivity for p in points],
            "rho1_sq": [p.rho1_sq for p in points],
            "rho2_sq": [p.rho2_sq for p in points],
            "gamma": [p.gamma for p in points],
        },
    )
    writer.json(
        "summary.json",
        _round_floats(
            {
                "selectivity": points[-1].selectivity,
                "rho_sq": [points[-1].rho1_sq, points[-1].rho2_sq],
                "tau_sq": [],
                "mu11": None,
                "eta11": None,
                "gamma_calibrated": points[-1].gamma,
                "theta0": 0.0,
                "monotone": bool(
                    np.all(np.diff([p.selectivity for p in points]) > -1e-12)
                ),
            }
        ),
    )
    return {}


def _zeta_point(args):
    zeta, configuration, theta, n_stages, basis_size = args
    spec, _ = make_twm_cascade(
        default_grid(4096, 2.0) if zeta >= 50 else default_grid(8192, 4.0),
        zeta=zeta, gamma=1.0, n_stages=n_stages, configuration=configuration,
        theta=theta,
    )
    points = zeta_sweep(spec, [zeta], basis_size=basis_size)
    return points[0]


def _parallel_zeta(spec, zetas, basis_size, jobs):
    args = [
        (z, spec.configuration, spec.theta, spec.n_stages, basis_size) for z in zetas
    ]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_zeta_point, args))


def _job_n_sweep(cfg, grid, writer):
    spec, _ = make_twm_cascade(
        grid, zeta=cfg["stage", "zeta"], gamma=1.0, n_stages=2,
        configuration="rc", theta=cfg["cascade", "theta"],
    )
    points = stage_count_sweep(
        spec,
        cfg.n_values(),
        basis_size=cfg["job", "basis_size"],
        polish=cfg["cascade", "polish"],
        completeness_tol=_ctol(cfg),
    )
    writer.csv(
        "n_sweep.csv",
        ["analogue: selectivity vs stage count"],
        {
            "n_stages": [p.n_stages for p in points],
            "selectivity_rc": [p.selectivity_rc for p in points],
            "selectivity_dc": [p.selectivity_dc for p in points],
            "target_ce": [p.target_ce for p in points],
            "achieved_ce": [p.achieved_ce for p in points],
            "gamma_calibrated": [p.gamma_calibrated for p in points],
            "gamma_polished_rc": [p.gamma_polished_rc for p in points],
        },
    )
    for p in points:
        z, frac = zip(*p.trace)
        writer.csv(
            f"trace_n{p.n_stages}.csv",
            [f"analogue: converted fraction vs distance, {p.n_stages} stages"],
            {"z": z, "converted_fraction": frac},
        )
    last = points[-1]
    writer.json(
        "summary.json",
        _round_floats(
            {
                "selectivity": last.selectivity_rc,
                "rho_sq": [],
                "tau_sq": [],
                "mu11": None,
                "eta11": None,
                "gamma_calibrated": last.gamma_calibrated,
                "theta0": 0.0,
            }
        ),
    )
    return {}


def _job_theta_scan(cfg, grid, writer):
    spec, gamma = _build_cascade(cfg, grid)
    thetas = np.linspace(
        cfg["job", "theta_start"], cfg["job", "theta_stop"], cfg["job", "theta_steps"]
    )
    rho1_sq, theta0, resid = theta_scan(
        spec, thetas, basis_size=cfg["job", "basis_size"], completeness_tol=_ctol(cfg)
    )
    writer.csv(
        "theta_scan.csv",
        ["analogue: target-mode conversion vs interface phase"],
        {"theta": thetas, "rho1_sq": rho1_sq},
    )
    writer.json(
        "summary.json",
        _round_floats(
            {
                "selectivity": None,
                "rho_sq": [float(np.max(rho1_sq))],
                "tau_sq": [],
                "mu11": None,
                "eta11": None,
                "gamma_calibrated": gamma,
                "theta0": theta0,
                "fit_residual": resid,
            }
        ),
    )
    return {"theta_fit_residual": resid}


def _job_chirp_check(cfg, grid, writer):
    results = chirp_family_check(
        cfg.chirp_pairs(),
        grid=grid,
        tau_p=cfg["stage", "tau_p"],
        tau_q=cfg["stage", "tau_q"],
        gamma=cfg["stage", "gamma"],
        target_ce=(lambda t: 0.5 if t is None else t)(cfg["stage", "target_ce"]),
    )
    writer.csv(
        "chirp_family.csv",
        ["analogue: selectivity and port phase flatness per chirp-parameter pair"],
        {
            "epsilon_p": [r.epsilon_p for r in results],
            "epsilon_q": [r.epsilon_q for r in results],
            "selectivity": [r.selectivity for r in results],
            "flat_r_in": [r.flatness["r_in"] for r in results],
            "flat_r_out": [r.flatness["r_out"] for r in results],
            "flat_s_in": [r.flatness["s_in"] for r in results],
            "flat_s_out": [r.flatness["s_out"] for r in results],
        },
    )
    # export the stage-1 pre-chirp profiles for the first pair
    eps_p, eps_q = cfg.chirp_pairs()[0]
    stage = fwm_stage(grid, cfg["stage", "tau_p"], cfg["stage", "tau_q"], 1.0)
    prof = prechirp_profiles(
        ChirpParams.for_stage(stage, eps_p, eps_q, 1), stage.pump_p, stage.pump_q
    )
    writer.csv(
        "prechirp_profiles.csv",
        ["analogue: pump pre-chirp phase profiles (stage 1)"],
        {"t": grid.times, "alpha_p": prof.alpha_p, "alpha_q": prof.alpha_q},
    )
    writer.json(
        "summary.json",
        _round_floats(
            {
                "selectivity": results[0].selectivity,
                "rho_sq": list(results[0].rho_sq),
                "tau_sq": [],
                "mu11": None,
                "eta11": None,
                "gamma_calibrated": None,
                "theta0": None,
                "selectivity_spread": float(
                    max(r.selectivity for r in results) - min(r.selectivity for r in results)
                ),
            }
        ),
    )
    return {}


_JOBS = {
    "single-stage": _job_single_stage,
    "green-extract": _job_green_extract,
    "cascade": _job_cascade,
    "zeta-sweep": _job_zeta_sweep,
    "n-sweep": _job_n_sweep,
    "theta-scan": _job_theta_scan,
    "chirp-check": _job_chirp_check,
}


def run(
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    jobs: int = 1,
    grid_scale: int = 1,
) -> RunManifest:
    """Execute a parsed configuration and write all outputs."""
    directory = out_dir or os.environ.get("TMI_OUT_DIR") or cfg["output", "directory"]
    formats = {f.strip() for f in cfg["output", "formats"].split(",") if f.strip()}
    grid = _grid_from_config(cfg, grid_scale)
    manifest = RunManifest(
        config_hash=cfg.config_hash,
        version=__version__,
        job_type=cfg.job_type,
        grid={
            "span": grid.span,
            "n_samples": grid.n_samples,
            "dt": grid.dt,
            "dz": 2.0 * grid.dt,
            "steps_per_unit_length": int(round(0.5 / grid.dt)),
        },
    )
    writer = _Writer(directory, manifest, formats)
    start = time.time()
    job = _JOBS[cfg.job_type]
    if cfg.job_type == "zeta-sweep":
        diagnostics = job(cfg, grid, writer, jobs=jobs)
    else:
        diagnostics = job(cfg, grid, writer)
    manifest.diagnostics = _round_floats(diagnostics)
    manifest.wall_time_s = time.time() - start
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        fh.write(manifest.to_json() + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tmi", description="Temporal-mode interferometry experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a declarative experiment config")
    runp.add_argument("config", help="path to the experiment configuration file")
    runp.add_argument("--jobs", type=int, default=1, help="worker pool size for sweeps")
    runp.add_argument("--out", default=None, help="output directory override")
    runp.add_argument(
        "--grid-scale", type=int, default=1,
        help="multiply n_samples (and the step count) for convergence studies",
    )
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 4
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, out_dir=args.out, jobs=args.jobs, grid_scale=args.grid_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ToolkitError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    print(f"{cfg.job_type}: wrote {len(manifest.outputs)} files "
          f"in {manifest.wall_time_s:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
