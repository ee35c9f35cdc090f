"""Batch experiment runner.

    fraqctl run <config.json> [--out DIR] [--seed N]
    fraqctl presets --out DIR

One JSON config per run.  Exit codes: 0 success, 2 config validation error,
3 numerical failure.  Every successful run writes manifest.json (config echo,
config hash, code version, wall time, file list, headline metrics); scenario
outputs are series.csv, result.json, and .state snapshots in the spectral
snapshot format.  CSV floats are printed with repr(), the shortest
round-trip representation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .control_linear import (
    GramianSpec,
    estimate_observability_constant,
    gramian_spectrum,
    solve_hum,
)
from .control_nonlinear import solve_global_control, solve_local_control
from .dynamics import (
    EvolutionConfig,
    NumericalFailure,
    Trajectory,
    fit_decay_rate,
    integrate_damped,
    integrate_undamped,
)
from .model import (
    Nonlinearity,
    build_bump_profile,
    check_gcc,
    parse_region,
    validate_defocusing,
)
from .spectral import SpectralField, TorusGrid, random_field, save_state, sobolev_norm, to_spectral
from .strichartz import AdmissibilityError, estimate_strichartz_constant, validate_pair

SCENARIOS = (
    "simulate",
    "stabilize",
    "control-linear",
    "control-nonlinear",
    "control-global",
    "strichartz",
    "gcc-check",
)


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


# ---------------------------------------------------------------------------
# config access and validation


def _get(cfg: dict, path: str, default=None, required: bool = False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(path, "required field is missing")
            return default
        node = node[part]
    return node


def _expect(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(field, message)


def validate_config(cfg: dict) -> None:
    scenario = _get(cfg, "scenario", required=True)
    _expect(scenario in SCENARIOS, "scenario", f"must be one of {', '.join(SCENARIOS)}")

    if scenario == "gcc-check":
        d = _get(cfg, "grid.d", 1)
        _expect(d in (1, 2), "grid.d", "must be 1 or 2")
        _region_field(cfg, "regions.omega", d, required=True)
        t0 = _get(cfg, "gcc.t0", required=True)
        _expect(isinstance(t0, (int, float)) and t0 > 0, "gcc.t0", "must be a positive number")
        for key in ("gcc.n_dirs", "gcc.n_starts"):
            val = _get(cfg, key)
            if val is not None:
                _expect(isinstance(val, int) and val >= 1, key, "must be an integer >= 1")
        return

    if scenario == "strichartz":
        p = _get(cfg, "strichartz.p", required=True)
        q = _get(cfg, "strichartz.q", required=True)
        d = _get(cfg, "grid.d", 1)
        try:
            validate_pair(float(p), float(q), d)
        except AdmissibilityError as exc:
            raise ConfigError("strichartz", "; ".join(exc.violations)) from exc
        _validate_grid(cfg)
        _expect(_get(cfg, "equation.sigma", 2.0) >= 2.0, "equation.sigma", "must be >= 2")
        trials = _get(cfg, "strichartz.trials", 4)
        _expect(isinstance(trials, int) and trials >= 1, "strichartz.trials", "must be an integer >= 1")
        return

    _validate_grid(cfg)
    sigma = _get(cfg, "equation.sigma", required=True)
    _expect(isinstance(sigma, (int, float)) and sigma >= 2.0, "equation.sigma", "must be a number >= 2")
    coeffs = _get(cfg, "equation.p_coeffs", required=True)
    _expect(isinstance(coeffs, list) and len(coeffs) >= 1, "equation.p_coeffs", "must be a nonempty list")
    gauge = _get(cfg, "equation.gauge_shift", 0.0)
    _expect(gauge >= 0.0, "equation.gauge_shift", "must be nonnegative")

    d = _get(cfg, "grid.d")
    if scenario in ("stabilize", "control-linear", "control-nonlinear", "control-global"):
        _region_field(cfg, "regions.omega", d, required=True)

    if scenario in ("stabilize", "control-global"):
        P = Nonlinearity(tuple(coeffs), gauge)
        report = validate_defocusing(P)
        _expect(
            report.ok,
            "equation.p_coeffs",
            "defocusing validation failed for a stabilization run: "
            + "; ".join(report.violations)
            + (f" (suggested gauge_shift {report.suggested_shift:g})" if report.suggested_shift else ""),
        )

    if scenario in ("simulate", "stabilize"):
        dt = _get(cfg, "numerics.dt", required=True)
        _expect(isinstance(dt, (int, float)) and dt > 0, "numerics.dt", "must be a positive number")
        tf = _get(cfg, "numerics.t_final", required=True)
        _expect(isinstance(tf, (int, float)) and tf > 0, "numerics.t_final", "must be a positive number")

    if scenario in ("control-linear", "control-nonlinear", "control-global"):
        T = _get(cfg, "control.t_horizon", required=True)
        _expect(isinstance(T, (int, float)) and T > 0, "control.t_horizon", "must be a positive number")
        s = _get(cfg, "control.s", sigma / 2.0)
        _expect(s >= sigma / 2.0, "control.s", "must be >= sigma/2")
        n_quad = _get(cfg, "numerics.n_quad", 64)
        _expect(isinstance(n_quad, int) and n_quad >= 2, "numerics.n_quad", "must be an integer >= 2")
        cg_tol = _get(cfg, "numerics.cg_tol", 1e-10)
        _expect(0 < cg_tol <= 1e-6, "numerics.cg_tol", "must lie in (0, 1e-6]")

    if scenario == "control-global":
        dt = _get(cfg, "numerics.dt", 2e-3)
        _expect(dt > 0, "numerics.dt", "must be a positive number")
        eps = _get(cfg, "control.eps_small", 5e-2)
        _expect(eps > 0, "control.eps_small", "must be positive")

    kt = _get(cfg, "numerics.krylov_tol", 1e-10)
    _expect(0 < kt <= 1e-6, "numerics.krylov_tol", "must lie in (0, 1e-6]")

    for key in ("initial", "target"):
        node = _get(cfg, key)
        if node is not None:
            kind = node.get("kind")
            _expect(kind in ("random", "plane", "zero"), f"{key}.kind", "must be random, plane, or zero")


def _validate_grid(cfg: dict) -> None:
    d = _get(cfg, "grid.d", required=True)
    _expect(d in (1, 2), "grid.d", "must be 1 or 2")
    n = _get(cfg, "grid.n", required=True)
    _expect(isinstance(n, int) and n >= 8 and n % 2 == 0, "grid.n", "must be an even integer >= 8")


def _region_field(cfg: dict, field: str, d: int, required: bool = False):
    spec = _get(cfg, field, required=required)
    if spec is None:
        return None
    try:
        return parse_region(spec, d)
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from exc


# ---------------------------------------------------------------------------
# builders


def _grid(cfg: dict) -> TorusGrid:
    return TorusGrid(_get(cfg, "grid.d"), _get(cfg, "grid.n"))


def _nonlinearity(cfg: dict) -> Nonlinearity:
    return Nonlinearity(tuple(_get(cfg, "equation.p_coeffs")), _get(cfg, "equation.gauge_shift", 0.0))


def _state(grid: TorusGrid, node: dict | None, seed: int) -> SpectralField:
    if node is None or node.get("kind") == "zero":
        return SpectralField(grid, np.zeros(grid.shape, dtype=np.complex128))
    if node["kind"] == "plane":
        k = node.get("k", 1)
        ks = (int(k), 0) if grid.d == 2 and isinstance(k, int) else k
        pts = grid.points()
        phase = np.zeros(grid.shape)
        if grid.d == 1:
            phase = float(ks if np.isscalar(ks) else ks[0]) * pts[0]
        else:
            phase = float(ks[0]) * pts[0] + float(ks[1]) * pts[1]
        return to_spectral(grid, node.get("amplitude", 1.0) * np.exp(1j * phase))
    rng = np.random.default_rng(node.get("seed", seed))
    return random_field(
        grid,
        rng,
        decay=node.get("decay", 4.0),
        s_norm=node.get("s_norm"),
        norm=node.get("norm", 1.0),
    )


def _evolution_config(cfg: dict, P: Nonlinearity, dt_key="numerics.dt", tf_key="numerics.t_final") -> EvolutionConfig:
    return EvolutionConfig(
        sigma=float(_get(cfg, "equation.sigma")),
        dt=float(_get(cfg, dt_key)),
        t_final=float(_get(cfg, tf_key)),
        p0_shift=P.p0,
        krylov_tol=float(_get(cfg, "numerics.krylov_tol", 1e-10)),
        dealias=bool(_get(cfg, "numerics.dealias", True)),
        t_out=float(_get(cfg, "numerics.t_out", 0.0)),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not np.isfinite(f) else f
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _write_series(path: Path, traj: Trajectory) -> None:
    lines = ["t,mass,energy,hs_norm,dissipation_integral"]
    for r in traj.reports:
        lines.append(",".join(repr(float(v)) for v in (r.t, r.mass, r.energy, r.hs_norm, r.dissipation_integral)))
    path.write_text("\n".join(lines) + "\n")


def _save_snapshots(out: Path, traj: Trajectory, stride: int) -> list[dict]:
    state_dir = out / "states"
    state_dir.mkdir(exist_ok=True)
    idx = list(range(0, len(traj.states), stride))
    if idx[-1] != len(traj.states) - 1:
        idx.append(len(traj.states) - 1)
    entries = []
    for i in idx:
        name = f"states/state_{i:06d}.state"
        save_state(traj.states[i], out / name)
        entries.append({"t": float(traj.times[i]), "file": name})
    return entries


def _save_control_samples(out: Path, result, stride: int = 1, prefix: str = "control") -> list[dict]:
    ctl_dir = out / f"{prefix}_samples"
    ctl_dir.mkdir(exist_ok=True)
    entries = []
    for m in range(0, len(result.t_nodes), stride):
        name = f"{prefix}_samples/{prefix}_{m:06d}.state"
        save_state(result.control_field(m), out / name)
        entries.append({"t": float(result.t_nodes[m]), "file": name})
    return entries


# ---------------------------------------------------------------------------
# scenario runners (each returns (metrics, files))


def _run_simulate(cfg: dict, out: Path):
    grid = _grid(cfg)
    P = _nonlinearity(cfg)
    seed = int(_get(cfg, "numerics.seed", 0))
    u0 = _state(grid, _get(cfg, "initial"), seed)
    ecfg = _evolution_config(cfg, P)
    traj = integrate_undamped(u0, ecfg, P)
    masses = np.array([r.mass for r in traj.reports])
    energies = np.array([r.energy for r in traj.reports])
    metrics = {
        "mass_drift_rel": float(np.max(np.abs(masses - masses[0])) / masses[0]) if masses[0] > 0 else 0.0,
        "energy_drift": float(abs(energies[-1] - energies[0])),
        "final_hs_norm": traj.reports[-1].hs_norm,
    }
    files = ["series.csv"]
    _write_series(out / "series.csv", traj)
    if _get(cfg, "output.save_states", False):
        snaps = _save_snapshots(out, traj, int(_get(cfg, "output.state_stride", 1)))
        metrics["snapshots"] = snaps
        files += [e["file"] for e in snaps] + [e["file"] + ".json" for e in snaps]
    return metrics, files


def _run_stabilize(cfg: dict, out: Path):
    grid = _grid(cfg)
    P = _nonlinearity(cfg)
    seed = int(_get(cfg, "numerics.seed", 0))
    u0 = _state(grid, _get(cfg, "initial"), seed)
    omega = parse_region(_get(cfg, "regions.omega"), grid.d)
    a = build_bump_profile(grid, omega, "damping")
    ecfg = _evolution_config(cfg, P)
    traj = integrate_damped(u0, a, ecfg, P)
    energies = np.array([r.energy for r in traj.reports])
    dissip = np.array([r.dissipation_integral for r in traj.reports])
    window = _get(cfg, "fit_window") or [ecfg.t_final / 2.0, ecfg.t_final]
    gamma, r2 = fit_decay_rate(traj.reports, tuple(window))
    metrics = {
        "gamma": gamma,
        "r_squared": r2,
        "energy_ratio_final": float(energies[-1] / energies[0]) if energies[0] > 0 else 0.0,
        "max_step_increase_rel": float(np.max(np.diff(energies)) / energies[0]) if len(energies) > 1 else 0.0,
        "energy_identity_residual": float(abs(energies[-1] - energies[0] + dissip[-1])),
    }
    _write_series(out / "series.csv", traj)
    files = ["series.csv"]
    if _get(cfg, "output.save_states", False):
        snaps = _save_snapshots(out, traj, int(_get(cfg, "output.state_stride", 1)))
        metrics["snapshots"] = snaps
        files += [e["file"] for e in snaps] + [e["file"] + ".json" for e in snaps]
    return metrics, files


def _gramian_spec(cfg: dict, grid: TorusGrid, P: Nonlinearity) -> GramianSpec:
    omega = parse_region(_get(cfg, "regions.omega"), grid.d)
    inner_spec = _get(cfg, "regions.inner")
    inner = parse_region(inner_spec, grid.d) if inner_spec else None
    phi = build_bump_profile(grid, omega, "cutoff", inner_region=inner)
    sigma = float(_get(cfg, "equation.sigma"))
    return GramianSpec(
        t_horizon=float(_get(cfg, "control.t_horizon")),
        s=float(_get(cfg, "control.s", sigma / 2.0)),
        sigma=sigma,
        phi=phi,
        n_quad=int(_get(cfg, "numerics.n_quad", 64)),
        p0_shift=P.p0,
    )


def _control_norms(result, spec: GramianSpec) -> list[dict]:
    out = []
    for m, t in enumerate(result.t_nodes):
        f = result.control_field(m)
        out.append({"t": float(t), "l2": f.l2_norm(), "hs": sobolev_norm(f, spec.s)})
    return out


def _run_control_linear(cfg: dict, out: Path):
    grid = _grid(cfg)
    P = _nonlinearity(cfg)
    seed = int(_get(cfg, "numerics.seed", 0))
    u0 = _state(grid, _get(cfg, "initial"), seed)
    v_target = _state(grid, _get(cfg, "target"), seed + 1)
    spec = _gramian_spec(cfg, grid, P)
    result = solve_hum(u0, v_target, spec, cg_tol=float(_get(cfg, "numerics.cg_tol", 1e-10)))
    obs = estimate_observability_constant(spec)
    metrics = {
        "cg_iterations": result.cg_iterations,
        "endpoint_residual_l2": result.endpoint_residual_l2,
        "endpoint_residual_hs": result.endpoint_residual_hs,
        "endpoint_residual_rel": result.endpoint_residual_rel,
        "continuous_residual_l2": result.continuous_residual_l2,
        "support_violation": result.support_violation(),
        "lambda_min": obs.value,
        "lambda_min_method": obs.method,
        "lambda_min_converged": obs.converged,
        "control_norms": _control_norms(result, spec),
    }
    if grid.total_modes <= 1024 or _get(cfg, "output.spectrum", False):
        metrics["gramian_spectrum"] = gramian_spectrum(spec).tolist()
    entries = _save_control_samples(out, result)
    metrics["control_samples"] = entries
    files = [e["file"] for e in entries] + [e["file"] + ".json" for e in entries]
    return metrics, files


def _run_control_nonlinear(cfg: dict, out: Path):
    grid = _grid(cfg)
    P = _nonlinearity(cfg)
    seed = int(_get(cfg, "numerics.seed", 0))
    u0 = _state(grid, _get(cfg, "initial"), seed)
    v_target = _state(grid, _get(cfg, "target"), seed + 1)
    spec = _gramian_spec(cfg, grid, P)
    result, history = solve_local_control(
        u0,
        v_target,
        spec,
        P,
        fp_tol=float(_get(cfg, "numerics.fp_tol", 1e-6)),
        cg_tol=float(_get(cfg, "numerics.cg_tol", 1e-10)),
        max_iter=int(_get(cfg, "numerics.max_iter", 20)),
        small_radius=float(_get(cfg, "control.smallness_radius", 5e-2)),
    )
    residuals = [h.residual for h in history]
    metrics = {
        "iterations": history[-1].iteration,
        "residual_history": residuals,
        "contraction_factors": [
            b / a for a, b in zip(residuals, residuals[1:]) if a > 0
        ],
        "final_residual": history[-1].residual,
        "endpoint_residual_l2": result.endpoint_residual_l2,
        "endpoint_residual_hs": result.endpoint_residual_hs,
        "cg_iterations_total": result.cg_iterations,
        "support_violation": result.support_violation(),
        "control_norms": _control_norms(result, spec),
    }
    entries = _save_control_samples(out, result)
    metrics["control_samples"] = entries
    files = [e["file"] for e in entries] + [e["file"] + ".json" for e in entries]
    return metrics, files


def _run_control_global(cfg: dict, out: Path):
    grid = _grid(cfg)
    P = _nonlinearity(cfg)
    seed = int(_get(cfg, "numerics.seed", 0))
    u0 = _state(grid, _get(cfg, "initial"), seed)
    v0 = _state(grid, _get(cfg, "target"), seed + 1)
    omega = parse_region(_get(cfg, "regions.omega"), grid.d)
    a = build_bump_profile(grid, omega, "damping")
    spec = _gramian_spec(cfg, grid, P)
    gcc = check_gcc(omega, t0=float(_get(cfg, "gcc.t0", 2 * np.pi + 0.1)))
    stab_cfg = EvolutionConfig(
        sigma=spec.sigma,
        dt=float(_get(cfg, "numerics.dt", 2e-3)),
        t_final=float(_get(cfg, "numerics.t_final", 200.0)),
        p0_shift=P.p0,
        krylov_tol=float(_get(cfg, "numerics.krylov_tol", 1e-10)),
        t_out=1.0,
    )
    plan, verification = solve_global_control(
        u0,
        v0,
        spec,
        P,
        a,
        eps_small=float(_get(cfg, "control.eps_small", 5e-2)),
        fp_tol=float(_get(cfg, "numerics.fp_tol", 1e-9)),
        cg_tol=float(_get(cfg, "numerics.cg_tol", 1e-11)),
        stabilize_cfg=stab_cfg,
        gcc_report=gcc,
    )
    metrics = {
        "total_time": plan.total_time,
        "phase_boundaries": [
            0.0,
            plan.phase_a.t_reached,
            plan.phase_a.t_reached + spec.t_horizon,
            plan.total_time,
        ],
        "phase_a_time": plan.phase_a.t_reached,
        "phase_b_time": plan.phase_b.t_reached,
        "junction_norms": plan.junction_norms,
        "phase_c_iterations": plan.phase_c_history[-1].iteration if plan.phase_c_history else 0,
        "verification_residual_l2": verification.residual_l2,
        "verification_residual_hs": verification.residual_hs,
        "support_violation": verification.support_violation,
        "gcc_satisfied": gcc.satisfied,
        "gcc_worst_entry": gcc.worst_entry_time,
    }
    files = []
    # decimated per-phase forcing snapshots
    for tag, rec, t0 in (
        ("phase_a", plan.phase_a.forcing, 0.0),
        ("phase_c", None, plan.phase_a.t_reached),
        ("phase_b_reversed", plan.phase_b.forcing.conj_reversed(), plan.phase_a.t_reached + spec.t_horizon),
    ):
        if tag == "phase_c":
            entries = _save_control_samples(out, plan.phase_c, stride=max(1, len(plan.phase_c.t_nodes) // 32), prefix=tag)
        else:
            (out / tag).mkdir(exist_ok=True)
            entries = []
            stride = max(1, rec.n_steps // 32)
            for i in range(0, rec.n_steps, stride):
                name = f"{tag}/{tag}_{i:06d}.state"
                save_state(SpectralField(grid, rec.spectral(i)), out / name)
                entries.append({"t": float(t0 + rec.t_mid[i]), "file": name})
        metrics[f"{tag}_samples"] = entries
        files += [e["file"] for e in entries] + [e["file"] + ".json" for e in entries]
    return metrics, files


def _run_strichartz(cfg: dict, out: Path):
    pair = validate_pair(
        float(_get(cfg, "strichartz.p")),
        float(_get(cfg, "strichartz.q")),
        int(_get(cfg, "grid.d", 1)),
    )
    report = estimate_strichartz_constant(
        pair,
        sigma=float(_get(cfg, "equation.sigma", 2.0)),
        n=int(_get(cfg, "grid.n")),
        trials=int(_get(cfg, "strichartz.trials", 4)),
        seed=int(_get(cfg, "numerics.seed", 0)),
        t_horizon=float(_get(cfg, "strichartz.t_horizon", 1.0)),
    )
    return report.to_dict(), []


def _run_gcc(cfg: dict, out: Path):
    d = int(_get(cfg, "grid.d", 1))
    omega = parse_region(_get(cfg, "regions.omega"), d)
    rep = check_gcc(
        omega,
        t0=float(_get(cfg, "gcc.t0")),
        n_dirs=_get(cfg, "gcc.n_dirs"),
        n_starts=_get(cfg, "gcc.n_starts"),
    )
    worst = rep.worst_entry_time
    return {
        "satisfied": rep.satisfied,
        "t0": rep.t0,
        "worst_entry_time": None if not np.isfinite(worst) else worst,
        "entered_all": bool(np.isfinite(worst)),
        "witness_start": list(rep.witness[0]),
        "witness_direction": list(rep.witness[1]),
    }, []


_RUNNERS = {
    "simulate": _run_simulate,
    "stabilize": _run_stabilize,
    "control-linear": _run_control_linear,
    "control-nonlinear": _run_control_nonlinear,
    "control-global": _run_control_global,
    "strichartz": _run_strichartz,
    "gcc-check": _run_gcc,
}


def run_config(cfg: dict, out_dir: str | Path) -> dict:
    """Validate, dispatch, and write result.json + manifest.json.

    Returns the manifest dict; raises ConfigError or NumericalFailure."""
    validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = {
        "config": cfg,
        "config_hash": hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        "code_version": __version__,
        "scenario": cfg["scenario"],
    }
    started = time.perf_counter()
    try:
        metrics, files = _RUNNERS[cfg["scenario"]](cfg, out)
    except NumericalFailure as exc:
        # manifest is always written once validation passed
        manifest = {**base, "status": "failed", "error": str(exc),
                    "wall_time_s": time.perf_counter() - started, "files": [], "metrics": {}}
        _write_json(out / "manifest.json", manifest)
        raise
    wall = time.perf_counter() - started
    _write_json(out / "result.json", metrics)
    files = ["result.json"] + files
    manifest = {**base, "status": "ok", "wall_time_s": wall, "files": files, "metrics": metrics}
    _write_json(out / "manifest.json", manifest)
    missing = [f for f in files if not (out / f).exists()]
    if missing:  # manifest contract: every listed file exists
        raise NumericalFailure(f"missing output files: {missing}")
    return manifest


# ---------------------------------------------------------------------------
# presets

PI = float(np.pi)

PRESETS: dict[str, dict] = {
    "simulate-conservation": {
        "scenario": "simulate",
        "grid": {"d": 1, "n": 64},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 1.0, 1.0], "gauge_shift": 0.0},
        "numerics": {"dt": 1e-3, "t_final": 10.0, "t_out": 0.1, "seed": 1},
        "initial": {"kind": "random", "decay": 4.0, "s_norm": 1.0, "norm": 1.0, "seed": 1},
    },
    "simulate-planewave": {
        "scenario": "simulate",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 0.0, 0.5], "gauge_shift": 0.0},
        "numerics": {"dt": 1e-3, "t_final": 1.0, "t_out": 0.1, "seed": 0},
        "initial": {"kind": "plane", "k": 2, "amplitude": 1.0},
    },
    "energy-identity": {
        "scenario": "stabilize",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 1.0, 1.0], "gauge_shift": 0.0},
        "regions": {"omega": f"interval:0,{PI}"},
        "numerics": {"dt": 4e-3, "t_final": 1.0, "t_out": 0.0, "seed": 2},
        "initial": {"kind": "random", "decay": 4.0, "s_norm": 1.0, "norm": 1.0, "seed": 2},
        "fit_window": [0.5, 1.0],
    },
    "stab-t1": {
        "scenario": "stabilize",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 1.0, 1.0], "gauge_shift": 0.0},
        "regions": {"omega": f"interval:0,{PI}"},
        "numerics": {"dt": 2e-3, "t_final": 50.0, "t_out": 0.05, "seed": 7},
        "initial": {"kind": "random", "decay": 4.0, "s_norm": 1.0, "norm": 1.0, "seed": 7},
        "fit_window": [25.0, 50.0],
    },
    "hum-closed-form": {
        "scenario": "control-linear",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 0.0]},
        "regions": {"omega": "all"},
        "control": {"t_horizon": 1.0, "s": 1.0},
        "numerics": {"n_quad": 64, "cg_tol": 1e-10, "seed": 3},
        "initial": {"kind": "random", "decay": 3.0, "s_norm": 1.0, "norm": 1.0, "seed": 3},
        "target": {"kind": "zero"},
    },
    "hum-bump": {
        "scenario": "control-linear",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 0.0]},
        "regions": {"omega": f"interval:0,{PI}"},
        "control": {"t_horizon": 1.0, "s": 1.0},
        "numerics": {"n_quad": 64, "cg_tol": 1e-10, "seed": 3},
        "initial": {"kind": "random", "decay": 3.0, "s_norm": 1.0, "norm": 1.0, "seed": 3},
        "target": {"kind": "zero"},
    },
    "local-control": {
        "scenario": "control-nonlinear",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 1.0, 1.0]},
        "regions": {"omega": f"interval:0,{PI}"},
        "control": {"t_horizon": 1.0, "s": 1.0, "smallness_radius": 5e-2},
        "numerics": {"n_quad": 64, "cg_tol": 1e-10, "fp_tol": 1e-6, "max_iter": 20, "seed": 5},
        "initial": {"kind": "random", "decay": 3.0, "s_norm": 1.0, "norm": 1e-2, "seed": 5},
        "target": {"kind": "zero"},
    },
    "global-control": {
        "scenario": "control-global",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 1.0, 1.0]},
        "regions": {"omega": f"interval:0,{PI}"},
        "control": {"t_horizon": 1.0, "s": 1.0, "eps_small": 5e-2},
        "numerics": {"dt": 2e-3, "t_final": 200.0, "n_quad": 64, "cg_tol": 1e-11, "fp_tol": 1e-9, "seed": 21},
        "initial": {"kind": "random", "decay": 4.0, "s_norm": 1.0, "norm": 1.0, "seed": 21},
        "target": {"kind": "random", "decay": 4.0, "s_norm": 1.0, "norm": 1.0, "seed": 22},
        "gcc": {"t0": 6.3831853071795865},
    },
    "strichartz-841": {
        "scenario": "strichartz",
        "grid": {"d": 1, "n": 32},
        "equation": {"sigma": 2.0, "p_coeffs": [0.0, 0.0]},
        "strichartz": {"p": 8.0, "q": 4.0, "trials": 8, "t_horizon": 1.0},
        "numerics": {"seed": 9},
    },
    "gcc-interval": {
        "scenario": "gcc-check",
        "grid": {"d": 1},
        "regions": {"omega": f"interval:0,{PI}"},
        "gcc": {"t0": 6.293185307179586},
    },
    "gcc-strip": {
        "scenario": "gcc-check",
        "grid": {"d": 2},
        "regions": {"omega": f"box:0,1,0,{2 * PI}"},
        "gcc": {"t0": 10.0},
    },
    "gcc-ballcomp": {
        "scenario": "gcc-check",
        "grid": {"d": 2},
        "regions": {"omega": f"not:ball:{PI},{PI},0.5"},
        "gcc": {"t0": 2.0, "n_starts": 256},
    },
}


def emit_presets(out_dir: str | Path) -> list[Path]:
    """Write the reference configs (one per scenario plus the acceptance
    variants) as <name>.json files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, cfg in PRESETS.items():
        p = out / f"{name}.json"
        _write_json(p, cfg)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# entry point


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fraqctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a JSON config")
    p_run.add_argument("--out", default=None, help="output directory (default: config's output.dir or '.')")
    p_run.add_argument("--seed", type=int, default=None, help="override numerics.seed")
    p_pre = sub.add_parser("presets", help="write the reference configs")
    p_pre.add_argument("--out", required=True, help="directory for the preset files")
    args = parser.parse_args(argv)

    if args.command == "presets":
        try:
            paths = emit_presets(args.out)
        except OSError as exc:
            print(f"fraqctl: cannot write presets: {exc}", file=sys.stderr)
            return 2
        for p in paths:
            print(p)
        return 0

    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"fraqctl: cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.setdefault("numerics", {})["seed"] = args.seed
        for key in ("initial", "target"):  # full override: drop per-state seeds
            if isinstance(cfg.get(key), dict):
                cfg[key].pop("seed", None)
    out_dir = args.out or _get(cfg, "output.dir", ".")
    try:
        manifest = run_config(cfg, out_dir)
    except ConfigError as exc:
        print(f"fraqctl: invalid config: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"fraqctl: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"scenario": manifest["scenario"], "out": str(out_dir), "metrics_file": "result.json"}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
