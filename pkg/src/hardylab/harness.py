"""Experiment orchestration: JSON configs, threshold scans, run manifests,
and table/plot-data emission.

Every run is a pure function of its config: no randomness, no wall-clock
dependence in outputs (the manifest timestamp is metadata, never hashed).
Re-running a manifest's config must reproduce every output file bit for bit;
``verify_reproduction`` is the checkable form of that guarantee.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import lowerbound
from .criteria import (CriterionStatistic, moment_ratio_check,
                       necessary_critical_stat, necessary_offorigin_stat,
                       necessary_subcritical_stat, sufficient_condition_stat,
                       supersolution_exponents, verify_supersolution)
from .exceptions import ConfigError, ScanError
from .fields import GridSpec, export_field
from .kernel import KernelSpec, KernelTable, default_table, export_table, synthesize_kernel
from .measures import MeasureData
from .picard import SolveReport, SolverConfig, iterate_to_fixed_point
from .profiles import profile_from_spec
from .semigroup import Problem

_PROFILE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["power", "critical-log", "fujita-psi", "dirac",
                          "translated"]},
        "c": {"type": "number", "minimum": 0},
        "a": {"type": "number", "minimum": 0},
        "amplitude": {"type": "number", "minimum": 0},
        "mass": {"type": "number", "minimum": 0},
        "case": {"enum": ["critical", "supercritical"]},
        "trunc": {"type": "number", "exclusiveMinimum": 0},
        "location": {"type": "array", "items": {"type": "number"}},
        "z": {"type": "array", "items": {"type": "number"}},
        "base": {"type": "object"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["dim", "theta", "gamma", "p", "T"],
    "properties": {
        "dim": {"enum": [1, 2]},
        "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "p": {"type": "number", "exclusiveMinimum": 1},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "L": {"type": "number", "exclusiveMinimum": 0},
        "n": {"type": "integer", "minimum": 8},
        "time_nodes": {"type": "integer", "minimum": 2},
        "profile": _PROFILE_SCHEMA,
        "solver": {
            "type": "object",
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "blowup_threshold": {"type": "number", "exclusiveMinimum": 0},
                "source_enabled": {"type": "boolean"},
            },
        },
        "task": {"type": "object"},
        "preset": {"enum": ["dirac-necessity"]},
    },
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


def validate_config(cfg: dict) -> None:
    """Schema check with field-path diagnostics, then the Problem invariants
    (so e.g. gamma >= min(theta, N) fails here, not deep in a solve)."""
    errors = sorted(_VALIDATOR.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = ".".join(str(q) for q in e.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {e.message}")
    problem_from_config(cfg)   # raises ConfigError with the violated inequality


def problem_from_config(cfg: dict) -> Problem:
    return Problem(dim=int(cfg["dim"]), theta=float(cfg["theta"]),
                   gamma=float(cfg["gamma"]), p=float(cfg["p"]),
                   horizon=float(cfg["T"]))


def grid_from_config(cfg: dict) -> GridSpec:
    dim = int(cfg["dim"])
    half = float(cfg.get("L", 20.0))
    n = int(cfg.get("n", 1024 if dim == 1 else 256))
    return GridSpec(dim, half, n)


def solver_from_config(cfg: dict) -> SolverConfig:
    s = cfg.get("solver", {})
    return SolverConfig(time_nodes=int(cfg.get("time_nodes", 64)),
                        tol=float(s.get("tol", 1e-8)),
                        max_iter=int(s.get("max_iter", 200)),
                        blowup_threshold=float(s.get("blowup_threshold", 1e10)),
                        source_enabled=bool(s.get("source_enabled", True)))


def measure_from_config(cfg: dict, problem: Problem, grid: GridSpec) -> MeasureData:
    if "profile" not in cfg:
        raise ConfigError("config needs a profile")
    return profile_from_spec(cfg["profile"], problem,
                             default_truncation=grid.half_width / 4.0)


# ---------------------------------------------------------------------------
# threshold scan

@dataclass(frozen=True)
class ScanResult:
    problem: Problem
    profile_kind: str
    c_low: float               # largest multiplier that Converged
    c_high: float              # smallest multiplier that hit BlowupProxy
    history: tuple             # (iteration, c_mid, verdict)

    def __post_init__(self):
        if not self.c_low < self.c_high:
            raise ScanError("bracket invariant violated: c_low >= c_high")


def scan_threshold(problem: Problem, profile_spec: dict, c_min: float,
                   c_max: float, iters: int, grid: GridSpec | None = None,
                   table: KernelTable | None = None,
                   solver: SolverConfig = SolverConfig()) -> ScanResult:
    """Log-amplitude bisection of the existence/blow-up threshold.

    The configured profile is multiplied by each trial amplitude (all profile
    kinds are homogeneous in their amplitude, so this is exact).  Endpoints
    are verified by full solves before any refinement; a verdict that is
    neither Converged nor BlowupProxy aborts the scan — the bracket cannot
    be moved honestly on an undecided solve.
    """
    if not 0.0 < c_min < c_max:
        raise ConfigError("need 0 < c_min < c_max")
    if iters < 0:
        raise ConfigError("iters must be nonnegative")
    if grid is None:
        grid = GridSpec(problem.dim, 20.0, 1024 if problem.dim == 1 else 256)
    base = profile_from_spec(profile_spec, problem,
                             default_truncation=grid.half_width / 4.0)

    def verdict_at(c):
        return iterate_to_fixed_point(base.scaled(c), problem, solver,
                                      grid=grid, table=table).verdict

    history = []
    low_v = verdict_at(c_min)
    history.append((0, c_min, low_v))
    if low_v != "Converged":
        raise ScanError(f"bracket invalid: c_min={c_min} gave {low_v}")
    high_v = verdict_at(c_max)
    history.append((0, c_max, high_v))
    if high_v != "BlowupProxy":
        raise ScanError(f"bracket invalid: c_max={c_max} gave {high_v}")
    lo, hi = c_min, c_max
    for i in range(1, iters + 1):
        mid = float(np.sqrt(lo * hi))
        v = verdict_at(mid)
        history.append((i, mid, v))
        if v == "Converged":
            lo = mid
        elif v == "BlowupProxy":
            hi = mid
        else:
            raise ScanError(f"scan aborted: undecided verdict {v} at c={mid:.6g}"
                            " — numerics at the edge")
    return ScanResult(problem=problem, profile_kind=str(profile_spec["kind"]),
                      c_low=lo, c_high=hi, history=tuple(history))


# ---------------------------------------------------------------------------
# emission

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_stats_csv(stat: CriterionStatistic, path: Path) -> None:
    order = np.argsort(stat.sigmas)[::-1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "statistic"])
        for i in order:
            w.writerow([f"{stat.sigmas[i]:.12g}", f"{stat.values[i]:.12g}"])


def _write_plot(path: Path, xs, ys) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x:.12g} {y:.12g}\n")


def _verdict_json(stat: CriterionStatistic) -> dict:
    return {"verdict": stat.verdict.kind, "slope": stat.slope,
            "c_emp": float(stat.values.max())}


def _emit_stat(stat: CriterionStatistic, out: Path, stem: str) -> list[Path]:
    stats_csv = out / f"{stem}.csv"
    _write_stats_csv(stat, stats_csv)
    verdict = out / f"{stem}_verdict.json"
    _write_json(_verdict_json(stat), verdict)
    plot = out / "plots" / f"{stem}.dat"
    _write_plot(plot, stat.sigmas, stat.values)
    return [stats_csv, verdict, plot]


def _emit_solve(report: SolveReport, out: Path, theta: float,
                stride: int) -> list[Path]:
    outputs = []
    doc = {"verdict": report.verdict, "iterations": report.iterations,
           "residual": report.residual,
           "sup_norm_history": list(report.sup_norm_history),
           "wrap_contamination_estimate": report.wrap_contamination_estimate,
           "monotonicity_margin": report.monotonicity_margin}
    rp = out / "report.json"
    _write_json(doc, rp)
    outputs.append(rp)
    state = report.state
    if state is not None:
        for j in range(0, len(state.times), stride):
            base = out / f"field_node_{j:03d}.csv"
            export_field(state.field_at(j), base, theta=theta)
            outputs += [base, base.with_suffix(".csv.json")]
    plot = out / "plots" / "sup_history.dat"
    _write_plot(plot, range(len(report.sup_norm_history)), report.sup_norm_history)
    outputs.append(plot)
    return outputs


def _run_check(cfg: dict, problem: Problem, grid: GridSpec, out: Path) -> list[Path]:
    task = cfg.get("task", {})
    kind = task.get("check")
    mu = measure_from_config(cfg, problem, grid)
    if kind == "necessary":
        return _emit_stat(necessary_subcritical_stat(mu, problem), out, "stats")
    if kind == "necessary-critical":
        return _emit_stat(necessary_critical_stat(mu, problem), out, "stats")
    if kind == "necessary-offorigin":
        z = task.get("z")
        if z is None:
            raise ConfigError("task.z required for the off-origin check")
        return _emit_stat(necessary_offorigin_stat(mu, problem, z), out, "stats")
    if kind == "sufficient":
        r = task.get("r")
        if r is None:
            raise ConfigError("task.r required for the sufficiency check")
        return _emit_stat(sufficient_condition_stat(mu, problem, float(r)),
                          out, "stats")
    if kind == "supersolution":
        params = supersolution_exponents(problem, float(task.get("alpha", 1.9)))
        samples = task.get("time_samples", [0.1, 0.25, 0.5])
        rep = verify_supersolution(mu, params, float(task["r"]), problem,
                                   samples, grid=grid)
        doc = {"verdict": "Passes" if rep.passed else "Fails",
               "tolerance": rep.tolerance,
               "samples": [{"t": t, "min_residual": m, "sup_w": s}
                           for t, m, s in rep.samples]}
        vp = out / "verdict.json"
        _write_json(doc, vp)
        csvp = out / "stats.csv"
        with open(csvp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "min_residual"])
            for t, m, _ in rep.samples:
                w.writerow([f"{t:.12g}", f"{m:.12g}"])
        plot = out / "plots" / "residuals.dat"
        _write_plot(plot, [t for t, _, _ in rep.samples],
                    [m for _, m, _ in rep.samples])
        return [vp, csvp, plot]
    if kind == "moment-ratio":
        rho = float(task.get("rho", 0.1))
        z = task.get("z")
        if z is None:
            raise ConfigError("task.z required for the moment-ratio check")
        s_grid = task.get("s_grid")
        if s_grid is None:
            lo, hi = rho**problem.theta, problem.horizon / 3.0
            s_grid = np.linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 12)
        rep = moment_ratio_check(problem, z, rho, s_grid)
        vp = out / "verdict.json"
        _write_json({"verdict": "Finite", "max_ratio": rep.max_ratio}, vp)
        csvp = out / "stats.csv"
        with open(csvp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "ratio"])
            for s, rt in zip(rep.s_values, rep.ratios):
                w.writerow([f"{s:.12g}", f"{rt:.12g}"])
        plot = out / "plots" / "ratios.dat"
        _write_plot(plot, rep.s_values, rep.ratios)
        return [vp, csvp, plot]
    raise ConfigError(f"unknown check kind {kind!r}")


def _run_preset_dirac_necessity(cfg: dict, problem: Problem, out: Path) -> list[Path]:
    """Unit Dirac at the origin against both necessary criteria; for any
    p >= p_hardy both statistics must come back DivergesLike."""
    mu = profile_from_spec({"kind": "dirac", "mass": 1.0}, problem)
    outputs = _emit_stat(necessary_subcritical_stat(mu, problem), out, "subcritical")
    critical_problem = Problem(problem.dim, problem.theta, problem.gamma,
                               problem.p_hardy, problem.horizon)
    outputs += _emit_stat(necessary_critical_stat(mu, critical_problem),
                          out, "critical")
    return outputs


def run_experiment(task: str, cfg: dict, out_dir) -> dict:
    """Dispatch one experiment, write outputs + manifest, return the manifest."""
    validate_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = problem_from_config(cfg)
    grid = grid_from_config(cfg)
    if cfg.get("preset") == "dirac-necessity":
        outputs = _run_preset_dirac_necessity(cfg, problem, out)
    elif task == "solve":
        mu = measure_from_config(cfg, problem, grid)
        report = iterate_to_fixed_point(mu, problem, solver_from_config(cfg),
                                        grid=grid)
        stride = int(cfg.get("task", {}).get("field_stride", 1))
        outputs = _emit_solve(report, out, problem.theta, stride)
    elif task == "check":
        outputs = _run_check(cfg, problem, grid, out)
    elif task == "scan":
        t = cfg.get("task", {})
        result = scan_threshold(problem, cfg["profile"],
                                float(t.get("c_min", 1e-3)),
                                float(t.get("c_max", 1e3)),
                                int(t.get("iters", 12)), grid=grid,
                                solver=solver_from_config(cfg))
        sp = out / "scan.csv"
        with open(sp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "c_mid", "verdict"])
            for i, c, v in result.history:
                w.writerow([i, f"{c:.12g}", v])
        jp = out / "scan.json"
        _write_json({"c_low": result.c_low, "c_high": result.c_high,
                     "profile_kind": result.profile_kind}, jp)
        plot = out / "plots" / "bracket.dat"
        _write_plot(plot, [h[0] for h in result.history],
                    [h[1] for h in result.history])
        outputs = [sp, jp, plot]
    elif task == "recursion":
        t = cfg.get("task", {})
        run = lowerbound.a_sequence(float(t.get("c1", 1.0)),
                                    float(t.get("c2", 1.0)),
                                    float(t.get("p", cfg["p"])),
                                    int(t.get("k", 60)))
        rp = out / "run.csv"
        lowerbound.write_run_csv(run, rp)
        bound = lowerbound.b_bound_check(run)
        jp = out / "summary.json"
        _write_json({"beta": run.beta, "sup_b": bound.sup_b,
                     "fitted_c": bound.fitted_c,
                     "tail_index": bound.tail_index}, jp)
        plot = out / "plots" / "b_sequence.dat"
        _write_plot(plot, range(1, len(run) + 1), run.b)
        outputs = [rp, jp, plot]
    elif task == "kernel":
        t = cfg.get("task", {})
        spec = KernelSpec(int(cfg["dim"]), float(cfg["theta"]))
        if "rmax" in t or "points" in t:
            table = synthesize_kernel(spec,
                                      r_max=float(t["rmax"]) if "rmax" in t else None,
                                      n_points=int(t.get("points", 4096)))
        else:
            table = default_table(spec.dim, spec.theta)
        kp = out / "table.csv"
        export_table(table, kp)
        plot = out / "plots" / "profile.dat"
        _write_plot(plot, table.radii, table.values)
        outputs = [kp, plot]
    else:
        raise ConfigError(f"unknown task {task!r}")
    manifest = {
        "version": 1,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "task": task,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "outputs": [{"path": str(p.relative_to(out)), "sha256": _sha256(p)}
                    for p in outputs],
    }
    _write_json(manifest, out / "manifest.json")
    return manifest


def verify_reproduction(manifest_path, scratch_dir) -> tuple[bool, list[str]]:
    """Re-run a manifest's config into a scratch directory and compare every
    output hash; returns (reproduced, mismatched paths)."""
    manifest = json.loads(Path(manifest_path).read_text())
    if config_hash(manifest["config"]) != manifest["config_sha256"]:
        raise ConfigError("manifest config hash mismatch: config edited after the run")
    redo = run_experiment(manifest["task"], manifest["config"], scratch_dir)
    old = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    new = {o["path"]: o["sha256"] for o in redo["outputs"]}
    bad = sorted(set(old) ^ set(new))
    bad += sorted(p for p in set(old) & set(new) if old[p] != new[p])
    return (not bad, bad)


def run_batch(jobs, out_root) -> list[dict]:
    """Run (task, config) pairs concurrently, one subdirectory per job.
    HARDYLAB_THREADS caps the worker count (default: CPU count)."""
    workers = int(os.environ.get("HARDYLAB_THREADS", os.cpu_count() or 1))
    out_root = Path(out_root)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(run_experiment, task, cfg, out_root / f"run_{i:03d}")
                   for i, (task, cfg) in enumerate(jobs)]
        return [f.result() for f in futures]
