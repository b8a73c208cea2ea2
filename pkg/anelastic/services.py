# anelastic/services.py
from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .constants import CSV_FLOAT_FORMAT
from .errors import ScenarioConfigError
from .fastwave import EigenSystem, build_eigensystem, filter_state, resonance_set, resonant_forms
from .gpe import WaveState, build_initial_state, conserved_quantities, default_time_step, evolve
from .helmholtz import WeightedHelmholtz
from .hydro import conservation_residuals, observables
from .limits import (
    CoupledTrajectory,
    coupled_evolve,
    evolve_anelastic,
    kinetic_energy,
    limit_initial_data,
    limit_initial_data_from_wave,
    weighted_div_norm,
)
from .loaders import ScenarioConfig, load_scenario
from .models import ConvergenceRow, ConvergenceTable
from .modulated import convergence_functionals
from .snapshots import write_field, write_wave_state

logger = logging.getLogger(__name__)


# ---- Simple in-process caches for heavy computations ----

_EIGEN_CACHE: Dict[Tuple, EigenSystem] = {}
_SPECTRUM_CACHE: Dict[Tuple[str, Optional[int]], Dict[str, Any]] = {}


def _background_key(config: ScenarioConfig) -> Tuple:
    return (
        config.dim, config.points, config.period, config.background, config.rho0_mean,
        config.rho0_amplitude, tuple(config.rho0_mode), config.rho0_file, config.source,
        config.retained, config.truncation, config.tolerances.cluster,
    )


def get_eigensystem_cached(config: ScenarioConfig, force_refresh: bool = False) -> EigenSystem:
    key = _background_key(config)
    if force_refresh or key not in _EIGEN_CACHE:
        _EIGEN_CACHE[key] = build_eigensystem(
            config.rho0_field(),
            retained=config.retained,
            truncation=config.truncation,
            cluster_rel_tol=config.tolerances.cluster,
        )
    return _EIGEN_CACHE[key]


def get_spectrum_cached(scenario: str, resolution: Optional[int] = None, force_refresh: bool = False) -> Dict[str, Any]:
    key = (scenario, int(resolution) if resolution else None)
    if force_refresh or key not in _SPECTRUM_CACHE:
        config = load_scenario(scenario).with_overrides(resolution=resolution)
        eig = get_eigensystem_cached(config, force_refresh=force_refresh)
        _SPECTRUM_CACHE[key] = {
            "scenario": config.name,
            "points": config.points,
            "truncation": eig.truncation,
            "kappas": [float(k) for k in eig.kappas],
            "clusterIds": [int(c) for c in eig.cluster_ids],
        }
    return _SPECTRUM_CACHE[key]


def helmholtz_for(config: ScenarioConfig) -> WeightedHelmholtz:
    return WeightedHelmholtz(config.rho0_field(), tol=config.tolerances.projection)


# ---------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------

def write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def eps_dirname(eps: float) -> str:
    return f"eps_{eps:g}"


def run_id_for(config: ScenarioConfig) -> str:
    payload = json.dumps(config.to_json(), sort_keys=True, default=str) + config.text
    return f"{config.name}-{hashlib.sha1(payload.encode()).hexdigest()[:10]}"


# ---------------------------------------------------------
# GPE side
# ---------------------------------------------------------

def simulate(config: ScenarioConfig, eps: float) -> List[WaveState]:
    state = build_initial_state(config.initial_spec(), eps, config.alpha)
    dt = default_time_step(state.grid, eps, config.alpha, config.dt_c1, config.dt_c2)
    return evolve(
        state,
        config.t_final,
        dt=dt,
        outputs=config.output_times(),
        tolerance=config.tolerances.step_doubling,
    )


def gpe_timeseries(trajectory: Sequence[WaveState], energy: bool = False) -> pd.DataFrame:
    grid = trajectory[0].grid
    axes = ["x", "y"][: grid.dim]
    rows = []
    for s in trajectory:
        cq = conserved_quantities(s)
        row = {"time": s.time, "C1": cq.hamiltonian}
        row.update({f"C2_{a}": c for a, c in zip(axes, cq.current)})
        row["C3"] = cq.mass
        rows.append(row)
    df = pd.DataFrame(rows)
    if len(trajectory) >= 3:
        res = conservation_residuals(trajectory, energy=energy)
        df = df.merge(res, on="time", how="left")
    else:
        df["residual_mass"] = np.nan
        df["residual_momentum"] = np.nan
    return df


# ---------------------------------------------------------
# Limit side (eps independent)
# ---------------------------------------------------------

def solve_limits(config: ScenarioConfig, eig: Optional[EigenSystem] = None,
                 helmholtz: Optional[WeightedHelmholtz] = None) -> CoupledTrajectory:
    eig = eig or get_eigensystem_cached(config)
    helmholtz = helmholtz or helmholtz_for(config)
    spec = config.initial_spec()
    if spec.psi0 is not None:
        state = build_initial_state(spec, config.eps[0], config.alpha)
        a0, o0 = limit_initial_data_from_wave(state, helmholtz, eig)
    else:
        a0, o0 = limit_initial_data(spec, helmholtz, eig, stream=config.stream_field())
    forms = resonant_forms(eig, config.tolerances.resonance, config.tolerances.gap)
    return coupled_evolve(
        a0, o0, config.t_final, helmholtz, eig,
        dt=config.limit_dt, outputs=config.output_times(), forms=forms, cfl=config.tolerances.cfl,
    )


def filtered_frame(trajectory: Sequence[WaveState], limit: CoupledTrajectory, eig: EigenSystem,
                   helmholtz: WeightedHelmholtz) -> pd.DataFrame:
    """Filtered GPE coefficients V^eps next to V0 at every snapshot (long format)."""
    frames = []
    for w, o in zip(trajectory, limit.oscillating):
        V = filter_state(observables(w), helmholtz, eig, w.time, w.eps)
        frames.append(
            pd.DataFrame(
                {
                    "time": w.time,
                    "index": np.arange(eig.size),
                    "eps_re": V.coeffs.real,
                    "eps_im": V.coeffs.imag,
                    "limit_re": o.coeffs.real,
                    "limit_im": o.coeffs.imag,
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


# ---------------------------------------------------------
# One sweep member
# ---------------------------------------------------------

def run_eps(config: ScenarioConfig, eps: float, limit: CoupledTrajectory, run_dir: Path) -> ConvergenceRow:
    """Simulate, diagnose and write eps_<value>/; failures are recorded on the row."""
    started = time.perf_counter()
    row = ConvergenceRow(eps=eps)
    out = run_dir / eps_dirname(eps)
    try:
        eig = get_eigensystem_cached(config)
        helmholtz = helmholtz_for(config)
        trajectory = simulate(config, eps)
        write_csv(gpe_timeseries(trajectory), out / "timeseries.csv")
        write_wave_state(trajectory[-1], out / "final_state")

        conv = convergence_functionals(trajectory, limit, eig)
        write_csv(conv.series, out / "modenergy.csv")
        write_csv(filtered_frame(trajectory, limit, eig, helmholtz), out / "filtered.csv")

        for key, value in conv.summary().items():
            setattr(row, key, value)
        logger.info("eps=%g done: sup density error %.3e", eps, row.sup_density_error)
    except Exception as exc:  # one failing eps must not stop the sweep
        row.error = f"{type(exc).__name__}: {exc}"
        logger.error("eps=%g failed: %s", eps, row.error)
    row.runtime = time.perf_counter() - started
    return row


def _run_eps_job(args) -> ConvergenceRow:
    config, eps, limit, run_dir = args
    return run_eps(config, eps, limit, Path(run_dir))


@dataclass
class RunResult:
    run_id: str
    run_dir: Path
    config: ScenarioConfig
    table: ConvergenceTable
    limit: Optional[CoupledTrajectory] = field(default=None, repr=False)

    def to_json(self) -> Dict[str, Any]:
        return {"runId": self.run_id, "runDir": str(self.run_dir), **self.table.to_json()}


def write_config_echo(config: ScenarioConfig, run_dir: Path) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.echo").write_text(config.text)
    (run_dir / "config.resolved.json").write_text(json.dumps(config.to_json(), indent=2, sort_keys=True, default=str))
    (run_dir / "run.json").write_text(json.dumps({"run_id": run_id_for(config)}, indent=2))


def run_scenario(
    config: ScenarioConfig,
    out_dir: Optional[Path] = None,
    index: bool = False,
    workers: Optional[int] = None,
) -> RunResult:
    """
    Full sweep: limit systems once, then one GPE run plus diagnostics per eps.
    Writes config.echo, config.resolved.json, limits.csv, table.csv, runtimes.csv
    and eps_<value>/ into the run directory.
    """
    run_id = run_id_for(config)
    run_dir = Path(out_dir) if out_dir else Path("runs") / run_id
    write_config_echo(config, run_dir)

    eig = get_eigensystem_cached(config)
    limit = solve_limits(config, eig)
    write_csv(limit.series, run_dir / "limits.csv")

    workers = workers or config.workers
    if workers > 1 and len(config.eps) > 1:
        jobs = [(config, eps, limit, str(run_dir)) for eps in config.eps]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_eps_job, jobs))
    else:
        rows = [run_eps(config, eps, limit, run_dir) for eps in config.eps]

    table = ConvergenceTable(rows)
    write_csv(table.to_frame(), run_dir / "table.csv")
    write_csv(table.runtimes_frame(), run_dir / "runtimes.csv")
    result = RunResult(run_id, run_dir, config, table, limit)
    if index:
        record_run(result)
    return result


# ---------------------------------------------------------
# Single-purpose pipelines (CLI subcommands)
# ---------------------------------------------------------

def run_simulate(config: ScenarioConfig, out_dir: Path) -> List[Path]:
    written = []
    for eps in config.eps:
        trajectory = simulate(config, eps)
        sub = out_dir / eps_dirname(eps)
        written.append(write_csv(gpe_timeseries(trajectory, energy=True), sub / "timeseries.csv"))
        write_wave_state(trajectory[-1], sub / "final_state")
    return written


def run_spectrum(config: ScenarioConfig, out_dir: Path) -> Tuple[Path, Path]:
    eig = get_eigensystem_cached(config)
    return (
        write_csv(eig.to_frame(), out_dir / "spectrum.csv"),
        write_csv(eig.modes_frame(), out_dir / "modes.csv"),
    )


def run_resonances(config: ScenarioConfig, out_dir: Path) -> Tuple[Path, Path]:
    eig = get_eigensystem_cached(config)
    res = resonance_set(eig, config.tolerances.resonance, config.tolerances.gap)
    return (
        write_csv(res.to_frame(), out_dir / "resonances.csv"),
        write_csv(res.near, out_dir / "near_resonances.csv"),
    )


def run_project(config: ScenarioConfig, out_dir: Path) -> Dict[str, Any]:
    """Weighted Helmholtz split of the initial current J0 at the largest eps."""
    helmholtz = helmholtz_for(config)
    state = build_initial_state(config.initial_spec(), config.eps[0], config.alpha)
    J = observables(state).J
    dec = helmholtz.project(J)
    write_field(dec.solenoidal, out_dir / "solenoidal", kind="solenoidal")
    write_field(dec.gradient_part, out_dir / "gradient", kind="gradient")
    write_field(dec.potential, out_dir / "potential", kind="potential")
    grid = helmholtz.grid
    sol = np.real(dec.solenoidal.values)
    stats = {
        "eps": config.eps[0],
        "residual": dec.residual,
        "iterations": dec.iterations,
        "weighted_div_solenoidal": grid.norm(grid.div(sol)),
        "norm_input": grid.norm(np.real(J.values)),
        "norm_solenoidal": grid.norm(sol),
        "norm_gradient": grid.norm(np.real(dec.gradient_part.values)),
    }
    (out_dir / "projection.json").write_text(json.dumps(stats, indent=2, sort_keys=True))
    return stats


def run_anelastic(config: ScenarioConfig, out_dir: Path) -> Path:
    helmholtz = helmholtz_for(config)
    eig = get_eigensystem_cached(config)
    a0, _ = limit_initial_data(config.initial_spec(), helmholtz, eig, stream=config.stream_field())
    snaps = evolve_anelastic(a0, config.t_final, helmholtz, config.limit_dt, config.output_times(), config.tolerances.cfl)
    df = pd.DataFrame(
        {
            "time": [s.time for s in snaps],
            "kinetic_energy": [kinetic_energy(s, helmholtz.rho0) for s in snaps],
            "div_norm": [weighted_div_norm(s, helmholtz.rho0) for s in snaps],
        }
    )
    write_field(snaps[-1].v, out_dir / "v_final", kind="velocity", extra={"time": snaps[-1].time})
    write_field(snaps[-1].pi, out_dir / "pi_final", kind="pressure", extra={"time": snaps[-1].time})
    return write_csv(df, out_dir / "anelastic.csv")


def run_oscillate(config: ScenarioConfig, out_dir: Path) -> Path:
    limit = solve_limits(config)
    return write_csv(limit.series, out_dir / "limits.csv")


def run_modenergy(config: ScenarioConfig, out_dir: Path) -> List[Path]:
    eig = get_eigensystem_cached(config)
    limit = solve_limits(config, eig)
    written = []
    for eps in config.eps:
        conv = convergence_functionals(simulate(config, eps), limit, eig)
        written.append(write_csv(conv.series, out_dir / eps_dirname(eps) / "modenergy.csv"))
    return written


# ---------------------------------------------------------
# Run index (SQLAlchemy)
# ---------------------------------------------------------

def _none_if_nan(x):
    return None if x is None or (isinstance(x, float) and np.isnan(x)) else float(x)


def index_run_directory(session, run_dir: Path, force: bool = False) -> Optional[str]:
    """Upsert one run directory into the index; returns its run id (None if skipped)."""
    from models_aggregates import ConvergenceRecord, RunRecord

    run_dir = Path(run_dir)
    resolved = run_dir / "config.resolved.json"
    table_path = run_dir / "table.csv"
    if not resolved.exists() or not table_path.exists():
        raise ScenarioConfigError(f"{run_dir} is not a run directory (config.resolved.json/table.csv missing)")
    cfg = json.loads(resolved.read_text())
    table = pd.read_csv(table_path, keep_default_na=True)
    run_meta = run_dir / "run.json"
    run_id = json.loads(run_meta.read_text())["run_id"] if run_meta.exists() else run_dir.name

    existing = session.get(RunRecord, run_id)
    if existing is not None and not force:
        return None
    if existing is not None:
        session.delete(existing)
        session.flush()

    errors = table["error"].fillna("").astype(str)
    record = RunRecord(
        run_id=run_id,
        scenario=cfg["name"],
        run_dir=str(run_dir),
        dim=int(cfg["dim"]),
        points=int(cfg["points"]),
        alpha=float(cfg["alpha"]),
        t_final=float(cfg["t_final"]),
        eps_list=",".join(repr(float(e)) for e in cfg["eps"]),
        status="ok" if (errors == "").all() else "partial",
    )
    for pos, r in enumerate(table.itertuples(index=False)):
        record.rows.append(
            ConvergenceRecord(
                position=pos,
                eps=float(r.eps),
                sup_density_error=_none_if_nan(r.sup_density_error),
                max_weak_defect=_none_if_nan(r.max_weak_defect),
                h0=_none_if_nan(r.H0),
                max_h=_none_if_nan(r.max_H),
                max_w=_none_if_nan(r.max_W),
                max_s=_none_if_nan(r.max_S),
                error=errors.iloc[pos] or None,
            )
        )
    session.add(record)
    return run_id


def record_run(result: RunResult) -> str:
    from db import SessionLocal, init_db

    init_db()
    session = SessionLocal()
    try:
        index_run_directory(session, result.run_dir, force=True)
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
    return result.run_id
