# anelastic/loaders.py
"""
Scenario files: flat INI with sections [grid] [background] [initial] [limit]
[run] [tolerances] [modes]. Names without a path resolve to the bundled
scenarios/ directory (or ANELASTIC_SCENARIOS_DIR).
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from .constants import (
    BUNDLED_SCENARIOS,
    CFL_NUMBER,
    CLUSTER_REL_TOL,
    DEFAULT_PERIOD,
    DEFAULT_RETAINED_MODES,
    DT_C1,
    DT_C2,
    GAP_TOL,
    LIMIT_DT,
    PROJECTION_TOL,
)
from .errors import GridError, ScenarioConfigError
from .gpe import InitialDataSpec
from .snapshots import read_psi_csv
from .spectral import TorusField, TorusGrid

load_dotenv()

ROOT = Path(__file__).resolve().parents[1]
BUNDLED_DIR = ROOT / "scenarios"
SCENARIOS_DIR = Path(os.getenv("ANELASTIC_SCENARIOS_DIR", str(BUNDLED_DIR)))

DEFAULT_OUTPUT_POINTS = 21
NOISE_MAX_MODE = 3


# ---------- term grammar: "cos 0.2 1, sin 0.1 2" ----------

@dataclass(frozen=True)
class TrigTerm:
    kind: str
    amplitude: float
    mode: Tuple[int, ...]

    def evaluate(self, grid: TorusGrid) -> np.ndarray:
        ph = grid.phase(self.mode)
        return self.amplitude * (np.cos(ph) if self.kind == "cos" else np.sin(ph))


def parse_terms(text: str, dim: int, where: str) -> Tuple[TrigTerm, ...]:
    terms = []
    for chunk in (c.strip() for c in text.split(",")):
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 2 + dim or parts[0] not in ("cos", "sin"):
            raise ScenarioConfigError(
                f"{where}: term {chunk!r} must read 'cos|sin AMPLITUDE' followed by {dim} integer mode(s)"
            )
        try:
            amp = float(parts[1])
            mode = tuple(int(p) for p in parts[2:])
        except ValueError as exc:
            raise ScenarioConfigError(f"{where}: term {chunk!r}: {exc}") from None
        terms.append(TrigTerm(parts[0], amp, mode))
    return tuple(terms)


def evaluate_terms(terms: Sequence[TrigTerm], grid: TorusGrid) -> np.ndarray:
    out = np.zeros(grid.shape)
    for t in terms:
        out = out + t.evaluate(grid)
    return out


# ---------- config dataclasses ----------

@dataclass(frozen=True)
class Tolerances:
    projection: float = PROJECTION_TOL
    cluster: float = CLUSTER_REL_TOL
    resonance: Optional[float] = None
    gap: float = GAP_TOL
    step_doubling: Optional[float] = None
    cfl: float = CFL_NUMBER


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dim: int
    points: int
    period: float = DEFAULT_PERIOD
    background: str = "constant"
    rho0_mean: float = 1.0
    rho0_amplitude: float = 0.0
    rho0_mode: Tuple[int, ...] = ()
    rho0_file: Optional[str] = None
    phi0: Tuple[TrigTerm, ...] = ()
    s0: Tuple[TrigTerm, ...] = ()
    winding: Tuple[float, ...] = ()
    noise: float = 0.0
    psi0_file: Optional[str] = None
    stream: Tuple[TrigTerm, ...] = ()
    eps: Tuple[float, ...] = (0.1,)
    alpha: float = 1.0
    t_final: float = 1.0
    outputs: Tuple[float, ...] = ()
    seed: int = 0
    dt_c1: float = DT_C1
    dt_c2: float = DT_C2
    limit_dt: float = LIMIT_DT
    workers: int = 1
    tolerances: Tolerances = field(default_factory=Tolerances)
    retained: int = DEFAULT_RETAINED_MODES
    truncation: Optional[int] = None
    source: Optional[str] = None
    text: str = field(default="", repr=False, compare=False)

    # ---------- derived objects ----------

    def grid(self) -> TorusGrid:
        return TorusGrid(self.dim, self.points, self.period)

    def _resolve_file(self, name: str) -> Path:
        p = Path(name)
        if not p.is_absolute() and self.source:
            p = Path(self.source).parent / p
        if not p.exists():
            raise ScenarioConfigError(f"{self.name}: file not found: {p}")
        return p

    def rho0_field(self) -> TorusField:
        grid = self.grid()
        if self.background == "constant":
            values = np.full(grid.shape, self.rho0_mean)
        elif self.background == "cosine":
            mode = self.rho0_mode or (1,) + (0,) * (self.dim - 1)
            values = self.rho0_mean + self.rho0_amplitude * np.cos(grid.phase(mode))
        else:
            df = pd.read_csv(self._resolve_file(self.rho0_file))
            if "rho0" not in df.columns or len(df) != grid.size:
                raise ScenarioConfigError(
                    f"{self.name}: tabulated rho0 needs a 'rho0' column with {grid.size} rows"
                )
            values = df["rho0"].to_numpy(dtype=float).reshape(grid.shape)
        return TorusField(grid, values)

    def _noise(self, grid: TorusGrid, salt: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, salt])
        modes = [m for m in np.ndindex(*([2 * NOISE_MAX_MODE + 1] * self.dim))]
        out = np.zeros(grid.shape)
        for m in modes:
            k = tuple(x - NOISE_MAX_MODE for x in m)
            if 0 < sum(x * x for x in k) <= NOISE_MAX_MODE ** 2:
                a, b = rng.standard_normal(2)
                ph = grid.phase(k)
                out = out + a * np.cos(ph) + b * np.sin(ph)
        scale = np.max(np.abs(out))
        return self.noise * out / scale if scale > 0 else out

    def initial_spec(self) -> InitialDataSpec:
        grid = self.grid()
        rho0 = self.rho0_field()
        if self.psi0_file:
            return InitialDataSpec(rho0, psi0=read_psi_csv(self._resolve_file(self.psi0_file), grid))
        phi0 = evaluate_terms(self.phi0, grid)
        s0 = evaluate_terms(self.s0, grid)
        if self.noise:
            phi0 = phi0 + self._noise(grid, 1)
            s0 = s0 + self._noise(grid, 2)
        return InitialDataSpec(
            rho0,
            phi0=TorusField(grid, phi0),
            s0=TorusField(grid, s0),
            winding=tuple(self.winding),
        )

    def stream_field(self) -> Optional[np.ndarray]:
        if not self.stream:
            return None
        return evaluate_terms(self.stream, self.grid())

    def output_times(self) -> List[float]:
        if self.outputs:
            times = sorted(set([0.0] + [float(t) for t in self.outputs] + [self.t_final]))
            return [t for t in times if t <= self.t_final]
        return [float(t) for t in np.linspace(0.0, self.t_final, DEFAULT_OUTPUT_POINTS)]

    def with_overrides(self, eps: Optional[Sequence[float]] = None, resolution: Optional[int] = None) -> "ScenarioConfig":
        cfg = self
        if eps:
            cfg = replace(cfg, eps=tuple(float(e) for e in eps))
        if resolution:
            if cfg.background == "tabulated" or cfg.psi0_file:
                raise ScenarioConfigError(f"{cfg.name}: --resolution cannot resample tabulated input files")
            cfg = replace(cfg, points=int(resolution), truncation=None)
        validate(cfg)
        return cfg

    def to_json(self) -> Dict[str, Any]:
        d = asdict(self)
        d.pop("text")
        for key in ("phi0", "s0", "stream"):
            d[key] = [f"{t.kind} {t.amplitude!r} " + " ".join(str(m) for m in t.mode) for t in getattr(self, key)]
        d["output_times"] = self.output_times()
        return d


# ---------- parsing ----------

def _floats(text: str, where: str, sep: str = ",") -> Tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(sep, " ").split())
    except ValueError as exc:
        raise ScenarioConfigError(f"{where}: {exc}") from None


def _get(cp: configparser.ConfigParser, section: str, key: str, conv, default=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ScenarioConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def validate(cfg: ScenarioConfig) -> None:
    try:
        cfg.grid()
    except GridError as exc:
        raise ScenarioConfigError(f"[grid] {exc}") from None
    if cfg.background not in ("constant", "cosine", "tabulated"):
        raise ScenarioConfigError(f"[background] kind must be constant|cosine|tabulated, got {cfg.background!r}")
    if cfg.background == "tabulated" and not cfg.rho0_file:
        raise ScenarioConfigError("[background] kind=tabulated needs file")
    if not cfg.eps or any(e <= 0 for e in cfg.eps):
        raise ScenarioConfigError("[run] eps must be a non-empty list of positive values")
    if any(b >= a for a, b in zip(cfg.eps, cfg.eps[1:])):
        raise ScenarioConfigError(f"[run] eps must be strictly decreasing, got {list(cfg.eps)}")
    if not cfg.alpha > 0 or not cfg.t_final > 0:
        raise ScenarioConfigError("[run] alpha and t_final must be positive")
    if cfg.workers < 1:
        raise ScenarioConfigError("[run] workers must be >= 1")
    for key, value in asdict(cfg.tolerances).items():
        if value is not None and not value > 0:
            raise ScenarioConfigError(f"[tolerances] {key} must be positive, got {value}")
    if cfg.stream and cfg.dim != 2:
        raise ScenarioConfigError("[limit] stream needs dim = 2")
    if cfg.winding and len(cfg.winding) != cfg.dim:
        raise ScenarioConfigError(f"[initial] winding needs {cfg.dim} value(s)")
    if cfg.retained < 1:
        raise ScenarioConfigError("[modes] retained must be >= 1")


def parse_scenario(text: str, name: str = "scenario", source: Optional[str] = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source or name)
    except configparser.Error as exc:
        raise ScenarioConfigError(f"{name}: {exc}") from None
    if not cp.has_section("grid"):
        raise ScenarioConfigError(f"{name}: missing [grid] section")
    dim = _get(cp, "grid", "dim", int)
    points = _get(cp, "grid", "points", int)
    if dim is None or points is None:
        raise ScenarioConfigError(f"{name}: [grid] needs dim and points")

    terms = lambda sec, key: parse_terms(cp.get(sec, key), dim, f"[{sec}] {key}") if cp.has_option(sec, key) else ()
    ints = lambda s: tuple(int(x) for x in s.split())

    outputs: Tuple[float, ...] = ()
    t_final = _get(cp, "run", "t_final", float, 1.0)
    if cp.has_option("run", "outputs"):
        outputs = _floats(cp.get("run", "outputs"), "[run] outputs")
    elif cp.has_option("run", "output_every"):
        step = _get(cp, "run", "output_every", float)
        if not step > 0:
            raise ScenarioConfigError("[run] output_every must be positive")
        n = int(math.floor(t_final / step + 1e-9))
        outputs = tuple(step * i for i in range(n + 1))

    tol = Tolerances(
        projection=_get(cp, "tolerances", "projection", float, PROJECTION_TOL),
        cluster=_get(cp, "tolerances", "cluster", float, CLUSTER_REL_TOL),
        resonance=_get(cp, "tolerances", "resonance", float, None),
        gap=_get(cp, "tolerances", "gap", float, GAP_TOL),
        step_doubling=_get(cp, "tolerances", "step_doubling", float, None),
        cfl=_get(cp, "tolerances", "cfl", float, CFL_NUMBER),
    )

    cfg = ScenarioConfig(
        name=name,
        dim=dim,
        points=points,
        period=_get(cp, "grid", "period", float, DEFAULT_PERIOD),
        background=_get(cp, "background", "kind", str.strip, "constant"),
        rho0_mean=_get(cp, "background", "mean", float, 1.0),
        rho0_amplitude=_get(cp, "background", "amplitude", float, 0.0),
        rho0_mode=_get(cp, "background", "mode", ints, ()),
        rho0_file=_get(cp, "background", "file", str.strip, None),
        phi0=terms("initial", "phi0"),
        s0=terms("initial", "s0"),
        winding=_floats(cp.get("initial", "winding"), "[initial] winding") if cp.has_option("initial", "winding") else (),
        noise=_get(cp, "initial", "noise", float, 0.0),
        psi0_file=_get(cp, "initial", "psi0_file", str.strip, None),
        stream=terms("limit", "stream"),
        eps=_floats(cp.get("run", "eps"), "[run] eps") if cp.has_option("run", "eps") else (0.1,),
        alpha=_get(cp, "run", "alpha", float, 1.0),
        t_final=t_final,
        outputs=outputs,
        seed=_get(cp, "run", "seed", int, 0),
        dt_c1=_get(cp, "run", "dt_c1", float, DT_C1),
        dt_c2=_get(cp, "run", "dt_c2", float, DT_C2),
        limit_dt=_get(cp, "run", "limit_dt", float, LIMIT_DT),
        workers=_get(cp, "run", "workers", int, 1),
        tolerances=tol,
        retained=_get(cp, "modes", "retained", int, DEFAULT_RETAINED_MODES),
        truncation=_get(cp, "modes", "truncation", int, None),
        source=source,
        text=text,
    )
    validate(cfg)
    return cfg


def resolve_scenario_path(name_or_path: str, scenarios_dir: Optional[Path] = None) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    base = Path(scenarios_dir) if scenarios_dir else SCENARIOS_DIR
    for candidate in (base / name_or_path, base / f"{name_or_path}.ini", base / f"{p.name}.ini"):
        if candidate.exists():
            return candidate
    # bundled names stay resolvable when ANELASTIC_SCENARIOS_DIR points elsewhere
    stem = p.name[:-4] if p.name.endswith(".ini") else p.name
    if stem in BUNDLED_SCENARIOS and (BUNDLED_DIR / f"{stem}.ini").exists():
        return BUNDLED_DIR / f"{stem}.ini"
    raise ScenarioConfigError(f"scenario not found: {name_or_path} (looked in {base})")


def load_scenario(name_or_path: str, scenarios_dir: Optional[Path] = None) -> ScenarioConfig:
    path = resolve_scenario_path(name_or_path, scenarios_dir)
    text = path.read_text()
    return parse_scenario(text, name=path.stem, source=str(path))


def bundled_scenarios(scenarios_dir: Optional[Path] = None) -> List[str]:
    base = Path(scenarios_dir) if scenarios_dir else SCENARIOS_DIR
    return sorted(set(BUNDLED_SCENARIOS) | {p.stem for p in base.glob("*.ini")})
