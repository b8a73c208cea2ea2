# anelastic/snapshots.py
"""
Field snapshots as CSV (flattened row-major samples) plus a JSON header.

    <stem>.csv   index, c0[, c1]            (real fields)
                 index, c0_re, c0_im, ...   (complex fields)
    <stem>.json  {"kind", "grid": {dim, points, period}, "components", "real", ...}
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .constants import CSV_FLOAT_FORMAT
from .errors import GridError
from .gpe import WaveState
from .spectral import TorusField, TorusGrid

PathLike = Union[str, Path]


def _stem(path: PathLike) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".csv", ".json") else p


def _grid_json(grid: TorusGrid) -> Dict[str, Any]:
    return {"dim": grid.dim, "points": grid.points, "period": grid.period}


def _field_columns(field: TorusField) -> Dict[str, np.ndarray]:
    cols: Dict[str, np.ndarray] = {}
    for c in range(field.components):
        flat = field.values[c].ravel()
        if field.real:
            cols[f"c{c}"] = flat
        else:
            cols[f"c{c}_re"] = flat.real
            cols[f"c{c}_im"] = flat.imag
    return cols


def write_field(field: TorusField, path: PathLike, kind: str = "field", extra: Optional[Dict[str, Any]] = None) -> Path:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame({"index": np.arange(field.grid.size), **_field_columns(field)})
    df.to_csv(stem.with_suffix(".csv"), index=False, float_format=CSV_FLOAT_FORMAT)
    header = {
        "kind": kind,
        "grid": _grid_json(field.grid),
        "components": field.components,
        "real": field.real,
        **(extra or {}),
    }
    stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))
    return stem


def _read_header(stem: Path) -> Dict[str, Any]:
    return json.loads(stem.with_suffix(".json").read_text())


def _grid_from_header(header: Dict[str, Any]) -> TorusGrid:
    g = header["grid"]
    return TorusGrid(int(g["dim"]), int(g["points"]), float(g["period"]))


def _values_from_frame(df: pd.DataFrame, grid: TorusGrid, components: int, real: bool, prefix: str = "c") -> np.ndarray:
    if len(df) != grid.size:
        raise GridError(f"snapshot has {len(df)} rows, grid expects {grid.size}")
    df = df.sort_values("index")
    out = []
    for c in range(components):
        if real:
            arr = df[f"{prefix}{c}"].to_numpy(dtype=float)
        else:
            arr = df[f"{prefix}{c}_re"].to_numpy(dtype=float) + 1j * df[f"{prefix}{c}_im"].to_numpy(dtype=float)
        out.append(arr.reshape(grid.shape))
    return np.stack(out)


def read_field(path: PathLike) -> Tuple[TorusField, Dict[str, Any]]:
    stem = _stem(path)
    header = _read_header(stem)
    grid = _grid_from_header(header)
    df = pd.read_csv(stem.with_suffix(".csv"))
    real = bool(header.get("real", True))
    values = _values_from_frame(df, grid, int(header["components"]), real)
    return TorusField(grid, values, real), header


def write_wave_state(state: WaveState, path: PathLike) -> Path:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    psi = state.psi_values.ravel()
    df = pd.DataFrame(
        {
            "index": np.arange(state.grid.size),
            "re": psi.real,
            "im": psi.imag,
            "rho0": state.rho0_values.ravel(),
        }
    )
    df.to_csv(stem.with_suffix(".csv"), index=False, float_format=CSV_FLOAT_FORMAT)
    header = {
        "kind": "wave_state",
        "grid": _grid_json(state.grid),
        "eps": state.eps,
        "alpha": state.alpha,
        "time": state.time,
    }
    stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))
    return stem


def read_wave_state(path: PathLike) -> WaveState:
    stem = _stem(path)
    header = _read_header(stem)
    if header.get("kind") != "wave_state":
        raise GridError(f"{stem} is not a wave_state snapshot (kind={header.get('kind')})")
    grid = _grid_from_header(header)
    df = pd.read_csv(stem.with_suffix(".csv")).sort_values("index")
    if len(df) != grid.size:
        raise GridError(f"snapshot has {len(df)} rows, grid expects {grid.size}")
    psi = (df["re"].to_numpy(dtype=float) + 1j * df["im"].to_numpy(dtype=float)).reshape(grid.shape)
    rho0 = df["rho0"].to_numpy(dtype=float).reshape(grid.shape)
    return WaveState(
        TorusField(grid, psi, real=False),
        float(header["eps"]),
        float(header["alpha"]),
        TorusField(grid, rho0),
        float(header["time"]),
    )


def read_psi_csv(path: PathLike, grid: TorusGrid) -> TorusField:
    """Raw psi0 file: columns re, im in row-major order."""
    df = pd.read_csv(path)
    missing = {"re", "im"} - set(df.columns)
    if missing:
        raise GridError(f"{path}: missing columns {sorted(missing)}")
    if len(df) != grid.size:
        raise GridError(f"{path}: {len(df)} rows, grid expects {grid.size}")
    psi = df["re"].to_numpy(dtype=float) + 1j * df["im"].to_numpy(dtype=float)
    return TorusField(grid, psi.reshape(grid.shape), real=False)
