# anelastic/models.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from .constants import TABLE_COLUMNS


@dataclass
class ModulatedEnergyReport:
    time: float
    H: float
    kineticPart: float
    fluctuationPart: float
    quantumPart: float
    currentPart: float
    W: float
    S: float
    densityError: float
    weakCurrentDefects: Tuple[float, ...]
    currentDefectL43: float
    currentDefectBound: float

    @property
    def H_regrouped(self) -> float:
        return self.quantumPart + self.currentPart + self.fluctuationPart

    def to_json(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "H": self.H,
            "kineticPart": self.kineticPart,
            "fluctuationPart": self.fluctuationPart,
            "quantumPart": self.quantumPart,
            "currentPart": self.currentPart,
            "W": self.W,
            "S": self.S,
            "densityError": self.densityError,
            "weakCurrentDefects": list(self.weakCurrentDefects),
            "currentDefectL43": self.currentDefectL43,
            "currentDefectBound": self.currentDefectBound,
        }


@dataclass
class ConvergenceRow:
    eps: float
    sup_density_error: Optional[float] = None
    max_weak_defect: Optional[float] = None
    H0: Optional[float] = None
    max_H: Optional[float] = None
    max_W: Optional[float] = None
    max_S: Optional[float] = None
    error: str = ""
    runtime: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.error

    def to_json(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "sup_density_error": self.sup_density_error,
            "max_weak_defect": self.max_weak_defect,
            "H0": self.H0,
            "max_H": self.max_H,
            "max_W": self.max_W,
            "max_S": self.max_S,
            "error": self.error,
            "runtime": self.runtime,
        }


@dataclass
class ConvergenceTable:
    """One row per eps of the sweep, in config order."""

    rows: List[ConvergenceRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_json() for r in self.rows], columns=TABLE_COLUMNS)

    def runtimes_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"eps": [r.eps for r in self.rows], "runtime": [r.runtime for r in self.rows]})

    def to_json(self) -> Dict[str, Any]:
        return {"rows": [r.to_json() for r in self.rows]}
