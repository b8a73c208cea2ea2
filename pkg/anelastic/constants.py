# anelastic/constants.py
from __future__ import annotations

import math

# ---------- grids ----------

DEFAULT_PERIOD = 2.0 * math.pi
SUPPORTED_DIMS = (1, 2)
MIN_POINTS = 8

# ---------- GPE time stepping ----------

DT_C1 = 1.0 / 16.0
DT_C2 = 0.25
MAX_STEPS = 2_000_000

# ---------- tolerances ----------

PROJECTION_TOL = 1e-10
PROJECTION_MAXITER = 500
HERMITIAN_TOL = 1e-12
EIGEN_RESIDUAL_TOL = 1e-9
CLUSTER_REL_TOL = 1e-8
RESONANCE_REL_TOL = 1e-8
GAP_TOL = 1e-3
GRADIENT_TYPE_TOL = 1e-8
WEIGHTED_DIV_TOL = 1e-8
WINDING_TOL = 1e-9
TIME_MATCH_TOL = 1e-12
CFL_NUMBER = 0.5

# ---------- mode truncation / limit systems ----------

DEFAULT_RETAINED_MODES = 40
LIMIT_DT = 1e-3

# Weak test basis: nine lowest Fourier modes (per dimension count).
WEAK_MODES = {
    1: tuple((k,) for k in range(-4, 5)),
    2: tuple((kx, ky) for kx in (-1, 0, 1) for ky in (-1, 0, 1)),
}

# ---------- CSV schemas ----------

CSV_FLOAT_FORMAT = "%.17g"

MODENERGY_COLUMNS = [
    "eps",
    "time",
    "H",
    "kineticPart",
    "fluctuationPart",
    "quantumPart",
    "W",
    "S",
    "densityError",
] + [f"defect_mode_{i}" for i in range(1, 10)]

LIMIT_SERIES_COLUMNS = ["time", "kinetic_energy", "div_norm", "v0_norm_sq", "combined_energy"]

SPECTRUM_COLUMNS = ["index", "kappa", "cluster_id"]

RESONANCE_COLUMNS = ["j", "l", "m", "signs", "defect"]

TABLE_COLUMNS = [
    "eps",
    "sup_density_error",
    "max_weak_defect",
    "H0",
    "max_H",
    "max_W",
    "max_S",
    "error",
]

# ---------- scenarios ----------

BUNDLED_SCENARIOS = (
    "wellprep-1d",
    "illprep-1d",
    "cosine-rho0-1d",
    "const-rho0-2d-euler",
)
