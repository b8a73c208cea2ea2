# anelastic/hydro.py
"""Hydrodynamic observables of a WaveState and the local conservation laws."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from .constants import WEAK_MODES
from .errors import GridError, SnapshotError
from .gpe import WaveState
from .helmholtz import WeightedHelmholtz
from .spectral import TorusField, TorusGrid, check_positive

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HydroState:
    rho: TorusField
    J: TorusField
    e: TorusField
    phi: TorusField
    rho0: TorusField
    time: float
    eps: float
    alpha: float

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid


@dataclass(frozen=True, eq=False)
class DispersiveForms:
    """The three equivalent evaluations of the quantum-pressure force."""

    log_form: TorusField     # 1/4 div(rho Hess log rho)
    sqrt_form: TorusField    # 1/2 rho grad(Lap sqrt(rho) / sqrt(rho))
    split_form: TorusField   # 1/4 grad Lap rho - div(grad sqrt(rho) (x) grad sqrt(rho))

    def max_disagreement(self) -> float:
        a, b, c = self.log_form.values, self.sqrt_form.values, self.split_form.values
        return float(max(np.max(np.abs(a - b)), np.max(np.abs(a - c)), np.max(np.abs(b - c))))


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def _current(grid: TorusGrid, psi: np.ndarray, hbar: float, dpsi: np.ndarray | None = None) -> np.ndarray:
    if dpsi is None:
        dpsi = grid.grad(psi)
    return hbar * np.imag(np.conj(psi)[None] * dpsi)


def observables(state: WaveState) -> HydroState:
    grid = state.grid
    psi = state.psi_values
    rho0 = state.rho0_values
    hbar = state.hbar
    dpsi = grid.grad(psi)
    rho = np.abs(psi) ** 2
    J = _current(grid, psi, hbar, dpsi)
    e = 0.5 * hbar ** 2 * np.sum(np.abs(dpsi) ** 2, axis=0) + 0.5 * (rho - rho0) ** 2 / state.eps ** 2
    phi = (rho - rho0) / state.eps
    return HydroState(
        rho=TorusField(grid, rho),
        J=TorusField(grid, J),
        e=TorusField(grid, e),
        phi=TorusField(grid, phi),
        rho0=state.rho0,
        time=state.time,
        eps=state.eps,
        alpha=state.alpha,
    )


# ---------------------------------------------------------------------------
# Dispersive term
# ---------------------------------------------------------------------------

def _div_tensor(grid: TorusGrid, T: np.ndarray) -> np.ndarray:
    """(div T)_b = sum_a d_a T_ab."""
    return np.stack([grid.div(T[:, b]) for b in range(grid.dim)])


def dispersive_term(rho: TorusField) -> DispersiveForms:
    grid = rho.grid
    r = check_positive(rho, "rho")
    s = np.sqrt(r)

    log_form = 0.25 * _div_tensor(grid, r[None, None] * grid.hessian(np.log(r)))
    sqrt_form = 0.5 * r[None] * grid.grad(grid.lap(s) / s)
    ds = grid.grad(s)
    outer = ds[:, None] * ds[None, :]
    split_form = 0.25 * grid.grad(grid.lap(r)) - _div_tensor(grid, outer)

    return DispersiveForms(
        TorusField(grid, log_form),
        TorusField(grid, sqrt_form),
        TorusField(grid, split_form),
    )


# ---------------------------------------------------------------------------
# Weak residuals of the conservation laws
# ---------------------------------------------------------------------------

def weak_pairings(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    """<a, e^{ik.x}> over the nine-mode test basis; last axis = mode."""
    c = grid.fft(a) * grid.volume
    idx = [grid.index_of(m) for m in WEAK_MODES[grid.dim]]
    return np.stack([c[(Ellipsis,) + i] for i in idx], axis=-1)


def _momentum_flux_divergence(state: WaveState, form: str) -> np.ndarray:
    """div(flux) + source of the momentum law, so that d_t J + this = 0."""
    grid = state.grid
    psi = state.psi_values
    rho0 = state.rho0_values
    hbar = state.hbar
    rho = np.abs(psi) ** 2
    dpsi = grid.grad(psi)
    source = rho[None] * grid.grad(rho - rho0) / state.eps ** 2
    if form == "wavefunction":
        stress = hbar ** 2 * np.real(dpsi[:, None] * np.conj(dpsi)[None, :]) - 0.25 * hbar ** 2 * grid.hessian(rho)
        return _div_tensor(grid, stress) + source
    if form == "madelung":
        r = check_positive(rho, "rho")
        J = _current(grid, psi, hbar, dpsi)
        convective = _div_tensor(grid, J[:, None] * J[None, :] / r)
        quantum = 0.25 * hbar ** 2 * _div_tensor(grid, r[None, None] * grid.hessian(np.log(r)))
        return convective + source - quantum
    raise ValueError(f"unknown momentum form {form!r}")


def _energy_flux_divergence(state: WaveState) -> np.ndarray:
    grid = state.grid
    psi = state.psi_values
    hbar = state.hbar
    dpsi = grid.grad(psi)
    potential = (np.abs(psi) ** 2 - state.rho0_values) / state.eps ** (2 + state.alpha)
    psi_t = 0.5j * hbar * grid.lap(psi) - 1j * potential * psi
    flux = hbar ** 2 * np.real(dpsi * np.conj(psi_t)[None])
    return -grid.div(flux)


def _energy_density(state: WaveState) -> np.ndarray:
    grid = state.grid
    psi = state.psi_values
    dpsi = grid.grad(psi)
    rho = np.abs(psi) ** 2
    return 0.5 * state.hbar ** 2 * np.sum(np.abs(dpsi) ** 2, axis=0) + 0.5 * (rho - state.rho0_values) ** 2 / state.eps ** 2


def conservation_residuals(
    trajectory: Sequence[WaveState],
    energy: bool = False,
    momentum_form: str = "wavefunction",
) -> pd.DataFrame:
    """
    Weak residuals at every interior snapshot: centered differences in time,
    spectral derivatives in space, paired with the nine lowest Fourier modes.
    Each reported value is the max over test modes (and components).
    """
    if len(trajectory) < 3:
        raise SnapshotError(f"need at least 3 snapshots, got {len(trajectory)}")
    grid = trajectory[0].grid
    if any(s.grid != grid for s in trajectory):
        raise GridError("trajectory mixes grids")

    rho_p = [weak_pairings(grid, np.abs(s.psi_values) ** 2) for s in trajectory]
    J_p = [weak_pairings(grid, _current(grid, s.psi_values, s.hbar)) for s in trajectory]
    e_p = [weak_pairings(grid, _energy_density(s)) for s in trajectory] if energy else None

    rows: List[dict] = []
    for n in range(1, len(trajectory) - 1):
        state = trajectory[n]
        span = trajectory[n + 1].time - trajectory[n - 1].time
        if not span > 0:
            raise SnapshotError("snapshot times must be strictly increasing")
        J = _current(grid, state.psi_values, state.hbar)

        mass = (rho_p[n + 1] - rho_p[n - 1]) / span + weak_pairings(grid, grid.div(J))
        mom = (J_p[n + 1] - J_p[n - 1]) / span + weak_pairings(grid, _momentum_flux_divergence(state, momentum_form))
        row = {
            "time": state.time,
            "residual_mass": float(np.max(np.abs(mass))),
            "residual_momentum": float(np.max(np.sqrt(np.sum(np.abs(mom) ** 2, axis=0)))),
        }
        if energy:
            en = (e_p[n + 1] - e_p[n - 1]) / span + weak_pairings(grid, _energy_flux_divergence(state))
            row["residual_energy"] = float(np.max(np.abs(en)))
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Fast-wave forcing
# ---------------------------------------------------------------------------

def fastwave_forcing(state: WaveState, helmholtz: WeightedHelmholtz) -> TorusField:
    """
    F = -(eps^2a/2) H_perp div(grad psi (x) grad conj(psi) + c.c.)
        - 1/2 H_perp grad(phi^2) + (eps^2a/4) H_perp grad Lap rho.
    The three terms are summed before a single (linear) projection.
    """
    grid = state.grid
    if helmholtz.grid != grid:
        raise GridError("helmholtz solver bound to a different grid")
    psi = state.psi_values
    hbar = state.hbar
    rho = np.abs(psi) ** 2
    phi = (rho - state.rho0_values) / state.eps
    dpsi = grid.grad(psi)
    tensor = 2.0 * np.real(dpsi[:, None] * np.conj(dpsi)[None, :])
    raw = (
        -0.5 * hbar ** 2 * _div_tensor(grid, tensor)
        - 0.5 * grid.grad(phi ** 2)
        + 0.25 * hbar ** 2 * grid.grad(grid.lap(rho))
    )
    _, grad_part, _, _, _ = helmholtz.project_array(raw)
    return TorusField(grid, grad_part)
