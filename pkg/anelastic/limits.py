# anelastic/limits.py
"""
The two eps-independent limit systems.

Anelastic Euler:   d_t(rho0 v) + H[div(rho0 v (x) v)] = 0,  div(rho0 v) = 0,
                   rho0 grad pi = -(I - H) div(rho0 v (x) v)
Oscillating part:  d_t V0 + Q1(v, V0) + Q2(V0, V0) = 0   (eigencoordinates)

Both are advanced with classical RK4; the momentum is re-projected after each
full step, not per stage.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .constants import CFL_NUMBER, LIMIT_DT, LIMIT_SERIES_COLUMNS
from .errors import CFLViolation, EigenError, GridError
from .fastwave import (
    EigenSystem,
    FastWaveVector,
    ResonantForms,
    expand,
    q1_coeffs,
    q2_coeffs,
    resonant_forms,
)
from .gpe import InitialDataSpec, WaveState
from .helmholtz import WeightedHelmholtz, leray_project_array
from .hydro import observables
from .spectral import TorusField, TorusGrid

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AnelasticState:
    v: TorusField
    pi: TorusField
    time: float = 0.0

    @property
    def grid(self) -> TorusGrid:
        return self.v.grid

    @property
    def v_values(self) -> np.ndarray:
        return np.real(self.v.values)


@dataclass(frozen=True, eq=False)
class OscillatingState:
    """Eigencoordinates a^+ of V0 plus the zero-frequency mean of its scalar part."""

    coeffs: np.ndarray
    mean: float = 0.0
    time: float = 0.0

    @property
    def a_minus(self) -> np.ndarray:
        return np.conj(self.coeffs)

    def vector(self, grid: Optional[TorusGrid] = None) -> FastWaveVector:
        return FastWaveVector.from_coeffs(self.coeffs, self.mean, grid)

    def norm_sq(self, volume: float) -> float:
        return float(4.0 * np.sum(np.abs(self.coeffs) ** 2) + volume * self.mean ** 2)


@dataclass(frozen=True, eq=False)
class CoupledTrajectory:
    anelastic: List[AnelasticState]
    oscillating: List[OscillatingState]
    series: pd.DataFrame = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.anelastic])


# ---------------------------------------------------------------------------
# Anelastic system
# ---------------------------------------------------------------------------

def _flux_divergence(grid: TorusGrid, momentum: np.ndarray, v: np.ndarray) -> np.ndarray:
    """div(rho0 v (x) v) with dealiased products."""
    out = np.empty_like(momentum)
    for b in range(grid.dim):
        out[b] = grid.div(np.stack([grid.product(momentum[a], v[b]) for a in range(grid.dim)]))
    return out


def _momentum_rhs(momentum: np.ndarray, helmholtz: WeightedHelmholtz) -> np.ndarray:
    v = momentum / helmholtz.rho0
    sol, _, _, _, _ = helmholtz.project_array(_flux_divergence(helmholtz.grid, momentum, v))
    return -sol


def _pressure(v: np.ndarray, helmholtz: WeightedHelmholtz) -> np.ndarray:
    flux = _flux_divergence(helmholtz.grid, helmholtz.rho0 * v, v)
    _, _, psi, _, _ = helmholtz.project_array(flux)
    return -psi


def anelastic_state(v, helmholtz: WeightedHelmholtz, time: float = 0.0) -> AnelasticState:
    """Project rho0 v onto the weighted-divergence-free fields and attach pi."""
    grid = helmholtz.grid
    v = np.real(v.values) if isinstance(v, TorusField) else np.asarray(v, dtype=float)
    if v.shape != (grid.dim,) + grid.shape:
        raise GridError(f"velocity of shape {v.shape} does not fit grid {grid.shape}")
    sol, _, _, _, _ = helmholtz.project_array(helmholtz.rho0 * v)
    v = sol / helmholtz.rho0
    return AnelasticState(TorusField(grid, v), TorusField(grid, _pressure(v, helmholtz)), float(time))


def check_cfl(v: np.ndarray, grid: TorusGrid, dt: float, cfl: float = CFL_NUMBER) -> None:
    speed = float(np.max(np.sqrt(np.sum(v ** 2, axis=0))))
    if speed > 0 and abs(dt) > cfl * grid.spacing / speed:
        raise CFLViolation(
            f"dt={dt:.3e} exceeds CFL limit {cfl * grid.spacing / speed:.3e} (max |v|={speed:.3e})"
        )


def _rk4(y, h: float, rhs: Callable):
    k1 = rhs(y)
    k2 = rhs(_axpy(y, 0.5 * h, k1))
    k3 = rhs(_axpy(y, 0.5 * h, k2))
    k4 = rhs(_axpy(y, h, k3))
    return _combine(y, h, k1, k2, k3, k4)


def _axpy(y, a, k):
    if isinstance(y, tuple):
        return tuple(yi + a * ki for yi, ki in zip(y, k))
    return y + a * k


def _combine(y, h, k1, k2, k3, k4):
    if isinstance(y, tuple):
        return tuple(_combine(*parts) for parts in zip(y, [h] * len(y), k1, k2, k3, k4))
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def anelastic_step(
    state: AnelasticState,
    dt: float,
    helmholtz: WeightedHelmholtz,
    cfl: float = CFL_NUMBER,
) -> AnelasticState:
    grid = state.grid
    if helmholtz.grid != grid:
        raise GridError("helmholtz solver bound to a different grid")
    v = state.v_values
    check_cfl(v, grid, dt, cfl)
    momentum = _rk4(helmholtz.rho0 * v, dt, lambda m: _momentum_rhs(m, helmholtz))
    sol, _, _, _, _ = helmholtz.project_array(momentum)
    v_new = sol / helmholtz.rho0
    return AnelasticState(TorusField(grid, v_new), TorusField(grid, _pressure(v_new, helmholtz)), state.time + dt)


def _output_schedule(t0: float, t_final: float, outputs: Optional[Sequence[float]]) -> List[float]:
    times = sorted(float(t) for t in (outputs or []) if t > t0)
    if not times or times[-1] < t_final:
        times.append(float(t_final))
    return times


def evolve_anelastic(
    state: AnelasticState,
    t_final: float,
    helmholtz: WeightedHelmholtz,
    dt: float = LIMIT_DT,
    outputs: Optional[Sequence[float]] = None,
    cfl: float = CFL_NUMBER,
) -> List[AnelasticState]:
    """Snapshots at every output time (the initial state first)."""
    snaps = [state]
    for target in _output_schedule(state.time, t_final, outputs):
        while target - state.time > 1e-13 * max(1.0, abs(target)):
            state = anelastic_step(state, min(dt, target - state.time), helmholtz, cfl)
        state = AnelasticState(state.v, state.pi, target)
        snaps.append(state)
    return snaps


def kinetic_energy(state: AnelasticState, rho0: np.ndarray) -> float:
    return 0.5 * float(state.grid.integrate(rho0 * np.sum(state.v_values ** 2, axis=0)))


def weighted_div_norm(state: AnelasticState, rho0: np.ndarray) -> float:
    return state.grid.norm(state.grid.div(rho0 * state.v_values))


# ---------------------------------------------------------------------------
# Constant-density oracle: incompressible Euler with the Leray multiplier
# ---------------------------------------------------------------------------

def euler_leray_step(v: np.ndarray, dt: float, grid: TorusGrid) -> np.ndarray:
    def rhs(u):
        return -leray_project_array(grid, _flux_divergence(grid, u, u))

    return leray_project_array(grid, _rk4(v, dt, rhs))


def evolve_euler_leray(v: np.ndarray, t_final: float, dt: float, grid: TorusGrid) -> np.ndarray:
    v = leray_project_array(grid, np.asarray(v, dtype=float))
    t = 0.0
    while t_final - t > 1e-13 * max(1.0, t_final):
        h = min(dt, t_final - t)
        v = euler_leray_step(v, h, grid)
        t += h
    return v


# ---------------------------------------------------------------------------
# Oscillating system
# ---------------------------------------------------------------------------

def _forms(eig: EigenSystem, forms: Optional[ResonantForms]) -> ResonantForms:
    forms = forms or resonant_forms(eig)
    if forms.eig is not eig:
        raise EigenError("resonant forms were built for a different eigensystem")
    return forms


def _oscillating_derivative(c: np.ndarray, mean: float, v: np.ndarray, forms: ResonantForms) -> np.ndarray:
    return -q1_coeffs(v, c, forms) - q2_coeffs(c, mean, c, mean, forms)


def oscillating_rhs(
    state: OscillatingState,
    v: AnelasticState,
    eig: EigenSystem,
    forms: Optional[ResonantForms] = None,
) -> np.ndarray:
    """d a^+/dt = -Q1(v, V0) - Q2(V0, V0) on the retained modes."""
    if state.coeffs.shape != (eig.size,):
        raise EigenError(f"state has {state.coeffs.shape[0]} modes, eigensystem has {eig.size}")
    if v.grid != eig.grid:
        raise EigenError("velocity and eigensystem live on different grids")
    return _oscillating_derivative(state.coeffs, state.mean, v.v_values, _forms(eig, forms))


def oscillating_step(
    state: OscillatingState,
    v: AnelasticState,
    dt: float,
    eig: EigenSystem,
    forms: Optional[ResonantForms] = None,
) -> OscillatingState:
    """RK4 with v frozen over the step. The mean mode is invariant."""
    if state.coeffs.shape != (eig.size,):
        raise EigenError(f"state has {state.coeffs.shape[0]} modes, eigensystem has {eig.size}")
    forms = _forms(eig, forms)
    u = v.v_values
    c = _rk4(state.coeffs, dt, lambda y: _oscillating_derivative(y, state.mean, u, forms))
    return OscillatingState(c, state.mean, state.time + dt)


# ---------------------------------------------------------------------------
# Coupled evolution
# ---------------------------------------------------------------------------

def _series_row(a: AnelasticState, o: OscillatingState, rho0: np.ndarray) -> dict:
    ke = kinetic_energy(a, rho0)
    v0 = o.norm_sq(a.grid.volume)
    return {
        "time": a.time,
        "kinetic_energy": ke,
        "div_norm": weighted_div_norm(a, rho0),
        "v0_norm_sq": v0,
        "combined_energy": ke + 0.5 * v0,
    }


def coupled_evolve(
    anelastic0: AnelasticState,
    oscillating0: OscillatingState,
    t_final: float,
    helmholtz: WeightedHelmholtz,
    eig: EigenSystem,
    dt: float = LIMIT_DT,
    outputs: Optional[Sequence[float]] = None,
    forms: Optional[ResonantForms] = None,
    cfl: float = CFL_NUMBER,
) -> CoupledTrajectory:
    """
    Joint RK4 on (rho0 v, a^+): v does not see V0, V0 is driven by the current v.
    Returns snapshots at t=0 and every output time with the energy series.
    """
    grid = anelastic0.grid
    if helmholtz.grid != grid or eig.grid != grid:
        raise GridError("anelastic state, helmholtz solver and eigensystem must share one grid")
    if oscillating0.coeffs.shape != (eig.size,):
        raise EigenError(f"state has {oscillating0.coeffs.shape[0]} modes, eigensystem has {eig.size}")
    forms = _forms(eig, forms)
    rho0 = helmholtz.rho0
    mean = oscillating0.mean

    def rhs(y: Tuple[np.ndarray, np.ndarray]):
        m, c = y
        v = m / rho0
        return _momentum_rhs(m, helmholtz), _oscillating_derivative(c, mean, v, forms)

    a, o = anelastic0, oscillating0
    snaps_a, snaps_o = [a], [o]
    m, c, t = rho0 * a.v_values, o.coeffs.copy(), a.time
    for target in _output_schedule(t, t_final, outputs):
        while target - t > 1e-13 * max(1.0, abs(target)):
            h = min(dt, target - t)
            check_cfl(m / rho0, grid, h, cfl)
            m, c = _rk4((m, c), h, rhs)
            m, _, _, _, _ = helmholtz.project_array(m)
            t += h
        v = m / rho0
        a = AnelasticState(TorusField(grid, v), TorusField(grid, _pressure(v, helmholtz)), target)
        o = OscillatingState(c.copy(), mean, target)
        t = target
        snaps_a.append(a)
        snaps_o.append(o)

    series = pd.DataFrame([_series_row(x, y, rho0) for x, y in zip(snaps_a, snaps_o)], columns=LIMIT_SERIES_COLUMNS)
    drift = series["v0_norm_sq"].max() - series["v0_norm_sq"].min()
    logger.info("coupled evolve to t=%.4g: ||V0||^2 drift %.3e", t_final, drift)
    return CoupledTrajectory(snaps_a, snaps_o, series)


# ---------------------------------------------------------------------------
# Limit initial data
# ---------------------------------------------------------------------------

def _initial_fastwave(phi0: np.ndarray, J0: np.ndarray, helmholtz: WeightedHelmholtz,
                      eig: EigenSystem) -> OscillatingState:
    grid = helmholtz.grid
    _, grad_part, _, _, _ = helmholtz.project_array(J0)
    V = FastWaveVector.from_grid(grid, phi0, grad_part / helmholtz.sqrt_rho0)
    Vc = expand(V, eig, tol=max(1e-8, 100 * helmholtz.tol))
    return OscillatingState(Vc.coeffs, Vc.mean, 0.0)


def stream_velocity(g: np.ndarray, grid: TorusGrid, rho0: np.ndarray) -> np.ndarray:
    """v = rho0^-1 grad_perp g = rho0^-1 (-d_y g, d_x g); weighted-divergence-free by construction."""
    if grid.dim != 2:
        raise GridError("stream-function velocities need dim=2")
    dg = grid.grad(g)
    return np.stack([-dg[1], dg[0]]) / rho0


def limit_initial_data(
    spec: InitialDataSpec,
    helmholtz: WeightedHelmholtz,
    eig: EigenSystem,
    stream: Optional[np.ndarray] = None,
) -> Tuple[AnelasticState, OscillatingState]:
    """
    From WKB data: J0 = rho0 (grad S0 + winding), v0 = H J0 / rho0 and
    V0(0) = (phi0, H_perp J0 / sqrt(rho0)). A stream function overrides v0.
    """
    grid = spec.grid
    rho0 = helmholtz.rho0
    drift = grid.grad(spec.s0_values()) + spec.winding_vector().reshape((grid.dim,) + (1,) * grid.dim)
    J0 = rho0 * drift
    osc = _initial_fastwave(spec.phi0_values(), J0, helmholtz, eig)
    v0 = stream_velocity(stream, grid, rho0) if stream is not None else J0 / rho0
    return anelastic_state(v0, helmholtz), osc


def limit_initial_data_from_wave(
    state: WaveState,
    helmholtz: WeightedHelmholtz,
    eig: EigenSystem,
) -> Tuple[AnelasticState, OscillatingState]:
    """Same construction with (phi, J) read off a wave function."""
    hydro = observables(state)
    J = np.real(hydro.J.values)
    osc = _initial_fastwave(hydro.phi.values[0], J, helmholtz, eig)
    return anelastic_state(J / helmholtz.rho0, helmholtz), osc
