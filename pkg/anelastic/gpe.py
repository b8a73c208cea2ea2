# anelastic/gpe.py
"""
Scaled Gross-Pitaevskii equation on the torus,

    i d_t psi = -(eps^alpha / 2) Lap psi + eps^-(2+alpha) (|psi|^2 - rho0) psi,

integrated by Strang splitting. Both sub-flows are exact: the kinetic one is
a unimodular spectral multiplier, the potential one a pointwise phase (|psi|
does not change under it).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .constants import DT_C1, DT_C2, MAX_STEPS, WINDING_TOL
from .errors import GridError, StepBudgetExceeded, WindingError
from .spectral import TorusField, TorusGrid, check_positive

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WaveState:
    psi: TorusField
    eps: float
    alpha: float
    rho0: TorusField
    time: float = 0.0

    def __post_init__(self):
        if not self.eps > 0 or not self.alpha > 0:
            raise ValueError(f"eps and alpha must be positive (eps={self.eps}, alpha={self.alpha})")
        if self.psi.grid != self.rho0.grid:
            raise GridError("psi and rho0 live on different grids")
        self.psi.require_components(1, "psi")
        self.rho0.require_components(1, "rho0")
        check_positive(self.rho0)

    @property
    def grid(self) -> TorusGrid:
        return self.psi.grid

    @property
    def psi_values(self) -> np.ndarray:
        return self.psi.values[0]

    @property
    def rho0_values(self) -> np.ndarray:
        return self.rho0.values[0]

    @property
    def hbar(self) -> float:
        return self.eps ** self.alpha

    def with_psi(self, psi: np.ndarray, time: float) -> "WaveState":
        return replace(self, psi=TorusField(self.grid, psi, real=False), time=float(time))


@dataclass(frozen=True, eq=False)
class InitialDataSpec:
    """WKB data (rho0, phi0, S0, winding) or a raw psi0 field."""

    rho0: TorusField
    phi0: Optional[TorusField] = None
    s0: Optional[TorusField] = None
    winding: Tuple[float, ...] = ()
    psi0: Optional[TorusField] = None

    def __post_init__(self):
        check_positive(self.rho0)
        for f in (self.phi0, self.s0, self.psi0):
            if f is not None and f.grid != self.rho0.grid:
                raise GridError("initial data fields live on different grids")
        if self.winding and len(self.winding) != self.rho0.grid.dim:
            raise GridError(f"winding {self.winding} does not match dim={self.rho0.grid.dim}")

    @property
    def grid(self) -> TorusGrid:
        return self.rho0.grid

    def phi0_values(self) -> np.ndarray:
        return np.zeros(self.grid.shape) if self.phi0 is None else self.phi0.values[0]

    def s0_values(self) -> np.ndarray:
        return np.zeros(self.grid.shape) if self.s0 is None else self.s0.values[0]

    def winding_vector(self) -> np.ndarray:
        return np.zeros(self.grid.dim) if not self.winding else np.asarray(self.winding, dtype=float)


@dataclass(frozen=True)
class ConservedQuantities:
    hamiltonian: float
    current: Tuple[float, ...]
    mass: float


# ---------------------------------------------------------------------------
# Initial data
# ---------------------------------------------------------------------------

def _check_winding(grid: TorusGrid, winding: np.ndarray, hbar: float) -> None:
    # total phase change across a period must be a multiple of 2 pi
    for d, w in enumerate(winding):
        turns = w * grid.period / (2.0 * np.pi * hbar)
        if abs(turns - round(turns)) > WINDING_TOL * max(1.0, abs(turns)):
            raise WindingError(
                f"winding[{d}]={w} gives {turns:.6g} phase turns per period at eps^alpha={hbar:.6g}; "
                "the wavefunction would not be single valued"
            )


def build_initial_state(spec: InitialDataSpec, eps: float, alpha: float) -> WaveState:
    grid = spec.grid
    if spec.psi0 is not None:
        return WaveState(spec.psi0, eps, alpha, spec.rho0, 0.0)

    hbar = eps ** alpha
    rho_eps = spec.rho0.values[0] + eps * spec.phi0_values()
    check_positive(rho_eps, "rho0 + eps*phi0")

    winding = spec.winding_vector()
    _check_winding(grid, winding, hbar)
    phase = spec.s0_values() + sum(w * x for w, x in zip(winding, grid.coordinates))
    psi = np.sqrt(rho_eps) * np.exp(1j * phase / hbar)
    return WaveState(TorusField(grid, psi, real=False), eps, alpha, spec.rho0, 0.0)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def default_time_step(grid: TorusGrid, eps: float, alpha: float, c1: float = DT_C1, c2: float = DT_C2) -> float:
    return min(c1 * eps ** 2, c2 / (eps ** alpha * grid.k_max_squared))


@dataclass
class _Propagator:
    """Strang step on raw arrays for a fixed dt; multipliers built once."""

    grid: TorusGrid
    rho0: np.ndarray
    eps: float
    alpha: float
    dt: float
    dealias: bool = False
    _half: np.ndarray = field(init=False, repr=False)
    _rate: float = field(init=False, repr=False)

    def __post_init__(self):
        self._half = np.exp(-1j * self.eps ** self.alpha * self.grid.k_squared * self.dt / 4.0)
        self._rate = self.dt / self.eps ** (2.0 + self.alpha)

    def step(self, psi: np.ndarray) -> np.ndarray:
        psi = self.grid.ifft(self._half * self.grid.fft(psi))
        psi = psi * np.exp(-1j * (np.abs(psi) ** 2 - self.rho0) * self._rate)
        c = self._half * self.grid.fft(psi)
        if self.dealias:
            c = c * self.grid.dealias_mask
        return self.grid.ifft(c)


def strang_step(state: WaveState, dt: float, dealias: bool = False) -> WaveState:
    """One Strang step. Negative dt integrates backwards (the scheme is symmetric)."""
    if dt == 0:
        raise ValueError("dt must be nonzero")
    prop = _Propagator(state.grid, state.rho0_values, state.eps, state.alpha, dt, dealias)
    return state.with_psi(prop.step(state.psi_values), state.time + dt)


def _resolve_outputs(state: WaveState, t_final: float, outputs: Optional[Sequence[float]]) -> List[float]:
    times = sorted(float(t) for t in (outputs or []))
    if any(t < state.time for t in times) or any(t > t_final for t in times):
        raise ValueError(f"output times must lie in [{state.time}, {t_final}]")
    if not times or times[-1] < t_final:
        times.append(float(t_final))
    return times


def evolve(
    state: WaveState,
    t_final: float,
    dt: Optional[float] = None,
    outputs: Optional[Sequence[float]] = None,
    tolerance: Optional[float] = None,
    max_steps: int = MAX_STEPS,
    dealias: bool = False,
    c1: float = DT_C1,
    c2: float = DT_C2,
) -> List[WaveState]:
    """
    Advance to every requested output time (t_final always included) and return
    the snapshots. Output times are hit with a final partial step, never
    interpolated. With `tolerance` set, step doubling controls dt.
    """
    if not t_final > state.time:
        raise ValueError(f"t_final={t_final} must exceed state.time={state.time}")
    dt_max = dt if dt is not None else default_time_step(state.grid, state.eps, state.alpha, c1, c2)
    if not dt_max > 0:
        raise ValueError("dt must be positive")
    times = _resolve_outputs(state, t_final, outputs)

    grid, rho0 = state.grid, state.rho0_values
    props = {}

    def propagator(h: float) -> _Propagator:
        if h not in props:
            if len(props) > 64:
                props.clear()
            props[h] = _Propagator(grid, rho0, state.eps, state.alpha, h, dealias)
        return props[h]

    psi = state.psi_values.copy()
    t = state.time
    h = dt_max
    steps = 0
    snapshots: List[WaveState] = []

    for target in times:
        while target - t > 1e-13 * max(1.0, abs(target)):
            if steps >= max_steps:
                raise StepBudgetExceeded(
                    f"step budget {max_steps} exhausted at t={t:.6g} (target {target:.6g}); "
                    "configuration looks unresolvably stiff"
                )
            step = min(h, target - t)
            if tolerance is None:
                psi = propagator(step).step(psi)
                t += step
                steps += 1
                continue

            # step doubling: one step vs two half steps
            big = propagator(step).step(psi)
            half = _Propagator(grid, rho0, state.eps, state.alpha, step / 2.0, dealias)
            small = half.step(half.step(psi))
            steps += 3
            err = grid.norm(big - small) / max(grid.norm(small), 1e-300)
            if err <= tolerance:
                psi = small
                t += step
                factor = 2.0 if err == 0 else min(2.0, 0.9 * (tolerance / err) ** (1.0 / 3.0))
                h = min(dt_max, max(step, h) * factor)
            else:
                h = step * max(0.2, 0.9 * (tolerance / err) ** (1.0 / 3.0))
                logger.debug("step rejected at t=%.6g err=%.3e, retry dt=%.3e", t, err, h)
        t = target
        snapshots.append(state.with_psi(psi.copy(), t))

    logger.debug("evolve: %d steps to t=%.6g (eps=%g)", steps, t, state.eps)
    return snapshots


# ---------------------------------------------------------------------------
# Conserved quantities
# ---------------------------------------------------------------------------

def conserved_quantities(state: WaveState) -> ConservedQuantities:
    """
    C1 Hamiltonian, C2 = (i eps^a/2) int (psi grad conj(psi) - conj(psi) grad psi)
    = +int J dx, C3 mass.
    """
    grid = state.grid
    psi = state.psi_values
    hbar = state.hbar
    dpsi = grid.grad(psi)
    rho = np.abs(psi) ** 2
    kinetic = hbar ** 2 * np.sum(np.abs(dpsi) ** 2, axis=0)
    potential = (rho - state.rho0_values) ** 2 / state.eps ** 2
    c1 = 0.5 * grid.integrate(kinetic + potential)
    current = hbar * np.imag(np.conj(psi)[None] * dpsi)
    c2 = tuple(float(grid.integrate(current[d])) for d in range(grid.dim))
    c3 = grid.integrate(rho)
    return ConservedQuantities(float(c1), c2, float(c3))
