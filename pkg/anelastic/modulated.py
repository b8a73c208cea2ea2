# anelastic/modulated.py
"""
Modulated energy of a GPE state against the limit pair (v, V0):

    varpi = v + L2(t/eps) V0 / sqrt(rho0)
    H     = 1/2 int |eps^a grad psi - i varpi psi|^2 + 1/2 int |phi - L1(t/eps) V0|^2
    W     = -1/2 int (rho - rho0) |varpi|^2
    S     = -int (|v|^2/2 - pi) (rho - rho0)

and the sweep functionals built from it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from .constants import MODENERGY_COLUMNS, TIME_MATCH_TOL, WEAK_MODES
from .errors import GridError, SnapshotError, TimeMismatch
from .fastwave import EigenSystem, reconstruct, wave_group
from .gpe import WaveState
from .hydro import weak_pairings
from .limits import AnelasticState, CoupledTrajectory, OscillatingState
from .models import ModulatedEnergyReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConvergenceSeries:
    eps: float
    series: pd.DataFrame = field(repr=False)
    reports: List[ModulatedEnergyReport] = field(repr=False)
    integrated_defects: np.ndarray = field(repr=False)

    def summary(self) -> Dict[str, float]:
        s = self.series
        return {
            "sup_density_error": float(s["densityError"].max()),
            "max_weak_defect": float(self.integrated_defects[-1].max()),
            "H0": float(s["H"].iloc[0]),
            "max_H": float(s["H"].max()),
            "max_W": float(s["W"].abs().max()),
            "max_S": float(s["S"].abs().max()),
        }


def _check_times(*times: float, tol: float = TIME_MATCH_TOL) -> float:
    t0 = times[0]
    for t in times[1:]:
        if abs(t - t0) > tol * max(1.0, abs(t0)):
            raise TimeMismatch(f"inputs are at different times: {', '.join(f'{x:.15g}' for x in times)}")
    return float(t0)


def modulated_velocity(v: AnelasticState, V0: OscillatingState, eig: EigenSystem, t: float, eps: float):
    """(varpi, L1(t/eps)V0) on the grid."""
    L = reconstruct(wave_group(V0.vector(eig.grid), t / eps, eig), eig)
    return v.v_values + L.vector / eig.sqrt_rho0, L.scalar


def modulated_energy(
    wave: WaveState,
    v: AnelasticState,
    V0: OscillatingState,
    eig: EigenSystem,
    tol: float = TIME_MATCH_TOL,
) -> ModulatedEnergyReport:
    t = _check_times(wave.time, v.time, V0.time, tol=tol)
    grid = wave.grid
    if v.grid != grid or eig.grid != grid:
        raise GridError("wave state, anelastic state and eigensystem must share one grid")

    psi = wave.psi_values
    rho0 = wave.rho0_values
    hbar = wave.hbar
    eps = wave.eps
    varpi, L1 = modulated_velocity(v, V0, eig, t, eps)

    dpsi = grid.grad(psi)
    rho = np.abs(psi) ** 2
    phi = (rho - rho0) / eps

    covariant = hbar * dpsi - 1j * varpi * psi[None]
    kinetic = 0.5 * grid.integrate(np.sum(np.abs(covariant) ** 2, axis=0))
    fluct = 0.5 * grid.integrate((phi - L1) ** 2)

    # amplitude/phase split; grad|psi| = Re(conj(psi) grad psi)/|psi| pointwise
    J = hbar * np.imag(np.conj(psi)[None] * dpsi)
    amp_flux = np.real(np.conj(psi)[None] * dpsi)
    safe = np.where(rho > 0, rho, 1.0)
    quantum = 0.5 * hbar ** 2 * grid.integrate(np.where(rho > 0, np.sum(amp_flux ** 2, axis=0) / safe, 0.0))
    slip = J - rho[None] * varpi
    current = 0.5 * grid.integrate(np.where(rho > 0, np.sum(slip ** 2, axis=0) / safe, 0.0))

    drho = rho - rho0
    W = -0.5 * grid.integrate(drho * np.sum(varpi ** 2, axis=0))
    vv = v.v_values
    S = -grid.integrate((0.5 * np.sum(vv ** 2, axis=0) - np.real(v.pi.values[0])) * drho)

    defect = weak_pairings(grid, J - rho0[None] * vv)
    weak = tuple(float(x) for x in np.sqrt(np.sum(np.abs(defect) ** 2, axis=0)))

    l43 = grid.lp_norm(J - rho0[None] * varpi, 4.0 / 3.0)
    sqrt_rho = np.sqrt(rho)
    bound = (
        grid.lp_norm(sqrt_rho, 4.0) * grid.norm(np.where(rho > 0, slip / np.sqrt(safe)[None], 0.0))
        + grid.norm(drho) * grid.lp_norm(varpi, 4.0)
    )

    return ModulatedEnergyReport(
        time=t,
        H=float(kinetic + fluct),
        kineticPart=float(kinetic),
        fluctuationPart=float(fluct),
        quantumPart=float(quantum),
        currentPart=float(current),
        W=float(W),
        S=float(S),
        densityError=grid.norm(drho),
        weakCurrentDefects=weak,
        currentDefectL43=float(l43),
        currentDefectBound=float(bound),
    )


def _aligned(gpe: Sequence[WaveState], limit: CoupledTrajectory) -> None:
    if len(gpe) != len(limit.anelastic):
        raise SnapshotError(f"GPE trajectory has {len(gpe)} snapshots, limit trajectory {len(limit.anelastic)}")
    for w, a in zip(gpe, limit.anelastic):
        if abs(w.time - a.time) > TIME_MATCH_TOL * max(1.0, abs(w.time)):
            raise SnapshotError(f"snapshot times differ: GPE t={w.time:.15g}, limit t={a.time:.15g}")


def convergence_functionals(
    gpe: Sequence[WaveState],
    limit: CoupledTrajectory,
    eig: EigenSystem,
) -> ConvergenceSeries:
    """
    Per snapshot: the modulated energy report. The defect_mode_* columns hold
    |int_0^t int (J - rho0 v) . e_k dx ds| by the trapezoid rule on snapshots.
    """
    if not gpe:
        raise SnapshotError("empty trajectory")
    _aligned(gpe, limit)
    grid = gpe[0].grid
    eps = gpe[0].eps
    reports = [modulated_energy(w, a, o, eig) for w, a, o in zip(gpe, limit.anelastic, limit.oscillating)]

    times = np.array([w.time for w in gpe])
    pairings = np.stack(
        [weak_pairings(grid, d) for d in _current_defects(gpe, limit.anelastic)]
    )  # (T, dim, 9)
    integrated = np.zeros((len(times), len(WEAK_MODES[grid.dim])))
    for n in range(1, len(times)):
        running = np.trapezoid(pairings[: n + 1], times[: n + 1], axis=0)
        integrated[n] = np.sqrt(np.sum(np.abs(running) ** 2, axis=0))

    rows = []
    for r, defects in zip(reports, integrated):
        row = {
            "eps": eps,
            "time": r.time,
            "H": r.H,
            "kineticPart": r.kineticPart,
            "fluctuationPart": r.fluctuationPart,
            "quantumPart": r.quantumPart,
            "W": r.W,
            "S": r.S,
            "densityError": r.densityError,
        }
        row.update({f"defect_mode_{i + 1}": float(d) for i, d in enumerate(defects)})
        rows.append(row)
    series = pd.DataFrame(rows, columns=MODENERGY_COLUMNS)
    logger.info("eps=%g: sup density error %.3e, max H %.3e", eps, series["densityError"].max(), series["H"].max())
    return ConvergenceSeries(eps, series, reports, integrated)


def _current_defects(gpe: Sequence[WaveState], anelastic: Sequence[AnelasticState]):
    for w, a in zip(gpe, anelastic):
        grid = w.grid
        psi = w.psi_values
        J = w.hbar * np.imag(np.conj(psi)[None] * grid.grad(psi))
        yield J - w.rho0_values[None] * a.v_values
