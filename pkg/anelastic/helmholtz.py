# anelastic/helmholtz.py
"""
Weighted Helmholtz decomposition f = H f + rho0 grad Psi, orthogonal in the
inner product weighted by 1/rho0, where

    div(rho0 grad Psi) = div f,   int Psi = 0.

Psi is found by preconditioned CG on the zero-mean subspace (k = 0 and the
Nyquist modes are excluded from the Krylov space). The preconditioner is the
constant-coefficient inverse rho_bar^-1 (-Lap)^-1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .constants import PROJECTION_MAXITER, PROJECTION_TOL
from .errors import ConvergenceFailure, GridError
from .spectral import TorusField, TorusGrid, check_positive

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WeightedDecomposition:
    solenoidal: TorusField
    gradient_part: TorusField
    potential: TorusField
    residual: float
    iterations: int = 0


class WeightedHelmholtz:
    """Solver bound to one background rho0. Each call owns its CG workspace."""

    def __init__(self, rho0: TorusField, tol: float = PROJECTION_TOL, maxiter: int = PROJECTION_MAXITER):
        if not tol > 0:
            raise ValueError(f"tol must be positive, got {tol}")
        rho0.require_components(1, "rho0")
        self.grid: TorusGrid = rho0.grid
        self.rho0_field = rho0
        self.rho0 = check_positive(rho0).copy()
        self.sqrt_rho0 = np.sqrt(self.rho0)
        self.tol = float(tol)
        self.maxiter = int(maxiter)
        self.rho_bar = float(np.mean(self.rho0))
        self.contrast = float(self.rho0.max() / self.rho0.min())

        k2 = self.grid.k_squared
        self._active = k2 > 0
        inv = np.zeros_like(k2)
        inv[self._active] = 1.0 / (self.rho_bar * k2[self._active])
        self._inv_symbol = inv

    # ---------- operator pieces on flat arrays ----------

    def _restrict(self, a: np.ndarray) -> np.ndarray:
        return self.grid.ifft(self._active * self.grid.fft(a)).real

    def apply(self, x: np.ndarray) -> np.ndarray:
        """-div(rho0 grad x)."""
        return -self.grid.div(self.rho0 * self.grid.grad(x))

    def _matvec(self, flat: np.ndarray) -> np.ndarray:
        return self.apply(flat.reshape(self.grid.shape)).ravel()

    def _precondition(self, flat: np.ndarray) -> np.ndarray:
        c = self.grid.fft(flat.reshape(self.grid.shape))
        return self.grid.ifft(self._inv_symbol * c).real.ravel()

    # ---------- solves ----------

    def solve_array(self, f: np.ndarray) -> Tuple[np.ndarray, float, int]:
        """Potential for a vector array f; returns (Psi, residual L2, iterations)."""
        grid = self.grid
        if f.shape != (grid.dim,) + grid.shape:
            raise GridError(f"expected vector array of shape {(grid.dim,) + grid.shape}, got {f.shape}")
        source = self._restrict(grid.div(f))
        b = -source.ravel()
        b_norm = grid.norm(source)
        if b_norm == 0.0:
            return np.zeros(grid.shape), 0.0, 0

        n = grid.size
        op = LinearOperator((n, n), matvec=self._matvec, dtype=float)
        prec = LinearOperator((n, n), matvec=self._precondition, dtype=float)
        count = [0]

        def _count(_xk):
            count[0] += 1

        atol = self.tol * max(1.0, b_norm) / np.sqrt(grid.cell_volume)
        x, info = cg(op, b, rtol=0.0, atol=atol, maxiter=self.maxiter, M=prec, callback=_count)
        psi = self._restrict(x.reshape(grid.shape))
        residual = grid.norm(grid.div(self.rho0 * grid.grad(psi)) - source)
        if info > 0:
            raise ConvergenceFailure(count[0], residual, condition_estimate=self.contrast)
        if info < 0:
            raise ValueError(f"CG reported illegal input (info={info})")
        logger.debug("weighted Poisson: %d CG iterations, residual %.3e", count[0], residual)
        return psi, residual, count[0]

    def project_array(self, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float, int]:
        """(H f, H_perp f, Psi, residual, iterations) on raw arrays."""
        psi, residual, iterations = self.solve_array(f)
        grad_part = self.rho0 * self.grid.grad(psi)
        return f - grad_part, grad_part, psi, residual, iterations

    def solve_poisson(self, f: TorusField) -> TorusField:
        f.require_components(self.grid.dim, "weighted Poisson source")
        psi, _, _ = self.solve_array(np.real(f.values))
        return TorusField(self.grid, psi)

    def project(self, f: TorusField) -> WeightedDecomposition:
        if f.grid != self.grid:
            raise GridError("field and rho0 live on different grids")
        f.require_components(self.grid.dim, "projection input")
        sol, grad_part, psi, residual, iterations = self.project_array(np.real(f.values))
        return WeightedDecomposition(
            solenoidal=TorusField(self.grid, sol),
            gradient_part=TorusField(self.grid, grad_part),
            potential=TorusField(self.grid, psi),
            residual=residual,
            iterations=iterations,
        )

    def weighted_divergence(self, v: np.ndarray) -> np.ndarray:
        """div(rho0 v) for a vector array."""
        return self.grid.div(self.rho0 * v)


# ---------------------------------------------------------------------------
# Module-level entry points
# ---------------------------------------------------------------------------

def solve_weighted_poisson(f: TorusField, rho0: TorusField, tol: float = PROJECTION_TOL) -> TorusField:
    return WeightedHelmholtz(rho0, tol).solve_poisson(f)


def project(f: TorusField, rho0: TorusField, tol: float = PROJECTION_TOL) -> WeightedDecomposition:
    return WeightedHelmholtz(rho0, tol).project(f)


def leray_project_array(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Classical Leray projector, multiplier I - k k^T / |k|^2."""
    c = grid.fft(f)
    k = grid.wavenumbers
    k2 = grid.k_squared
    safe = np.where(k2 > 0, k2, 1.0)
    kdotc = np.sum(k * c, axis=0)
    c = c - k * np.where(k2 > 0, kdotc / safe, 0.0)
    out = grid.ifft(c)
    return out.real if not np.iscomplexobj(f) else out


def leray_project(f: TorusField) -> TorusField:
    f.require_components(f.grid.dim, "Leray projection input")
    return TorusField(f.grid, leray_project_array(f.grid, f.values), f.real)


def dense_weighted_poisson(f: TorusField, rho0: TorusField, max_size: int = 1024) -> TorusField:
    """Direct dense solve of the same discrete problem; small grids only."""
    grid = f.grid
    if grid.size > max_size:
        raise GridError(f"dense solve limited to {max_size} unknowns, grid has {grid.size}")
    solver = WeightedHelmholtz(rho0)
    n = grid.size
    matrix = np.empty((n, n))
    eye = np.eye(n)
    for j in range(n):
        matrix[:, j] = solver._matvec(eye[j])
    b = -grid.div(np.real(f.values)).ravel()
    # minimum-norm solution is orthogonal to the constants (and Nyquist) null space
    x, *_ = np.linalg.lstsq(matrix, b, rcond=None)
    return TorusField(grid, solver._restrict(x.reshape(grid.shape)))
