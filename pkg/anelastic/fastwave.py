# anelastic/fastwave.py
"""
Acoustic (fast-wave) machinery built on the eigenpairs of A = -div(rho0 grad .)
on zero-mean periodic functions.

Eigencoordinates of a fast-wave vector V = (phi, sqrt(rho0) grad w):

    p_j = <phi, chi_j>,  q_j = <vec, sqrt(rho0) grad chi_j> / sqrt(kappa_j)
    a_j^+ = (p_j - i q_j) / 2,   a_j^- = conj(a_j^+)

so that ||V||^2 = 4 sum |a_j^+|^2 + |T| mean(phi)^2 and the wave group acts
as a_j^+ -> a_j^+ exp(i omega_j tau), omega_j = sqrt(kappa_j). The spatial
mean of phi is carried separately as a zero-frequency mode.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from .constants import (
    CLUSTER_REL_TOL,
    DEFAULT_RETAINED_MODES,
    EIGEN_RESIDUAL_TOL,
    GAP_TOL,
    GRADIENT_TYPE_TOL,
    HERMITIAN_TOL,
    RESONANCE_COLUMNS,
    RESONANCE_REL_TOL,
    SPECTRUM_COLUMNS,
    WEIGHTED_DIV_TOL,
)
from .errors import ConstraintViolation, EigenError, GridError, NearResonanceWarning, ToleranceConflict
from .helmholtz import WeightedHelmholtz, leray_project_array
from .spectral import TorusField, TorusGrid, check_positive

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Operator assembly
# ---------------------------------------------------------------------------

def fourier_modes(grid: TorusGrid, truncation: int) -> np.ndarray:
    """Nonzero integer modes with |m| <= K, ordered by |m|^2 then lexicographically."""
    K = int(truncation)
    rng = range(-K, K + 1)
    grids = np.array(np.meshgrid(*([list(rng)] * grid.dim), indexing="ij")).reshape(grid.dim, -1).T
    norms = np.sum(grids ** 2, axis=1)
    keep = (norms > 0) & (norms <= K * K)
    modes = grids[keep]
    order = np.lexsort(tuple(modes[:, d] for d in reversed(range(grid.dim))) + (np.sum(modes ** 2, axis=1),))
    return modes[order]


def assemble_operator(rho0: TorusField, truncation: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Galerkin matrix A_{k,m} = (k.m) rho0_hat(k - m) on zero-mean modes |m| <= K.
    Returns (matrix, modes) with modes of shape (B, dim).
    """
    grid = rho0.grid
    r = check_positive(rho0)
    K = int(truncation)
    if K < 1:
        raise EigenError(f"truncation must be >= 1, got {K}")
    if 2 * K >= grid.points // 2:
        raise EigenError(
            f"truncation K={K} couples modes up to 2K={2 * K}, beyond the grid Nyquist {grid.points // 2}"
        )
    modes = fourier_modes(grid, K)
    rho_hat = grid.fft(r)
    scale = 2.0 * np.pi / grid.period
    k = modes * scale
    diff = (modes[:, None, :] - modes[None, :, :]) % grid.points
    coupling = rho_hat[tuple(diff[..., d] for d in range(grid.dim))]
    matrix = (k @ k.T) * coupling
    return matrix, modes


def _real_trig_basis(modes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Tuple[str, ...]]:
    """
    Unitary U taking real cos/sin coordinates to complex exponential ones.
    Returns (U, representative mode per real column, kind per column).
    """
    index = {tuple(m): i for i, m in enumerate(modes)}
    B = len(modes)
    U = np.zeros((B, B), dtype=complex)
    reps: List[Tuple[int, ...]] = []
    kinds: List[str] = []
    col = 0
    s = 1.0 / np.sqrt(2.0)
    for m in modes:
        m = tuple(int(x) for x in m)
        first = next(x for x in m if x != 0)
        if first < 0:
            continue
        i, j = index[m], index[tuple(-x for x in m)]
        U[i, col], U[j, col] = s, s
        U[i, col + 1], U[j, col + 1] = -1j * s, 1j * s
        reps.extend([m, m])
        kinds.extend(["cos", "sin"])
        col += 2
    return U, np.array(reps, dtype=int), tuple(kinds)


def cluster_ids(kappas: np.ndarray, rel_tol: float = CLUSTER_REL_TOL) -> np.ndarray:
    """Consecutive eigenvalues within rel_tol * (1 + kappa) share a cluster."""
    ids = np.zeros(len(kappas), dtype=int)
    for i in range(1, len(kappas)):
        same = abs(kappas[i] - kappas[i - 1]) <= rel_tol * (1.0 + abs(kappas[i - 1]))
        ids[i] = ids[i - 1] if same else ids[i - 1] + 1
    return ids


# ---------------------------------------------------------------------------
# Eigensystem
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenSystem:
    kappas: np.ndarray
    modes: np.ndarray
    cluster_ids: np.ndarray
    truncation: Optional[int] = None
    residuals: Optional[np.ndarray] = None
    cluster_rel_tol: float = CLUSTER_REL_TOL
    grid: Optional[TorusGrid] = None
    rho0: Optional[np.ndarray] = None
    basis_modes: Optional[np.ndarray] = None
    basis_kinds: Tuple[str, ...] = ()
    chi: Optional[np.ndarray] = field(default=None, repr=False)
    grad_chi: Optional[np.ndarray] = field(default=None, repr=False)
    hess_chi: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.kappas)

    @property
    def omegas(self) -> np.ndarray:
        return np.sqrt(np.clip(self.kappas, 0.0, None))

    @cached_property
    def sqrt_rho0(self) -> np.ndarray:
        return np.sqrt(self.rho0)

    @cached_property
    def neg_lap_chi(self) -> np.ndarray:
        return np.stack([-self.grid.lap(c) for c in self.chi])

    @property
    def clusters(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.cluster_ids == c) for c in np.unique(self.cluster_ids)]

    def require_grid(self) -> TorusGrid:
        if self.grid is None or self.chi is None:
            raise EigenError("eigensystem has no grid representation (built from a bare matrix)")
        return self.grid

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"index": np.arange(self.size), "kappa": self.kappas, "cluster_id": self.cluster_ids},
            columns=SPECTRUM_COLUMNS,
        )

    def modes_frame(self) -> pd.DataFrame:
        """Eigenvector coefficients in the real cos/sin basis, long format."""
        if self.basis_modes is None:
            raise EigenError("eigensystem has no basis description")
        rows = []
        dim = self.basis_modes.shape[1]
        axes = ["kx", "ky"][:dim]
        for j in range(self.size):
            for b, coef in enumerate(self.modes[:, j]):
                if abs(coef) < 1e-14:
                    continue
                row = {"index": j}
                row.update({a: int(self.basis_modes[b, d]) for d, a in enumerate(axes)})
                row["part"] = self.basis_kinds[b]
                row["coefficient"] = float(np.real(coef))
                rows.append(row)
        return pd.DataFrame(rows, columns=["index"] + axes + ["part", "coefficient"])


def _normalize_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        i = int(np.argmax(np.abs(col)))
        if abs(col[i]) > 0:
            out[:, j] = col * (np.abs(col[i]) / col[i])
    return out


def eigendecompose(
    matrix: np.ndarray,
    cluster_rel_tol: float = CLUSTER_REL_TOL,
    hermitian_tol: float = HERMITIAN_TOL,
) -> EigenSystem:
    """Full Hermitian eigendecomposition, eigenvalues ascending."""
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise EigenError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.linalg.norm(A)))
    skew = float(np.linalg.norm(A - A.conj().T))
    if skew > hermitian_tol * scale:
        raise EigenError(f"matrix is not Hermitian: ||A - A*|| = {skew:.3e}")
    H = 0.5 * (A + A.conj().T)
    if np.iscomplexobj(H) and np.max(np.abs(H.imag)) == 0.0:
        H = H.real
    kappas, vecs = scipy.linalg.eigh(H)
    vecs = _normalize_signs(vecs)
    residuals = np.linalg.norm(H @ vecs - vecs * kappas, axis=0)
    return EigenSystem(
        kappas=kappas,
        modes=vecs,
        cluster_ids=cluster_ids(kappas, cluster_rel_tol),
        residuals=residuals,
        cluster_rel_tol=cluster_rel_tol,
    )


def build_eigensystem(
    rho0: TorusField,
    retained: int = DEFAULT_RETAINED_MODES,
    truncation: Optional[int] = None,
    cluster_rel_tol: float = CLUSTER_REL_TOL,
    residual_tol: float = EIGEN_RESIDUAL_TOL,
) -> EigenSystem:
    """
    Lowest `retained` eigenpairs of A with grid samples of chi_j, grad chi_j and
    Hess chi_j. A cluster cut by the retention limit is kept whole.
    """
    grid = rho0.grid
    r = check_positive(rho0)
    K = int(truncation) if truncation is not None else grid.points // 4 - 1
    matrix, modes = assemble_operator(rho0, K)
    U, reps, kinds = _real_trig_basis(modes)
    real_matrix = U.conj().T @ matrix @ U
    if np.max(np.abs(real_matrix.imag)) > 1e-10 * max(1.0, np.max(np.abs(real_matrix.real))):
        raise EigenError("operator is not real in the cos/sin basis; rho0 must be real")
    full = eigendecompose(real_matrix.real, cluster_rel_tol)

    M = min(int(retained), full.size)
    while M < full.size and full.cluster_ids[M] == full.cluster_ids[M - 1]:
        M += 1
    if M < retained:
        logger.warning("only %d modes available with truncation K=%d (asked for %d)", M, K, retained)
    kappas = full.kappas[:M]
    vecs = full.modes[:, :M]
    if not kappas[0] > 0:
        raise EigenError(f"lowest eigenvalue {kappas[0]:.3e} is not positive")

    # real basis functions sqrt(2/|T|) cos / sin on the grid
    table = np.empty((len(kinds),) + grid.shape)
    norm = np.sqrt(2.0 / grid.volume)
    for b, (m, kind) in enumerate(zip(reps, kinds)):
        ph = grid.phase(m)
        table[b] = norm * (np.cos(ph) if kind == "cos" else np.sin(ph))
    chi = np.tensordot(vecs.T, table, axes=1)
    grad_chi = np.stack([grid.grad(c) for c in chi])
    hess_chi = np.stack([grid.hessian(c) for c in chi])

    residuals = np.empty(M)
    for j in range(M):
        a_chi = -grid.div(r * grad_chi[j])
        residuals[j] = grid.norm(a_chi - kappas[j] * chi[j])
    bad = np.flatnonzero(residuals > residual_tol * (1.0 + kappas))
    if bad.size:
        j = int(bad[0])
        raise EigenError(
            f"eigenpair {j} (kappa={kappas[j]:.6g}) has residual {residuals[j]:.3e}; "
            "increase the resolution or the truncation"
        )
    logger.info("eigensystem: %d modes, kappa in [%.4g, %.4g], K=%d", M, kappas[0], kappas[-1], K)

    return EigenSystem(
        kappas=kappas,
        modes=vecs,
        cluster_ids=cluster_ids(kappas, cluster_rel_tol),
        truncation=K,
        residuals=residuals,
        cluster_rel_tol=cluster_rel_tol,
        grid=grid,
        rho0=r.copy(),
        basis_modes=reps,
        basis_kinds=kinds,
        chi=chi,
        grad_chi=grad_chi,
        hess_chi=hess_chi,
    )


# ---------------------------------------------------------------------------
# Fast-wave vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FastWaveVector:
    """Grid form (scalar, vector) or eigen form (coeffs = a^+, mean)."""

    grid: Optional[TorusGrid]
    scalar: Optional[np.ndarray] = None
    vector: Optional[np.ndarray] = None
    coeffs: Optional[np.ndarray] = None
    mean: float = 0.0

    @classmethod
    def from_grid(cls, grid: TorusGrid, scalar: np.ndarray, vector: np.ndarray) -> "FastWaveVector":
        scalar = np.real(np.asarray(scalar, dtype=float)).reshape(grid.shape)
        vector = np.real(np.asarray(vector, dtype=float)).reshape((grid.dim,) + grid.shape)
        return cls(grid, scalar=scalar, vector=vector)

    @classmethod
    def from_coeffs(cls, coeffs, mean: float = 0.0, grid: Optional[TorusGrid] = None) -> "FastWaveVector":
        return cls(grid, coeffs=np.asarray(coeffs, dtype=complex).copy(), mean=float(mean))

    @classmethod
    def zero(cls, eig: EigenSystem) -> "FastWaveVector":
        return cls.from_coeffs(np.zeros(eig.size, dtype=complex), 0.0, eig.grid)

    @property
    def is_eigen(self) -> bool:
        return self.coeffs is not None

    @property
    def a_plus(self) -> np.ndarray:
        return self.coeffs

    @property
    def a_minus(self) -> np.ndarray:
        return np.conj(self.coeffs)

    def norm(self) -> float:
        if self.is_eigen:
            volume = self.grid.volume if self.grid is not None else 0.0
            return float(np.sqrt(4.0 * np.sum(np.abs(self.coeffs) ** 2) + volume * self.mean ** 2))
        return float(np.sqrt(self.grid.norm(self.scalar) ** 2 + self.grid.norm(self.vector) ** 2))


def _check_eig_size(V: FastWaveVector, eig: EigenSystem) -> None:
    if V.coeffs.shape != (eig.size,):
        raise EigenError(f"coefficient vector of length {V.coeffs.shape} does not match eigensystem size {eig.size}")


def _pq(V: FastWaveVector) -> Tuple[np.ndarray, np.ndarray]:
    return 2.0 * V.coeffs.real, -2.0 * V.coeffs.imag


def _vector_coordinates(eig: EigenSystem, vector: np.ndarray) -> np.ndarray:
    """q_j = <vector, sqrt(rho0) grad chi_j> / sqrt(kappa_j)."""
    weighted = vector * eig.sqrt_rho0
    dv = eig.grid.cell_volume
    q = np.einsum("a...,ja...->j", weighted, eig.grad_chi) * dv
    return q / eig.omegas


def expand(V: FastWaveVector, eig: EigenSystem, tol: float = GRADIENT_TYPE_TOL) -> FastWaveVector:
    if V.is_eigen:
        _check_eig_size(V, eig)
        return V
    grid = eig.require_grid()
    if V.grid != grid:
        raise GridError("fast-wave vector and eigensystem live on different grids")
    f = V.vector / eig.sqrt_rho0
    rotational = leray_project_array(grid, f)
    bad = grid.norm(rotational)
    if bad > tol * max(1.0, grid.norm(f)):
        raise ConstraintViolation("vector part is not of gradient type after division by sqrt(rho0)", bad)
    mean = float(grid.mean(V.scalar))
    p = np.tensordot(eig.chi, V.scalar, axes=grid.dim) * grid.cell_volume
    q = _vector_coordinates(eig, V.vector)
    return FastWaveVector.from_coeffs(0.5 * (p - 1j * q), mean, grid)


def reconstruct(V: FastWaveVector, eig: EigenSystem) -> FastWaveVector:
    if not V.is_eigen:
        return V
    grid = eig.require_grid()
    _check_eig_size(V, eig)
    p, q = _pq(V)
    scalar = V.mean + np.tensordot(p, eig.chi, axes=1)
    vector = np.tensordot(q / eig.omegas, eig.grad_chi, axes=1) * eig.sqrt_rho0
    return FastWaveVector(grid, scalar=scalar, vector=vector)


def wave_group(V: FastWaveVector, tau: float, eig: EigenSystem) -> FastWaveVector:
    """L(tau) V: a_j^+ -> a_j^+ exp(i sqrt(kappa_j) tau); the mean is invariant."""
    V = expand(V, eig)
    return FastWaveVector.from_coeffs(V.coeffs * np.exp(1j * eig.omegas * tau), V.mean, eig.grid)


def inner(W: FastWaveVector, V: FastWaveVector, eig: Optional[EigenSystem] = None) -> float:
    """L2 inner product; eigen form uses 4 Re sum w conj(v) plus the mean part."""
    if W.is_eigen and V.is_eigen:
        volume = W.grid.volume if W.grid is not None else (eig.grid.volume if eig and eig.grid else 0.0)
        return float(4.0 * np.real(np.sum(W.coeffs * np.conj(V.coeffs))) + volume * W.mean * V.mean)
    if eig is not None:
        W, V = reconstruct(W, eig), reconstruct(V, eig)
    if W.is_eigen or V.is_eigen:
        raise EigenError("mixed-form inner product needs an eigensystem")
    grid = W.grid
    return float(grid.integrate(W.scalar * V.scalar) + grid.integrate(np.sum(W.vector * V.vector, axis=0)))


# ---------------------------------------------------------------------------
# B1 / B2
# ---------------------------------------------------------------------------

def _div_tensor(grid: TorusGrid, T: np.ndarray) -> np.ndarray:
    return np.stack([grid.div(T[:, b]) for b in range(grid.dim)])


def check_weighted_divergence_free(u: np.ndarray, eig: EigenSystem, tol: float = WEIGHTED_DIV_TOL) -> None:
    grid = eig.grid
    momentum = eig.rho0 * u
    bad = grid.norm(grid.div(momentum))
    if bad > tol * max(1.0, grid.norm(momentum)):
        raise ConstraintViolation("velocity is not weighted-divergence-free: div(rho0 u) != 0", bad)


def _as_vector_array(u, grid: TorusGrid) -> np.ndarray:
    if isinstance(u, TorusField):
        u.require_components(grid.dim, "velocity")
        return np.real(u.values)
    return np.asarray(u, dtype=float).reshape((grid.dim,) + grid.shape)


def b1_array(u: np.ndarray, L2: np.ndarray, eig: EigenSystem) -> np.ndarray:
    grid = eig.grid
    su = eig.sqrt_rho0 * u
    T = np.empty((grid.dim, grid.dim) + grid.shape)
    for a in range(grid.dim):
        for b in range(grid.dim):
            T[a, b] = grid.product(su[a], L2[b]) + grid.product(L2[a], su[b])
    return _div_tensor(grid, T)


def b2_array(V1: FastWaveVector, V2: FastWaveVector, eig: EigenSystem) -> np.ndarray:
    """V1, V2 in grid form."""
    grid = eig.grid
    T = np.empty((grid.dim, grid.dim) + grid.shape)
    for a in range(grid.dim):
        for b in range(grid.dim):
            T[a, b] = 0.5 * (grid.product(V1.vector[a], V2.vector[b]) + grid.product(V2.vector[a], V1.vector[b]))
    return _div_tensor(grid, T) + 0.5 * grid.grad(grid.product(V1.scalar, V2.scalar))


def b1(u, V: FastWaveVector, tau: float, eig: EigenSystem, tol: float = WEIGHTED_DIV_TOL) -> TorusField:
    """div(sqrt(rho0) u (x) L2(tau)V + sqrt(rho0) L2(tau)V (x) u), dealiased."""
    grid = eig.require_grid()
    u = _as_vector_array(u, grid)
    check_weighted_divergence_free(u, eig, tol)
    L = reconstruct(wave_group(V, tau, eig), eig)
    return TorusField(grid, b1_array(u, L.vector, eig))


def b2(V1: FastWaveVector, V2: FastWaveVector, tau: float, eig: EigenSystem) -> TorusField:
    """1/2 div(L2 V1 (x) L2 V2 + L2 V2 (x) L2 V1) + 1/2 grad(L1 V1 L1 V2) at L(tau)."""
    grid = eig.require_grid()
    W1 = reconstruct(wave_group(V1, tau, eig), eig)
    W2 = reconstruct(wave_group(V2, tau, eig), eig)
    return TorusField(grid, b2_array(W1, W2, eig))


# ---------------------------------------------------------------------------
# Resonances
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ResonanceSet:
    """
    Entries (l, j, m, s_j, s_m) with |s_j w_j + s_m w_m - w_l| <= res_tol, i.e.
    triples with signs (gamma_j, gamma_l, gamma_m) = (s_j w_j, -w_l, s_m w_m).
    `near` lists the combinations between res_tol and gap_tol.
    """

    l: np.ndarray
    j: np.ndarray
    m: np.ndarray
    sign_j: np.ndarray
    sign_m: np.ndarray
    defect: np.ndarray
    res_tol: float
    gap_tol: float
    near: pd.DataFrame

    def __len__(self) -> int:
        return len(self.l)

    def to_frame(self) -> pd.DataFrame:
        return _resonance_frame(self.l, self.j, self.m, self.sign_j, self.sign_m, self.defect)


def _resonance_frame(l, j, m, sj, sm, defect) -> pd.DataFrame:
    sym = {1: "+", -1: "-"}
    signs = [f"{sym[int(a)]}-{sym[int(b)]}" for a, b in zip(sj, sm)]
    return pd.DataFrame(
        {"j": np.asarray(j, dtype=int), "l": np.asarray(l, dtype=int), "m": np.asarray(m, dtype=int),
         "signs": signs, "defect": np.abs(np.asarray(defect, dtype=float))},
        columns=RESONANCE_COLUMNS,
    )


def default_resonance_tol(eig: EigenSystem) -> float:
    return RESONANCE_REL_TOL * (1.0 + float(np.sqrt(eig.kappas.max())))


def _cluster_frequency_tol(eig: EigenSystem) -> float:
    k = eig.kappas
    return float(np.max(eig.cluster_rel_tol * (1.0 + k) / (2.0 * np.sqrt(k))))


def resonance_set(eig: EigenSystem, res_tol: Optional[float] = None, gap_tol: float = GAP_TOL) -> ResonanceSet:
    res_tol = default_resonance_tol(eig) if res_tol is None else float(res_tol)
    if not res_tol > 0 or not gap_tol > res_tol:
        raise ToleranceConflict(f"need 0 < res_tol < gap_tol (res_tol={res_tol}, gap_tol={gap_tol})")
    cluster_freq = _cluster_frequency_tol(eig)
    if res_tol < cluster_freq:
        raise ToleranceConflict(
            f"res_tol={res_tol:.3e} is finer than the cluster tolerance in frequency units ({cluster_freq:.3e})"
        )
    w = eig.omegas
    signs = np.array([1, -1])
    D = (
        signs[None, None, None, :, None] * w[None, :, None, None, None]
        + signs[None, None, None, None, :] * w[None, None, :, None, None]
        - w[:, None, None, None, None]
    )
    absD = np.abs(D)
    hit = np.nonzero(absD <= res_tol)
    near = np.nonzero((absD > res_tol) & (absD < gap_tol))
    near_frame = _resonance_frame(near[0], near[1], near[2], signs[near[3]], signs[near[4]], D[near])
    if len(near_frame):
        logger.info("%d near-resonant combinations between res_tol and gap_tol", len(near_frame))
    return ResonanceSet(
        l=hit[0], j=hit[1], m=hit[2],
        sign_j=signs[hit[3]], sign_m=signs[hit[4]],
        defect=D[hit],
        res_tol=res_tol, gap_tol=gap_tol, near=near_frame,
    )


# ---------------------------------------------------------------------------
# Resonant forms Q1 / Q2
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ResonantForms:
    """Precomputed coefficient tables for Q1 and Q2 on one eigensystem."""

    eig: EigenSystem
    resonances: ResonanceSet
    q2_coefficients: np.ndarray      # Lambda - s_j s_m Gamma per resonance entry
    pair_l: np.ndarray               # same-cluster index pairs (Q1, mean coupling)
    pair_j: np.ndarray
    mean_coupling: np.ndarray        # (1/(2 w_l)) int chi_j (-Lap chi_l) per pair


def _triple_tables(eig: EigenSystem, ls: np.ndarray) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    """Gamma[l] and Lambda[l] as (M, M) matrices for each requested output index l."""
    grid = eig.grid
    dv = grid.cell_volume
    w = eig.omegas
    rg = eig.rho0[None, None] * eig.grad_chi
    out = {}
    for l in np.unique(ls):
        Hg = np.einsum("ab...,mb...->ma...", eig.hess_chi[l], eig.grad_chi)
        gamma = -np.einsum("ja...,ma...->jm", rg, Hg) * dv
        gamma /= w[l] * np.outer(w, w)
        weighted = eig.chi * eig.neg_lap_chi[l]
        lam = np.tensordot(weighted, eig.chi, axes=(tuple(range(1, grid.dim + 1)), tuple(range(1, grid.dim + 1)))) * dv
        lam /= 2.0 * w[l]
        out[int(l)] = (gamma, lam)
    return out


@lru_cache(maxsize=32)
def resonant_forms(eig: EigenSystem, res_tol: Optional[float] = None, gap_tol: float = GAP_TOL) -> ResonantForms:
    eig.require_grid()
    res = resonance_set(eig, res_tol, gap_tol)
    tables = _triple_tables(eig, res.l)
    coeffs = np.empty(len(res), dtype=float)
    for n in range(len(res)):
        gamma, lam = tables[int(res.l[n])]
        jj, mm = res.j[n], res.m[n]
        coeffs[n] = lam[jj, mm] - res.sign_j[n] * res.sign_m[n] * gamma[jj, mm]

    ids = eig.cluster_ids
    pl, pj = np.nonzero(ids[:, None] == ids[None, :])
    grid = eig.grid
    mean_coupling = np.array(
        [grid.integrate(eig.chi[j] * eig.neg_lap_chi[l]) / (2.0 * eig.omegas[l]) for l, j in zip(pl, pj)]
    )
    logger.debug("resonant forms: %d resonance entries, %d cluster pairs", len(res), len(pl))
    return ResonantForms(eig, res, coeffs, pl, pj, mean_coupling)


def q1_coeffs(u: np.ndarray, c: np.ndarray, forms: ResonantForms) -> np.ndarray:
    """a^+ of Q1(u, V): 1/2 sum over same-cluster j of T1[l, j] c_j."""
    eig = forms.eig
    grid = eig.grid
    w = eig.omegas
    momentum = eig.rho0 * u
    pl, pj = forms.pair_l, forms.pair_j
    Hu = np.einsum("a...,lab...->lb...", momentum, eig.hess_chi)
    t1 = -2.0 * np.einsum("nb...,nb...->n", Hu[pl], eig.grad_chi[pj]) * grid.cell_volume / (w[pl] * w[pj])
    out = np.zeros(eig.size, dtype=complex)
    np.add.at(out, pl, 0.5 * t1 * c[pj])
    return out


def q2_coeffs(c1: np.ndarray, mean1: float, c2: np.ndarray, mean2: float, forms: ResonantForms) -> np.ndarray:
    """a^+ of Q2(V1, V2) restricted to the resonance set (plus the mean-mode coupling)."""
    res = forms.resonances
    x1 = np.where(res.sign_j > 0, c1[res.j], np.conj(c1[res.j]))
    x2 = np.where(res.sign_m > 0, c2[res.m], np.conj(c2[res.m]))
    out = np.zeros(len(c1), dtype=complex)
    np.add.at(out, res.l, -0.5j * forms.q2_coefficients * x1 * x2)
    if mean1 or mean2:
        pl, pj, mc = forms.pair_l, forms.pair_j, forms.mean_coupling
        np.add.at(out, pl, -0.5j * mc * (mean1 * c2[pj] + mean2 * c1[pj]))
    return out


def _forms_for(eig: EigenSystem, forms: Optional[ResonantForms]) -> ResonantForms:
    if forms is None:
        return resonant_forms(eig)
    if forms.eig is not eig:
        raise EigenError("resonant forms were built for a different eigensystem")
    return forms


def q1(u, V: FastWaveVector, eig: EigenSystem, forms: Optional[ResonantForms] = None,
       tol: float = WEIGHTED_DIV_TOL) -> FastWaveVector:
    grid = eig.require_grid()
    u = _as_vector_array(u, grid)
    check_weighted_divergence_free(u, eig, tol)
    V = expand(V, eig)
    return FastWaveVector.from_coeffs(q1_coeffs(u, V.coeffs, _forms_for(eig, forms)), 0.0, grid)


def q2(V1: FastWaveVector, V2: Optional[FastWaveVector], eig: EigenSystem,
       forms: Optional[ResonantForms] = None) -> FastWaveVector:
    V1 = expand(V1, eig)
    V2 = V1 if V2 is None else expand(V2, eig)
    out = q2_coeffs(V1.coeffs, V1.mean, V2.coeffs, V2.mean, _forms_for(eig, forms))
    return FastWaveVector.from_coeffs(out, 0.0, eig.grid)


# ---------------------------------------------------------------------------
# Brute-force time average
# ---------------------------------------------------------------------------

def _window_weights(n: int, window: str) -> np.ndarray:
    x = (np.arange(n) + 0.5) / n
    if window == "uniform":
        w = np.ones(n)
    elif window == "bump":
        w = np.exp(-1.0 / (x * (1.0 - x)))
    else:
        raise ValueError(f"unknown window {window!r}")
    return w / w.sum()


def _warn_near_resonances(eig: EigenSystem, linear: bool, gap_tol: float) -> None:
    if linear:
        w = eig.omegas
        gaps = np.abs(w[:, None] - w[None, :])
        same = eig.cluster_ids[:, None] == eig.cluster_ids[None, :]
        near = np.argwhere((gaps < gap_tol) & ~same)
        pairs = [(int(a), int(b)) for a, b in near if a < b]
    else:
        frame = resonance_set(eig, gap_tol=gap_tol).near
        pairs = list(frame[["l", "j", "m"]].itertuples(index=False, name=None))
    if pairs:
        msg = f"near-resonances below gap_tol={gap_tol:g}: {pairs[:10]}"
        logger.warning(msg)
        warnings.warn(msg, NearResonanceWarning, stacklevel=3)


def time_average_oracle(
    eig: EigenSystem,
    tau_max: float,
    n_samples: int,
    u=None,
    V: Optional[FastWaveVector] = None,
    V1: Optional[FastWaveVector] = None,
    V2: Optional[FastWaveVector] = None,
    helmholtz: Optional[WeightedHelmholtz] = None,
    project: bool = True,
    window: str = "uniform",
    gap_tol: float = GAP_TOL,
) -> FastWaveVector:
    """
    Average of L(-s)(0, H_perp B(s) / sqrt(rho0)) over s in [0, tau_max], with
    B = B1(u, V) when u is given and B2(V1, V2) otherwise. Without `project`
    the coordinates are read off B directly (int H_perp B . grad chi = int B . grad chi).
    """
    grid = eig.require_grid()
    if not tau_max > 0 or n_samples < 1:
        raise ValueError("tau_max must be positive and n_samples >= 1")
    linear = u is not None
    if linear:
        if V is None:
            raise ValueError("linear oracle needs V")
        u = _as_vector_array(u, grid)
        Vc = expand(V, eig)
    else:
        if V1 is None:
            raise ValueError("bilinear oracle needs V1")
        V1c = expand(V1, eig)
        V2c = V1c if V2 is None else expand(V2, eig)
    _warn_near_resonances(eig, linear, gap_tol)

    if project and helmholtz is None:
        helmholtz = WeightedHelmholtz(TorusField(grid, eig.rho0))
    weights = _window_weights(n_samples, window)
    samples = tau_max * (np.arange(n_samples) + 0.5) / n_samples
    w = eig.omegas
    total = np.zeros(eig.size, dtype=complex)
    for s, weight in zip(samples, weights):
        if linear:
            L = reconstruct(wave_group(Vc, s, eig), eig)
            B = b1_array(u, L.vector, eig)
        else:
            W1 = reconstruct(wave_group(V1c, s, eig), eig)
            W2 = W1 if V2 is None else reconstruct(wave_group(V2c, s, eig), eig)
            B = b2_array(W1, W2, eig)
        if project:
            _, grad_part, _, _, _ = helmholtz.project_array(B)
            q = _vector_coordinates(eig, grad_part / eig.sqrt_rho0)
        else:
            q = np.einsum("a...,ja...->j", B, eig.grad_chi) * grid.cell_volume / w
        total += weight * (-0.5j * q) * np.exp(-1j * w * s)
    return FastWaveVector.from_coeffs(total, 0.0, grid)


# ---------------------------------------------------------------------------
# Filtering and oscillatory pairings
# ---------------------------------------------------------------------------

def filter_state(hydro, helmholtz: WeightedHelmholtz, eig: EigenSystem, t: float, eps: float) -> FastWaveVector:
    """V^eps = L(-t/eps)(phi^eps, sqrt(rho0) grad w^eps) with rho0 grad w^eps = H_perp J^eps."""
    grid = eig.require_grid()
    _, grad_part, _, _, _ = helmholtz.project_array(np.real(hydro.J.values))
    V = FastWaveVector.from_grid(grid, hydro.phi.values[0], grad_part / eig.sqrt_rho0)
    # gradient type holds to the projection tolerance
    return wave_group(expand(V, eig, tol=max(GRADIENT_TYPE_TOL, 100 * helmholtz.tol)), -t / eps, eig)


def _auto_samples(t: float, eps: float, top_frequency: float, minimum: int = 200) -> int:
    periods = t * top_frequency / (2.0 * np.pi * eps)
    return int(max(minimum, np.ceil(40 * periods))) + 1


def b2_pairing_integral(
    V1: FastWaveVector, V2: FastWaveVector, u, eig: EigenSystem, t: float, eps: float,
    n_samples: Optional[int] = None,
) -> float:
    """int_0^t int B2(V1, V2)(s/eps) . u dx ds by the trapezoid rule."""
    grid = eig.require_grid()
    u = _as_vector_array(u, grid)
    check_weighted_divergence_free(u, eig)
    V1, V2 = expand(V1, eig), expand(V2, eig)
    n = n_samples or _auto_samples(t, eps, 2.0 * eig.omegas.max())
    s = np.linspace(0.0, t, n)
    values = []
    for si in s:
        W1 = reconstruct(wave_group(V1, si / eps, eig), eig)
        W2 = reconstruct(wave_group(V2, si / eps, eig), eig)
        values.append(grid.integrate(np.sum(b2_array(W1, W2, eig) * u, axis=0)))
    return float(np.trapezoid(values, s))


def oscillatory_pairings(
    u1, u2, V: FastWaveVector, eig: EigenSystem, t: float, eps: float,
    n_samples: Optional[int] = None,
) -> Dict[str, float]:
    """
    Time averages over [0, t] of int B1(u1, V)(s/eps) . u2 and of
    int rho0^{-1/2} div(rho0 u1 (x) u2) . L2(s/eps) V; both vanish as eps -> 0.
    """
    grid = eig.require_grid()
    u1 = _as_vector_array(u1, grid)
    u2 = _as_vector_array(u2, grid)
    check_weighted_divergence_free(u1, eig)
    check_weighted_divergence_free(u2, eig)
    V = expand(V, eig)
    n = n_samples or _auto_samples(t, eps, eig.omegas.max())
    s = np.linspace(0.0, t, n)
    tensor = np.empty((grid.dim, grid.dim) + grid.shape)
    for a in range(grid.dim):
        for b in range(grid.dim):
            tensor[a, b] = grid.product(eig.rho0 * u1[a], u2[b])
    stress = _div_tensor(grid, tensor) / eig.sqrt_rho0
    b1_vals, dens_vals = [], []
    for si in s:
        L = reconstruct(wave_group(V, si / eps, eig), eig)
        b1_vals.append(grid.integrate(np.sum(b1_array(u1, L.vector, eig) * u2, axis=0)))
        dens_vals.append(grid.integrate(np.sum(stress * L.vector, axis=0)))
    return {
        "b1_pairing": float(np.trapezoid(b1_vals, s) / t),
        "density_pairing": float(np.trapezoid(dens_vals, s) / t),
    }
