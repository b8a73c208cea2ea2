# anelastic/spectral.py
"""
Uniform periodic grids on T^n (n = 1, 2) and the spectral operators the rest
of the package builds on.

Array conventions used throughout the package:
  scalar field  -> ndarray of shape grid.shape
  vector field  -> ndarray of shape (dim, *grid.shape)

TorusField wraps either with its grid and a reality flag. The Nyquist mode
is treated as unresolved: every derivative zeroes it, so div(grad f) and
lap(f) agree to rounding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Tuple, Union

import numpy as np

from .constants import DEFAULT_PERIOD, MIN_POINTS, SUPPORTED_DIMS
from .errors import GridError, PositivityError

logger = logging.getLogger(__name__)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusGrid:
    dim: int
    points: int
    period: float = DEFAULT_PERIOD

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise GridError(f"dim must be one of {SUPPORTED_DIMS}, got {self.dim}")
        if self.points < MIN_POINTS or not _is_power_of_two(int(self.points)):
            raise GridError(f"points per dim must be a power of two >= {MIN_POINTS}, got {self.points}")
        if not self.period > 0:
            raise GridError(f"period must be positive, got {self.period}")

    # ---------- geometry ----------

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points ** self.dim

    @property
    def spacing(self) -> float:
        return self.period / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return self.period ** self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @cached_property
    def coordinates(self) -> np.ndarray:
        x = np.arange(self.points) * self.spacing
        return np.array(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def integer_modes(self) -> np.ndarray:
        m = np.rint(np.fft.fftfreq(self.points) * self.points).astype(int)
        return np.array(np.meshgrid(*([m] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers with the Nyquist entry zeroed per axis."""
        scale = 2.0 * np.pi / self.period
        k = self.integer_modes * scale
        k[self.integer_modes == -(self.points // 2)] = 0.0
        return k

    @cached_property
    def k_squared(self) -> np.ndarray:
        return np.sum(self.wavenumbers ** 2, axis=0)

    @property
    def k_max_squared(self) -> float:
        return float(self.k_squared.max())

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # 2/3 rule
        return np.all(np.abs(self.integer_modes) < self.points / 3.0, axis=0)

    # ---------- spectral transforms on raw arrays ----------

    def fft(self, a: np.ndarray) -> np.ndarray:
        return np.fft.fftn(a, axes=self.axes) / self.size

    def ifft(self, c: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(c, axes=self.axes) * self.size

    def _back(self, c: np.ndarray, real: bool) -> np.ndarray:
        out = self.ifft(c)
        return out.real if real else out

    def grad(self, a: np.ndarray) -> np.ndarray:
        c = self.fft(a)
        real = not np.iscomplexobj(a)
        return np.stack([self._back(1j * k * c, real) for k in self.wavenumbers])

    def div(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.dim:
            raise GridError(f"divergence expects {self.dim} components, got {v.shape[0]}")
        c = self.fft(v)
        real = not np.iscomplexobj(v)
        return self._back(np.sum(1j * self.wavenumbers * c, axis=0), real)

    def lap(self, a: np.ndarray) -> np.ndarray:
        return self._back(-self.k_squared * self.fft(a), not np.iscomplexobj(a))

    def hessian(self, a: np.ndarray) -> np.ndarray:
        c = self.fft(a)
        real = not np.iscomplexobj(a)
        k = self.wavenumbers
        return np.stack(
            [np.stack([self._back(-k[i] * k[j] * c, real) for j in range(self.dim)]) for i in range(self.dim)]
        )

    def dealias(self, a: np.ndarray) -> np.ndarray:
        return self._back(self.dealias_mask * self.fft(a), not np.iscomplexobj(a))

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Quadratic product with the 2/3 rule applied to inputs and output."""
        return self.dealias(self.dealias(a) * self.dealias(b))

    # ---------- quadrature ----------

    def integrate(self, a: np.ndarray):
        return np.sum(a, axis=self.axes) * self.cell_volume

    def mean(self, a: np.ndarray):
        return self.integrate(a) / self.volume

    def norm(self, a: np.ndarray) -> float:
        """L2 norm; vector arrays are summed over components."""
        return float(np.sqrt(np.sum(np.abs(a) ** 2) * self.cell_volume))

    def lp_norm(self, a: np.ndarray, p: float) -> float:
        pointwise = np.abs(a) if a.shape == self.shape else np.sqrt(np.sum(np.abs(a) ** 2, axis=0))
        return float((np.sum(pointwise ** p) * self.cell_volume) ** (1.0 / p))

    # ---------- building blocks ----------

    def phase(self, mode: Sequence[float]) -> np.ndarray:
        """k.x for an integer mode vector."""
        mode = tuple(mode)
        if len(mode) != self.dim:
            raise GridError(f"mode {mode} does not match dim={self.dim}")
        scale = 2.0 * np.pi / self.period
        return sum(scale * m * x for m, x in zip(mode, self.coordinates))

    def plane_wave(self, mode: Sequence[float]) -> np.ndarray:
        return np.exp(1j * self.phase(mode))

    def index_of(self, mode: Sequence[int]) -> Tuple[int, ...]:
        """Array index of an integer mode in fft ordering."""
        return tuple(int(m) % self.points for m in mode)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TorusField:
    grid: TorusGrid
    values: np.ndarray
    real: bool = True

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape == self.grid.shape:
            values = values[np.newaxis]
        if values.ndim != self.grid.dim + 1 or values.shape[1:] != self.grid.shape:
            raise GridError(f"values of shape {values.shape} do not fit grid {self.grid.shape}")
        if values.shape[0] not in (1, self.grid.dim):
            raise GridError(f"component count {values.shape[0]} invalid for dim={self.grid.dim}")
        if self.real:
            values = np.real(values).astype(float)
        else:
            values = values.astype(complex)
        values = np.array(values, copy=True)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def scalar(cls, grid: TorusGrid, values, real: bool | None = None) -> "TorusField":
        values = np.asarray(values)
        if real is None:
            real = not np.iscomplexobj(values)
        return cls(grid, values.reshape(grid.shape), real)

    @classmethod
    def vector(cls, grid: TorusGrid, values, real: bool | None = None) -> "TorusField":
        values = np.asarray(values)
        if real is None:
            real = not np.iscomplexobj(values)
        return cls(grid, values.reshape((grid.dim,) + grid.shape), real)

    @classmethod
    def constant(cls, grid: TorusGrid, value: float) -> "TorusField":
        return cls(grid, np.full(grid.shape, float(value)), True)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def data(self) -> np.ndarray:
        """Scalar array for one-component fields, the stacked array otherwise."""
        return self.values[0] if self.components == 1 else self.values

    def require_components(self, n: int, what: str) -> None:
        if self.components != n:
            raise GridError(f"{what}: expected {n} components, got {self.components}")


Coefficients = np.ndarray
FieldLike = Union[TorusField, np.ndarray]


def _same_grid(*fields: TorusField) -> TorusGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def transform_forward(f: TorusField) -> Coefficients:
    """Normalized coefficients: f = sum_k c_k e^{ik.x}, shape (components, *grid.shape)."""
    return f.grid.fft(f.values)


def transform_inverse(coeffs: Coefficients, grid: TorusGrid, real: bool = False) -> TorusField:
    coeffs = np.asarray(coeffs)
    if coeffs.shape == grid.shape:
        coeffs = coeffs[np.newaxis]
    values = grid.ifft(coeffs)
    if real:
        imag = np.max(np.abs(values.imag)) if values.size else 0.0
        scale = max(1.0, float(np.max(np.abs(values.real))))
        if imag > 1e-10 * scale:
            logger.debug("dropping imaginary part %.3e on a field flagged real", imag)
    return TorusField(grid, values, real)


def gradient(f: TorusField) -> TorusField:
    f.require_components(1, "gradient")
    return TorusField(f.grid, f.grid.grad(f.values[0]), f.real)


def divergence(v: TorusField) -> TorusField:
    v.require_components(v.grid.dim, "divergence")
    return TorusField(v.grid, v.grid.div(v.values), v.real)


def laplacian(f: TorusField) -> TorusField:
    f.require_components(1, "laplacian")
    return TorusField(f.grid, f.grid.lap(f.values[0]), f.real)


def check_positive(rho0: FieldLike, name: str = "rho0") -> np.ndarray:
    arr = rho0.data if isinstance(rho0, TorusField) else np.asarray(rho0)
    if np.iscomplexobj(arr):
        arr = arr.real
    low = float(np.min(arr))
    if not low > 0.0:
        raise PositivityError(f"{name} must be strictly positive, min={low:.3e}")
    return arr


def inner_product(f: TorusField, g: TorusField):
    """<f, g> = int f . conj(g) dx by rectangle quadrature."""
    grid = _same_grid(f, g)
    if f.components != g.components:
        raise GridError("inner product of fields with different component counts")
    value = grid.integrate(np.sum(f.values * np.conj(g.values), axis=0))
    if f.real and g.real:
        return float(np.real(value))
    return complex(value)


def weighted_inner_product(f: TorusField, g: TorusField, rho0: TorusField):
    """<f, g>_sigma with sigma = 1/rho0."""
    grid = _same_grid(f, g, rho0)
    weight = 1.0 / check_positive(rho0)
    if f.components != g.components:
        raise GridError("inner product of fields with different component counts")
    value = grid.integrate(np.sum(f.values * np.conj(g.values), axis=0) * weight)
    if f.real and g.real:
        return float(np.real(value))
    return complex(value)


def l2_norm(f: TorusField) -> float:
    return f.grid.norm(f.values)
