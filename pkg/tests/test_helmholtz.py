import numpy as np
import pytest

from anelastic.errors import ConvergenceFailure, GridError, PositivityError
from anelastic.helmholtz import (
    WeightedHelmholtz,
    dense_weighted_poisson,
    leray_project,
    leray_project_array,
    project,
    solve_weighted_poisson,
)
from anelastic.spectral import TorusField, TorusGrid, weighted_inner_product


def _smooth_vector(grid, rng, kmax=4):
    """Random real vector field with modes |k_i| <= kmax."""
    out = np.zeros((grid.dim,) + grid.shape)
    modes = [m for m in np.ndindex(*([2 * kmax + 1] * grid.dim))]
    for comp in range(grid.dim):
        for m in modes:
            k = tuple(x - kmax for x in m)
            phase = grid.phase(k)
            out[comp] += rng.standard_normal() * np.cos(phase) + rng.standard_normal() * np.sin(phase)
    return out / len(modes)


@pytest.fixture(scope="module")
def contrast_rho0():
    grid = TorusGrid(2, 32)
    x, _ = grid.coordinates
    return TorusField.scalar(grid, 1.0 + 0.6 * np.cos(x))


def test_contrast_is_reported(contrast_rho0):
    solver = WeightedHelmholtz(contrast_rho0)
    assert solver.contrast == pytest.approx(4.0, rel=1e-3)


def test_projection_properties_on_random_fields(contrast_rho0, rng):
    grid = contrast_rho0.grid
    solver = WeightedHelmholtz(contrast_rho0, tol=1e-12)
    for _ in range(50):
        f = TorusField.vector(grid, _smooth_vector(grid, rng))
        d = solver.project(f)
        sol, grad_part = d.solenoidal, d.gradient_part
        scale = weighted_inner_product(f, f, contrast_rho0)

        # f = H f + H_perp f
        assert np.max(np.abs(sol.values + grad_part.values - f.values)) < 1e-12

        # H f is divergence free, H_perp f = rho0 grad Psi
        assert grid.norm(grid.div(sol.values)) < 1e-9 * np.sqrt(scale)

        again = solver.project(sol)
        assert grid.norm(again.solenoidal.values - sol.values) < 1e-9 * np.sqrt(scale)

        cross = weighted_inner_product(sol, grad_part, contrast_rho0)
        assert abs(cross) < 1e-9 * scale

        pieces = weighted_inner_product(sol, sol, contrast_rho0) + weighted_inner_product(
            grad_part, grad_part, contrast_rho0
        )
        assert abs(pieces - scale) < 1e-9 * scale

        assert abs(grid.integrate(d.potential.values[0])) < 1e-10


def test_one_dimensional_potential_matches_closed_form():
    # rho0 Psi' = -sin x  =>  Psi = ln(1 + 0.3 cos x) / 0.3 up to a constant
    grid = TorusGrid(1, 64)
    (x,) = grid.coordinates
    rho0 = TorusField.scalar(grid, 1.0 + 0.3 * np.cos(x))
    f = TorusField.vector(grid, -np.sin(x)[None])
    exact = np.log(1.0 + 0.3 * np.cos(x)) / 0.3
    exact -= exact.mean()

    psi = solve_weighted_poisson(f, rho0, tol=1e-12)
    assert np.max(np.abs(psi.values[0] - exact)) < 1e-9

    dense = dense_weighted_poisson(f, rho0)
    assert np.max(np.abs(dense.values[0] - exact)) < 1e-9

    # in 1D the weighted-divergence-free part of a gradient is zero
    d = project(f, rho0, tol=1e-12)
    assert np.max(np.abs(d.solenoidal.values)) < 1e-9


def test_constant_field_is_solenoidal():
    grid = TorusGrid(1, 32)
    (x,) = grid.coordinates
    rho0 = TorusField.scalar(grid, 1.0 + 0.3 * np.cos(x))
    d = project(TorusField.vector(grid, np.ones((1, 32))), rho0)
    assert np.allclose(d.solenoidal.values, 1.0)
    assert d.iterations == 0
    assert d.residual == 0.0


def test_unit_background_agrees_with_leray(rng):
    grid = TorusGrid(2, 32)
    rho0 = TorusField.constant(grid, 1.0)
    solver = WeightedHelmholtz(rho0)
    for _ in range(10):
        f = TorusField.vector(grid, _smooth_vector(grid, rng))
        classical = leray_project(f)
        weighted = solver.project(f).solenoidal
        assert np.max(np.abs(classical.values - weighted.values)) < 1e-10


def test_leray_multiplier_removes_gradients():
    grid = TorusGrid(2, 16)
    x, y = grid.coordinates
    g = grid.grad(np.sin(x) * np.cos(2 * y))
    rot = np.stack([np.cos(y), np.sin(x)])
    assert np.max(np.abs(leray_project_array(grid, g + rot) - rot)) < 1e-12


@pytest.mark.parametrize("points", [16, 32, 64])
def test_iteration_count_does_not_grow_with_resolution(points, rng):
    grid = TorusGrid(2, points)
    x, _ = grid.coordinates
    solver = WeightedHelmholtz(TorusField.scalar(grid, 1.0 + 0.6 * np.cos(x)))
    _, _, iterations = solver.solve_array(_smooth_vector(grid, rng))
    assert 0 < iterations <= 100


def test_iteration_cap_raises():
    grid = TorusGrid(2, 32)
    x, y = grid.coordinates
    solver = WeightedHelmholtz(TorusField.scalar(grid, 1.0 + 0.6 * np.cos(x)), tol=1e-14, maxiter=1)
    f = np.stack([np.sin(x + 2 * y), np.cos(3 * x) * np.sin(y)])
    with pytest.raises(ConvergenceFailure) as info:
        solver.solve_array(f)
    assert info.value.iterations >= 1
    assert info.value.condition_estimate == pytest.approx(4.0, rel=1e-3)


def test_bad_inputs():
    grid = TorusGrid(2, 16)
    with pytest.raises(PositivityError):
        WeightedHelmholtz(TorusField.constant(grid, -1.0))
    solver = WeightedHelmholtz(TorusField.constant(grid, 1.0))
    with pytest.raises(GridError):
        solver.solve_array(np.zeros((1, 16, 16)))
    with pytest.raises(GridError):
        solver.project(TorusField.vector(TorusGrid(2, 32), np.zeros((2, 32, 32))))
    with pytest.raises(GridError):
        dense_weighted_poisson(
            TorusField.vector(TorusGrid(2, 64), np.zeros((2, 64, 64))),
            TorusField.constant(TorusGrid(2, 64), 1.0),
        )
