import numpy as np
import pytest

from anelastic.constants import LIMIT_SERIES_COLUMNS
from anelastic.errors import CFLViolation, EigenError, GridError
from anelastic.fastwave import reconstruct, resonant_forms
from anelastic.gpe import InitialDataSpec, build_initial_state
from anelastic.helmholtz import WeightedHelmholtz
from anelastic.limits import (
    OscillatingState,
    anelastic_state,
    anelastic_step,
    check_cfl,
    coupled_evolve,
    evolve_anelastic,
    evolve_euler_leray,
    kinetic_energy,
    limit_initial_data,
    limit_initial_data_from_wave,
    oscillating_rhs,
    oscillating_step,
    stream_velocity,
    weighted_div_norm,
)
from anelastic.loaders import load_scenario
from anelastic.spectral import TorusField, TorusGrid


def _low_mode_state(eig, rng, amplitude=0.05, active=6):
    c = np.zeros(eig.size, dtype=complex)
    c[:active] = amplitude * (rng.standard_normal(active) + 1j * rng.standard_normal(active))
    return OscillatingState(c, 0.0, 0.0)


@pytest.fixture(scope="module")
def cosine_helm_2d():
    grid = TorusGrid(2, 32)
    x, _ = grid.coordinates
    return WeightedHelmholtz(TorusField.scalar(grid, 1.0 + 0.3 * np.cos(x)), tol=1e-12)


def _stream_state(helm):
    grid = helm.grid
    x, y = grid.coordinates
    g = 0.5 * np.cos(x + y) + 0.3 * np.sin(y)
    return anelastic_state(stream_velocity(g, grid, helm.rho0), helm)


# ---------- anelastic system ----------

def test_uniform_flow_is_steady():
    grid = TorusGrid(2, 16)
    helm = WeightedHelmholtz(TorusField.constant(grid, 1.0))
    v = np.stack([np.full(grid.shape, 0.3), np.full(grid.shape, -0.2)])
    snaps = evolve_anelastic(anelastic_state(v, helm), 0.5, helm, dt=0.05)
    assert snaps[-1].time == pytest.approx(0.5)
    assert np.max(np.abs(snaps[-1].v_values - v)) < 1e-12
    assert np.max(np.abs(snaps[-1].pi.values)) < 1e-12


def test_one_dimensional_flow_keeps_constant_momentum(cosine_rho0):
    helm = WeightedHelmholtz(cosine_rho0)
    v = (0.7 / helm.rho0)[None]
    snaps = evolve_anelastic(anelastic_state(v, helm), 0.2, helm, dt=0.01)
    assert np.max(np.abs(helm.rho0 * snaps[-1].v_values - 0.7)) < 1e-7


def test_constant_background_matches_incompressible_euler():
    config = load_scenario("const-rho0-2d-euler")
    grid = config.grid()
    helm = WeightedHelmholtz(config.rho0_field())
    v0 = stream_velocity(config.stream_field(), grid, helm.rho0)
    start = anelastic_state(v0, helm)

    snaps = evolve_anelastic(start, config.t_final, helm, dt=config.limit_dt)
    reference = evolve_euler_leray(v0, config.t_final, config.limit_dt, grid)
    assert np.max(np.abs(snaps[-1].v_values - reference)) < 1e-6

    e0 = kinetic_energy(start, helm.rho0)
    assert abs(kinetic_energy(snaps[-1], helm.rho0) - e0) < 1e-6 * e0


def test_weighted_divergence_stays_small(cosine_helm_2d):
    state = _stream_state(cosine_helm_2d)
    assert weighted_div_norm(state, cosine_helm_2d.rho0) <= 1e-8
    for _ in range(5):
        state = anelastic_step(state, 0.02, cosine_helm_2d)
    assert weighted_div_norm(state, cosine_helm_2d.rho0) <= 1e-8
    assert state.time == pytest.approx(0.1)


def test_projection_removes_gradient_component(cosine_helm_2d):
    helm = cosine_helm_2d
    grid = helm.grid
    x, y = grid.coordinates
    v = stream_velocity(np.sin(x) * np.cos(y), grid, helm.rho0) + grid.grad(np.cos(x + 2 * y))
    state = anelastic_state(v, helm)
    assert weighted_div_norm(state, helm.rho0) <= 1e-8


def test_cfl_violation(cosine_helm_2d):
    state = _stream_state(cosine_helm_2d)
    with pytest.raises(CFLViolation):
        anelastic_step(state, 1.0, cosine_helm_2d)
    check_cfl(np.zeros((2,) + cosine_helm_2d.grid.shape), cosine_helm_2d.grid, 1e3)


def test_stream_velocity_needs_two_dimensions(grid1d):
    with pytest.raises(GridError):
        stream_velocity(np.zeros(grid1d.shape), grid1d, np.ones(grid1d.shape))


def test_anelastic_rk4_is_fourth_order(cosine_helm_2d):
    start = _stream_state(cosine_helm_2d)
    finals = [
        evolve_anelastic(start, 0.48, cosine_helm_2d, dt=dt)[-1].v_values
        for dt in (0.04, 0.02, 0.01)
    ]
    grid = cosine_helm_2d.grid
    d1 = grid.norm(finals[0] - finals[1])
    d2 = grid.norm(finals[1] - finals[2])
    assert 3.8 <= np.log2(d1 / d2) <= 4.2


def test_snapshots_include_requested_outputs(cosine_helm_2d):
    snaps = evolve_anelastic(_stream_state(cosine_helm_2d), 0.1, cosine_helm_2d, dt=0.02, outputs=[0.05])
    assert [s.time for s in snaps] == pytest.approx([0.0, 0.05, 0.1])


# ---------- oscillating system ----------

def test_zero_fastwave_data_have_zero_rate(const_eig):
    helm = WeightedHelmholtz(TorusField.constant(const_eig.grid, 1.0))
    v = anelastic_state(np.full((1,) + const_eig.grid.shape, 0.7), helm)
    rate = oscillating_rhs(OscillatingState(np.zeros(const_eig.size, dtype=complex)), v, const_eig)
    assert np.all(rate == 0)


def test_oscillating_norm_is_conserved(const_eig, rng):
    grid = const_eig.grid
    helm = WeightedHelmholtz(TorusField.constant(grid, 1.0))
    v = anelastic_state(np.full((1,) + grid.shape, 0.7), helm)
    forms = resonant_forms(const_eig)
    state = _low_mode_state(const_eig, rng)
    n0 = state.norm_sq(grid.volume)
    for _ in range(100):
        state = oscillating_step(state, v, 1e-2, const_eig, forms)
    assert state.time == pytest.approx(1.0)
    assert abs(state.norm_sq(grid.volume) - n0) < 1e-7 * n0


def test_mode_count_mismatch(const_eig):
    helm = WeightedHelmholtz(TorusField.constant(const_eig.grid, 1.0))
    v = anelastic_state(np.zeros((1,) + const_eig.grid.shape), helm)
    bad = OscillatingState(np.zeros(3, dtype=complex))
    with pytest.raises(EigenError):
        oscillating_rhs(bad, v, const_eig)
    with pytest.raises(EigenError):
        oscillating_step(bad, v, 0.1, const_eig)


# ---------- coupled evolution ----------

def test_zero_data_stay_zero(const_eig):
    grid = const_eig.grid
    helm = WeightedHelmholtz(TorusField.constant(grid, 1.0))
    a0 = anelastic_state(np.zeros((1,) + grid.shape), helm)
    o0 = OscillatingState(np.zeros(const_eig.size, dtype=complex))
    traj = coupled_evolve(a0, o0, 0.1, helm, const_eig, dt=0.05, outputs=[0.05])
    assert list(traj.series.columns) == LIMIT_SERIES_COLUMNS
    assert traj.times == pytest.approx([0.0, 0.05, 0.1])
    assert traj.series[["kinetic_energy", "v0_norm_sq", "combined_energy"]].abs().max().max() == 0.0


def test_coupled_series_conserves_energy(const_eig, rng):
    grid = const_eig.grid
    helm = WeightedHelmholtz(TorusField.constant(grid, 1.0))
    a0 = anelastic_state(np.full((1,) + grid.shape, 0.7), helm)
    o0 = _low_mode_state(const_eig, rng)
    traj = coupled_evolve(a0, o0, 0.5, helm, const_eig, dt=1e-2, outputs=[0.25])
    series = traj.series
    assert len(series) == 3
    assert series["kinetic_energy"].iloc[0] == pytest.approx(0.5 * 0.49 * 2 * np.pi, rel=1e-12)
    drift = series["combined_energy"].max() - series["combined_energy"].min()
    assert drift < 1e-7 * series["combined_energy"].iloc[0]
    assert series["div_norm"].max() < 1e-10


def test_illprep_oscillating_energy_is_constant(illprep_config, illprep_eig):
    config = illprep_config
    helm = WeightedHelmholtz(config.rho0_field(), tol=config.tolerances.projection)
    a0, o0 = limit_initial_data(config.initial_spec(), helm, illprep_eig)
    forms = resonant_forms(illprep_eig, config.tolerances.resonance, config.tolerances.gap)
    traj = coupled_evolve(
        a0, o0, 1.0, helm, illprep_eig,
        dt=config.limit_dt, outputs=[0.25, 0.5, 0.75], forms=forms,
    )
    norms = traj.series["v0_norm_sq"]
    assert len(norms) == 5
    assert norms.iloc[0] > 0.1
    assert norms.max() - norms.min() < 1e-7 * norms.iloc[0]


def test_coupled_evolve_rejects_mixed_grids(const_eig, cosine_rho0):
    helm = WeightedHelmholtz(cosine_rho0)
    a0 = anelastic_state(np.zeros((1,) + cosine_rho0.grid.shape), helm)
    with pytest.raises(GridError):
        coupled_evolve(a0, OscillatingState(np.zeros(const_eig.size, dtype=complex)), 0.1, helm, const_eig)


# ---------- limit initial data ----------

def test_limit_initial_data_from_wkb_data(cosine_rho0, cosine_eig):
    grid = cosine_rho0.grid
    (x,) = grid.coordinates
    spec = InitialDataSpec(
        rho0=cosine_rho0,
        phi0=TorusField.scalar(grid, np.cos(x)),
        s0=TorusField.scalar(grid, 0.3 * np.sin(x)),
    )
    helm = WeightedHelmholtz(cosine_rho0, tol=1e-12)
    a0, o0 = limit_initial_data(spec, helm, cosine_eig)

    # the 1D current 0.3 rho0 cos x has no weighted-divergence-free part
    assert np.max(np.abs(a0.v_values)) < 1e-8
    G = reconstruct(o0.vector(grid), cosine_eig)
    assert np.max(np.abs(G.scalar - np.cos(x))) < 1e-6
    expected = np.sqrt(helm.rho0) * 0.3 * np.cos(x)
    assert np.max(np.abs(G.vector[0] - expected)) < 1e-6


def test_limit_initial_data_from_wave_function(cosine_rho0, cosine_eig):
    grid = cosine_rho0.grid
    (x,) = grid.coordinates
    spec = InitialDataSpec(
        rho0=cosine_rho0,
        phi0=TorusField.scalar(grid, np.cos(x)),
        s0=TorusField.scalar(grid, 0.3 * np.sin(x)),
    )
    helm = WeightedHelmholtz(cosine_rho0, tol=1e-12)
    eps = 0.05
    a_wave, o_wave = limit_initial_data_from_wave(build_initial_state(spec, eps, 1.0), helm, cosine_eig)
    a_spec, o_spec = limit_initial_data(spec, helm, cosine_eig)

    # the wave function carries J = rho (grad S0) = (rho0 + eps phi0) grad S0
    assert np.max(np.abs(o_wave.coeffs - o_spec.coeffs)) < 10 * eps
    assert abs(o_wave.mean - o_spec.mean) < 1e-10
    assert np.max(np.abs(a_wave.v_values - a_spec.v_values)) < 10 * eps
