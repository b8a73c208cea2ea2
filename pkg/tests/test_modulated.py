import numpy as np
import pytest

from anelastic.constants import MODENERGY_COLUMNS
from anelastic.errors import GridError, SnapshotError, TimeMismatch
from anelastic.fastwave import build_eigensystem
from anelastic.gpe import InitialDataSpec, WaveState, build_initial_state, evolve
from anelastic.helmholtz import WeightedHelmholtz
from anelastic.limits import AnelasticState, OscillatingState, anelastic_state, coupled_evolve, limit_initial_data
from anelastic.loaders import load_scenario
from anelastic.modulated import convergence_functionals, modulated_energy
from anelastic.spectral import TorusField


def _zero_limit(rho0, eig, time=0.0):
    grid = rho0.grid
    v = anelastic_state(np.zeros((grid.dim,) + grid.shape), WeightedHelmholtz(rho0))
    return AnelasticState(v.v, v.pi, time), OscillatingState(np.zeros(eig.size, dtype=complex), 0.0, time)


@pytest.fixture(scope="module")
def wellprep():
    config = load_scenario("wellprep-1d")
    rho0 = config.rho0_field()
    helm = WeightedHelmholtz(rho0, tol=1e-12)
    eig = build_eigensystem(rho0, retained=config.retained)
    spec = config.initial_spec()
    a0, o0 = limit_initial_data(spec, helm, eig)
    return config, helm, eig, spec, a0, o0


# ---------- modulated energy ----------

def test_uniform_state_has_zero_energy(const_eig):
    grid = const_eig.grid
    rho0 = TorusField.constant(grid, 1.0)
    wave = WaveState(TorusField.scalar(grid, np.ones(grid.shape, dtype=complex)), 0.1, 1.0, rho0)
    v, V0 = _zero_limit(rho0, const_eig)
    r = modulated_energy(wave, v, V0, const_eig)
    assert abs(r.H) < 1e-14
    assert abs(r.W) < 1e-14
    assert abs(r.S) < 1e-14
    assert r.densityError == 0.0


def test_real_wavefunction_carries_quantum_pressure_only(cosine_rho0, cosine_eig):
    eps = 0.1
    grid = cosine_rho0.grid
    sqrt_rho0 = np.sqrt(cosine_rho0.values[0])
    wave = WaveState(TorusField.scalar(grid, sqrt_rho0.astype(complex)), eps, 1.0, cosine_rho0)
    v, V0 = _zero_limit(cosine_rho0, cosine_eig)
    r = modulated_energy(wave, v, V0, cosine_eig)
    expected = 0.5 * eps ** 2 * grid.integrate(np.sum(grid.grad(sqrt_rho0) ** 2, axis=0))
    assert r.H == pytest.approx(expected, rel=1e-10)
    assert r.quantumPart == pytest.approx(expected, rel=1e-10)
    assert abs(r.currentPart) < 1e-20
    assert abs(r.fluctuationPart) < 1e-20


def test_regrouped_energy_and_current_bound(cosine_rho0, cosine_eig, rng):
    grid = cosine_rho0.grid
    (x,) = grid.coordinates
    spec = InitialDataSpec(
        rho0=cosine_rho0,
        phi0=TorusField.scalar(grid, np.cos(x)),
        s0=TorusField.scalar(grid, 0.3 * np.sin(x)),
    )
    wave = build_initial_state(spec, 0.1, 1.0)
    helm = WeightedHelmholtz(cosine_rho0)
    v = anelastic_state((0.4 / helm.rho0)[None], helm)
    c = np.zeros(cosine_eig.size, dtype=complex)
    c[:6] = 0.1 * (rng.standard_normal(6) + 1j * rng.standard_normal(6))
    V0 = OscillatingState(c, 0.05, 0.0)

    r = modulated_energy(wave, v, V0, cosine_eig)
    assert r.H > 0
    assert r.H_regrouped == pytest.approx(r.H, rel=1e-10)
    assert r.currentDefectL43 <= r.currentDefectBound * (1 + 1e-12)
    assert len(r.weakCurrentDefects) == 9
    assert set(r.to_json()) >= {"H", "W", "S", "weakCurrentDefects", "currentDefectBound"}


def test_well_prepared_data_start_with_zero_energy(wellprep):
    config, helm, eig, spec, a0, o0 = wellprep
    wave = build_initial_state(spec, config.eps[1], config.alpha)
    r = modulated_energy(wave, a0, o0, eig)
    assert abs(r.H) < 1e-10
    assert abs(r.W) < 1e-12
    assert abs(r.S) < 1e-12
    assert np.max(np.abs(a0.v_values - 1.0)) < 1e-10
    assert np.max(np.abs(o0.coeffs)) < 1e-10


def test_inputs_must_share_time_and_grid(cosine_rho0, cosine_eig, const_eig):
    grid = cosine_rho0.grid
    wave = WaveState(TorusField.scalar(grid, np.sqrt(cosine_rho0.values[0]).astype(complex)), 0.1, 1.0, cosine_rho0)
    v, _ = _zero_limit(cosine_rho0, cosine_eig)
    late = OscillatingState(np.zeros(cosine_eig.size, dtype=complex), 0.0, 0.3)
    with pytest.raises(TimeMismatch):
        modulated_energy(wave, v, late, cosine_eig)

    _, V0 = _zero_limit(cosine_rho0, const_eig)
    with pytest.raises(GridError):
        modulated_energy(wave, v, V0, const_eig)


# ---------- convergence functionals ----------

def test_functionals_along_a_well_prepared_run(wellprep):
    config, helm, eig, spec, a0, o0 = wellprep
    eps = config.eps[1]
    start = build_initial_state(spec, eps, config.alpha)
    gpe = [start] + evolve(start, 0.1, outputs=[0.05])
    limit = coupled_evolve(a0, o0, 0.1, helm, eig, dt=0.01, outputs=[0.05])

    result = convergence_functionals(gpe, limit, eig)
    assert list(result.series.columns) == MODENERGY_COLUMNS
    assert len(result.series) == 3
    assert (result.series["eps"] == eps).all()
    assert result.series["H"].abs().max() < 1e-8
    assert result.series["densityError"].max() < 1e-10

    summary = result.summary()
    assert set(summary) == {"sup_density_error", "max_weak_defect", "H0", "max_H", "max_W", "max_S"}
    assert summary["max_weak_defect"] < 1e-8
    assert result.integrated_defects[0].max() == 0.0


def test_functionals_need_aligned_snapshots(wellprep):
    config, helm, eig, spec, a0, o0 = wellprep
    start = build_initial_state(spec, config.eps[0], config.alpha)
    gpe = [start] + evolve(start, 0.1, outputs=[0.05])
    limit = coupled_evolve(a0, o0, 0.1, helm, eig, dt=0.01, outputs=[0.04])
    with pytest.raises(SnapshotError):
        convergence_functionals([], limit, eig)
    with pytest.raises(SnapshotError):
        convergence_functionals(gpe[:2], limit, eig)
    with pytest.raises(SnapshotError):
        convergence_functionals(gpe, limit, eig)

