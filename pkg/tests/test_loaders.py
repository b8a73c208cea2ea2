import json

import numpy as np
import pandas as pd
import pytest

from anelastic.constants import BUNDLED_SCENARIOS, DEFAULT_RETAINED_MODES
from anelastic.errors import ScenarioConfigError
from anelastic.loaders import bundled_scenarios, load_scenario, parse_scenario, parse_terms

MINIMAL = """
[grid]
dim = 1
points = 32
"""


def _scenario(body: str, grid: str = MINIMAL) -> str:
    return grid + body


# ---------- grammar and defaults ----------

def test_minimal_scenario_defaults():
    cfg = parse_scenario(MINIMAL, name="minimal")
    assert cfg.name == "minimal"
    assert cfg.background == "constant"
    assert cfg.eps == (0.1,)
    assert cfg.retained == DEFAULT_RETAINED_MODES
    assert cfg.tolerances.resonance is None
    times = cfg.output_times()
    assert len(times) == 21
    assert times[0] == 0.0 and times[-1] == cfg.t_final


def test_trig_terms():
    terms = parse_terms("cos 0.5 1 1, sin -0.3 2 0", 2, "[initial] phi0")
    assert [(t.kind, t.amplitude, t.mode) for t in terms] == [("cos", 0.5, (1, 1)), ("sin", -0.3, (2, 0))]


def test_full_scenario_is_parsed():
    cfg = parse_scenario(
        _scenario(
            """
[background]
kind = cosine
mean = 1.0
amplitude = 0.3
mode = 2

[initial]
phi0 = cos 1.0 1
s0 = sin 0.2 3
winding = 0.5

[run]
eps = 0.2, 0.1
t_final = 0.5
output_every = 0.1
seed = 11
limit_dt = 0.005

[tolerances]
projection = 1e-12
gap = 1e-4

[modes]
retained = 12
"""
        ),
        name="full",
    )
    assert cfg.rho0_mode == (2,)
    assert cfg.winding == (0.5,)
    assert cfg.eps == (0.2, 0.1)
    assert cfg.tolerances.projection == 1e-12
    assert cfg.tolerances.gap == 1e-4
    assert cfg.retained == 12
    assert cfg.limit_dt == 0.005
    assert cfg.output_times() == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])

    rho0 = cfg.rho0_field().values[0]
    (x,) = cfg.grid().coordinates
    assert np.allclose(rho0, 1.0 + 0.3 * np.cos(2 * x))
    spec = cfg.initial_spec()
    assert np.allclose(spec.phi0_values(), np.cos(x))
    assert np.allclose(spec.s0_values(), 0.2 * np.sin(3 * x))


@pytest.mark.parametrize(
    "text",
    [
        "[run]\neps = 0.1\n",
        "[grid]\ndim = 1\n",
        "[grid]\ndim = one\npoints = 32\n",
        "[grid]\ndim = 1\npoints = 12\n",
        _scenario("[initial]\nphi0 = cos 0.2\n"),
        _scenario("[initial]\nphi0 = tan 0.2 1\n"),
        _scenario("[run]\neps = 0.1, 0.2\n"),
        _scenario("[run]\neps = -0.1\n"),
        _scenario("[run]\nt_final = 1.0\noutput_every = 0\n"),
        _scenario("[background]\nkind = gaussian\n"),
        _scenario("[background]\nkind = tabulated\n"),
        _scenario("[limit]\nstream = cos 0.5 1\n"),
        "[grid]\ndim = 2\npoints = 16\n[initial]\nwinding = 1.0\n",
        _scenario("[tolerances]\ngap = -1\n"),
        _scenario("[modes]\nretained = 0\n"),
        "[grid\ndim = 1\n",
    ],
)
def test_malformed_scenarios(text):
    with pytest.raises(ScenarioConfigError):
        parse_scenario(text)


# ---------- bundled scenarios ----------

def test_bundled_scenarios_are_listed():
    assert bundled_scenarios() == sorted(BUNDLED_SCENARIOS)
    for name in BUNDLED_SCENARIOS:
        assert load_scenario(name).name == name


def test_scenario_lookup_accepts_directory_prefix():
    cfg = load_scenario("examples/illprep-1d")
    assert cfg.name == "illprep-1d"
    assert cfg.points == 256
    assert cfg.eps == (0.2, 0.1, 0.05)
    assert cfg.text.startswith("#")


def test_unknown_scenario():
    with pytest.raises(ScenarioConfigError):
        load_scenario("no-such-scenario")


def test_bundled_names_resolve_from_another_scenarios_dir(tmp_path):
    (tmp_path / "local.ini").write_text(MINIMAL)
    (tmp_path / "wellprep-1d.ini").write_text(MINIMAL)

    assert load_scenario("illprep-1d", scenarios_dir=tmp_path).points == 256
    # a local file shadows the bundled one
    assert load_scenario("wellprep-1d", scenarios_dir=tmp_path).points == 32
    assert load_scenario("local", scenarios_dir=tmp_path).name == "local"
    assert bundled_scenarios(tmp_path) == sorted(set(BUNDLED_SCENARIOS) | {"local"})
    with pytest.raises(ScenarioConfigError):
        load_scenario("illprep-2d", scenarios_dir=tmp_path)


def test_stream_function_scenario():
    cfg = load_scenario("const-rho0-2d-euler")
    g = cfg.stream_field()
    x, y = cfg.grid().coordinates
    assert np.allclose(g, 0.5 * np.cos(x + y) + 0.3 * np.sin(2 * x + y))
    assert load_scenario("cosine-rho0-1d").stream_field() is None


# ---------- overrides ----------

def test_overrides():
    cfg = load_scenario("illprep-1d").with_overrides(eps=[0.3, 0.1], resolution=64)
    assert cfg.eps == (0.3, 0.1)
    assert cfg.points == 64
    with pytest.raises(ScenarioConfigError):
        load_scenario("illprep-1d").with_overrides(eps=[0.1, 0.3])
    with pytest.raises(ScenarioConfigError):
        load_scenario("illprep-1d").with_overrides(resolution=100)


# ---------- noise ----------

def test_noise_is_seeded():
    text = _scenario("[initial]\nnoise = 0.1\n[run]\nseed = {seed}\n")
    a = parse_scenario(text.format(seed=4)).initial_spec().phi0_values()
    b = parse_scenario(text.format(seed=4)).initial_spec().phi0_values()
    c = parse_scenario(text.format(seed=5)).initial_spec().phi0_values()
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert np.max(np.abs(a)) == pytest.approx(0.1)
    assert abs(np.mean(a)) < 1e-12


# ---------- tabulated inputs ----------

def test_tabulated_background(tmp_path):
    x = np.arange(32) * 2 * np.pi / 32
    pd.DataFrame({"rho0": 1.0 + 0.1 * np.sin(x)}).to_csv(tmp_path / "rho0.csv", index=False)
    path = tmp_path / "tab.ini"
    path.write_text(_scenario("[background]\nkind = tabulated\nfile = rho0.csv\n"))
    cfg = load_scenario(str(path))
    assert np.allclose(cfg.rho0_field().values[0], 1.0 + 0.1 * np.sin(x))
    with pytest.raises(ScenarioConfigError):
        cfg.with_overrides(resolution=64)

    pd.DataFrame({"rho0": np.ones(16)}).to_csv(tmp_path / "rho0.csv", index=False)
    with pytest.raises(ScenarioConfigError):
        load_scenario(str(path)).rho0_field()


def test_missing_tabulated_file(tmp_path):
    path = tmp_path / "tab.ini"
    path.write_text(_scenario("[background]\nkind = tabulated\nfile = nowhere.csv\n"))
    with pytest.raises(ScenarioConfigError):
        load_scenario(str(path)).rho0_field()


def test_raw_psi0_file(tmp_path):
    psi = np.exp(2j * np.arange(32) * 2 * np.pi / 32)
    pd.DataFrame({"re": psi.real, "im": psi.imag}).to_csv(tmp_path / "psi0.csv", index=False)
    path = tmp_path / "raw.ini"
    path.write_text(_scenario("[initial]\npsi0_file = psi0.csv\n"))
    spec = load_scenario(str(path)).initial_spec()
    assert spec.psi0 is not None
    assert np.allclose(spec.psi0.values[0], psi)


# ---------- serialization ----------

def test_resolved_config_is_json():
    cfg = load_scenario("illprep-1d")
    data = cfg.to_json()
    assert "text" not in data
    assert data["phi0"] == ["cos 1.0 1"]
    assert data["s0"] == ["sin 0.3 1"]
    assert len(data["output_times"]) == 21
    assert json.loads(json.dumps(data))["name"] == "illprep-1d"
