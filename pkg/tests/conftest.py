import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# The run index engine is created at import of db.py; point it somewhere
# disposable before anything imports it.
_TMP = Path(tempfile.mkdtemp(prefix="anelastic-tests-"))
os.environ["ANELASTIC_DB_URL"] = f"sqlite:///{_TMP / 'runs.db'}"
os.environ["ANELASTIC_RUNS_DIR"] = str(_TMP / "runs")

from anelastic.fastwave import build_eigensystem  # noqa: E402
from anelastic.loaders import load_scenario  # noqa: E402
from anelastic.spectral import TorusField, TorusGrid  # noqa: E402
from webapp import create_app  # noqa: E402


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid1d():
    return TorusGrid(1, 64)


@pytest.fixture(scope="session")
def cosine_rho0():
    grid = TorusGrid(1, 128)
    (x,) = grid.coordinates
    return TorusField.scalar(grid, 1.0 + 0.2 * np.cos(x))


@pytest.fixture(scope="session")
def const_eig():
    """Constant background on N=64: kappa = j^2, each twice."""
    grid = TorusGrid(1, 64)
    return build_eigensystem(TorusField.constant(grid, 1.0), retained=30)


@pytest.fixture(scope="session")
def cosine_eig(cosine_rho0):
    return build_eigensystem(cosine_rho0, retained=30)


@pytest.fixture(scope="session")
def illprep_config():
    return load_scenario("illprep-1d")


@pytest.fixture(scope="session")
def illprep_eig(illprep_config):
    """Cosine background on N=256 with the 40 retained modes of the scenario."""
    cfg = illprep_config
    return build_eigensystem(
        cfg.rho0_field(), retained=cfg.retained, truncation=cfg.truncation, cluster_rel_tol=cfg.tolerances.cluster
    )


@pytest.fixture(scope="session")
def app():
    # Ensure Flask is in testing mode
    os.environ["FLASK_ENV"] = "testing"

    app = create_app()
    app.config.update(
        TESTING=True,
    )
    return app


@pytest.fixture()
def client(app):
    return app.test_client()


@pytest.fixture(scope="session")
def runs_dir():
    return Path(os.environ["ANELASTIC_RUNS_DIR"])
