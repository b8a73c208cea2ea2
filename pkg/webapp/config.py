# webapp/config.py

import os
from dotenv import load_dotenv

# Load .env into environment variables
load_dotenv()

# ---------------------------------------------------------------------------
# Module-level constants (imported by app.py, cli.py and scripts/)
# ---------------------------------------------------------------------------

ANELASTIC_RUNS_DIR = os.getenv("ANELASTIC_RUNS_DIR", "runs")
ANELASTIC_DB_URL = os.getenv("ANELASTIC_DB_URL", "sqlite:///anelastic_runs.db")
ANELASTIC_LOG_LEVEL = os.getenv("ANELASTIC_LOG_LEVEL", "INFO")
ANELASTIC_SCENARIOS_DIR = os.getenv("ANELASTIC_SCENARIOS_DIR")  # None -> bundled scenarios/
ANELASTIC_API_PORT = int(os.getenv("ANELASTIC_API_PORT", "5001"))
ANELASTIC_API_DEBUG = os.getenv("ANELASTIC_API_DEBUG", "0").lower() in ("1", "true", "yes")

# ---------------------------------------------------------------------------
# Flask Config object (used by create_app)
# ---------------------------------------------------------------------------

class Config:
    ANELASTIC_RUNS_DIR = ANELASTIC_RUNS_DIR
    ANELASTIC_DB_URL = ANELASTIC_DB_URL
    ANELASTIC_LOG_LEVEL = ANELASTIC_LOG_LEVEL
    ANELASTIC_SCENARIOS_DIR = ANELASTIC_SCENARIOS_DIR
