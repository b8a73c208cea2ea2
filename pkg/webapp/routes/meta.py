# webapp/routes/meta.py

from flask import Blueprint, jsonify, request

from anelastic import constants
from anelastic.errors import EigenError, ScenarioConfigError
from anelastic.loaders import bundled_scenarios
from anelastic.services import get_spectrum_cached

API_VERSION = "1.0"

meta_bp = Blueprint("meta", __name__, url_prefix="/api")


@meta_bp.route("/meta", methods=["GET"])
def meta():
    return jsonify(
        {
            "version": API_VERSION,
            "scenarios": bundled_scenarios(),
            "tolerances": {
                "projection": constants.PROJECTION_TOL,
                "cluster": constants.CLUSTER_REL_TOL,
                "resonance": constants.RESONANCE_REL_TOL,
                "gap": constants.GAP_TOL,
                "cfl": constants.CFL_NUMBER,
            },
            "retainedModes": constants.DEFAULT_RETAINED_MODES,
        }
    )


@meta_bp.route("/spectrum", methods=["GET"])
def spectrum():
    scenario = request.args.get("scenario")
    if not scenario:
        return jsonify({"error": "scenario query parameter is required"}), 400
    resolution = request.args.get("resolution", type=int)
    try:
        payload = get_spectrum_cached(scenario, resolution)
    except ScenarioConfigError as exc:
        return jsonify({"error": str(exc)}), 404
    except EigenError as exc:
        return jsonify({"error": str(exc)}), 422
    return jsonify(payload)
