# webapp/routes/runs.py

from flask import Blueprint, jsonify

from db import SessionLocal
from models_aggregates import RunRecord

runs_bp = Blueprint("runs", __name__, url_prefix="/api/runs")


@runs_bp.route("", methods=["GET"])
def list_runs():
    session = SessionLocal()
    try:
        rows = (
            session.query(RunRecord)
            .order_by(RunRecord.created_at.desc(), RunRecord.run_id)
            .all()
        )
        return jsonify({"runs": [r.to_json() for r in rows]})
    finally:
        session.close()


@runs_bp.route("/<run_id>", methods=["GET"])
def get_run(run_id: str):
    session = SessionLocal()
    try:
        run = session.get(RunRecord, run_id)
        if run is None:
            return jsonify({"error": f"unknown run {run_id}"}), 404
        payload = run.to_json()
        payload["table"] = [r.to_json() for r in run.rows]
        return jsonify(payload)
    finally:
        session.close()
