# webapp/routes/__init__.py
# Blueprints: meta.py (/api/meta, /api/spectrum) and runs.py (/api/runs).
