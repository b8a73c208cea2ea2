# scripts/rebuild_run_index.py
from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.append(str(ROOT))

from db import SessionLocal, init_db
from anelastic.errors import ScenarioConfigError
from anelastic.services import index_run_directory
from webapp.config import ANELASTIC_RUNS_DIR


def rebuild(runs_dir: Path, force: bool = False) -> int:
    init_db()
    session = SessionLocal()
    indexed = 0
    try:
        for run_dir in sorted(p for p in runs_dir.iterdir() if p.is_dir()):
            try:
                run_id = index_run_directory(session, run_dir, force=force)
            except ScenarioConfigError:
                print(f"[SKIP] {run_dir} (not a run directory)")
                continue
            if run_id is None:
                print(f"[SKIP] {run_dir.name} already indexed (use --force)")
                continue
            indexed += 1
            print(f"[OK] indexed {run_id}")
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
    return indexed


def main():
    parser = argparse.ArgumentParser(description="Rescan run directories into the run index.")
    parser.add_argument("--runs-dir", type=Path, default=Path(ANELASTIC_RUNS_DIR))
    parser.add_argument("--force", action="store_true", help="Re-index runs that are already present.")
    args = parser.parse_args()

    if not args.runs_dir.is_dir():
        print(f"[ERR] runs directory not found: {args.runs_dir}")
        sys.exit(1)
    n = rebuild(args.runs_dir, force=args.force)
    print(f"[DONE] {n} run(s) indexed from {args.runs_dir}")


if __name__ == "__main__":
    main()
