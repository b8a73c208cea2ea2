# models_aggregates.py
from __future__ import annotations

from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, UniqueConstraint
from sqlalchemy.orm import relationship

from db import Base


class RunRecord(Base):
    """
    One indexed run directory (written by `converge` or the rebuild script).
    """
    __tablename__ = "runs"

    run_id = Column(String, primary_key=True)
    scenario = Column(String, index=True, nullable=False)
    run_dir = Column(String, nullable=False)

    dim = Column(Integer, nullable=False)
    points = Column(Integer, nullable=False)
    alpha = Column(Float, nullable=False)
    t_final = Column(Float, nullable=True)
    eps_list = Column(String, nullable=False)  # comma separated, config order

    # "ok" when every eps row succeeded, otherwise "partial"
    status = Column(String, nullable=False, default="ok")

    created_at = Column(DateTime, default=datetime.utcnow)
    updated_at = Column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)

    rows = relationship(
        "ConvergenceRecord",
        back_populates="run",
        cascade="all, delete-orphan",
        order_by="ConvergenceRecord.position",
    )

    def to_json(self) -> dict:
        return {
            "runId": self.run_id,
            "scenario": self.scenario,
            "runDir": self.run_dir,
            "dim": self.dim,
            "points": self.points,
            "alpha": self.alpha,
            "tFinal": self.t_final,
            "eps": [float(e) for e in self.eps_list.split(",") if e],
            "status": self.status,
            "createdAt": self.created_at.isoformat() if self.created_at else None,
        }


class ConvergenceRecord(Base):
    """
    One row of a run's convergence table (one per eps).
    """
    __tablename__ = "convergence_rows"

    id = Column(Integer, primary_key=True)
    run_id = Column(String, ForeignKey("runs.run_id"), index=True, nullable=False)
    position = Column(Integer, nullable=False)

    eps = Column(Float, nullable=False)
    sup_density_error = Column(Float, nullable=True)
    max_weak_defect = Column(Float, nullable=True)
    h0 = Column(Float, nullable=True)
    max_h = Column(Float, nullable=True)
    max_w = Column(Float, nullable=True)
    max_s = Column(Float, nullable=True)
    error = Column(Text, nullable=True)

    run = relationship("RunRecord", back_populates="rows")

    __table_args__ = (
        UniqueConstraint("run_id", "position", name="uix_run_position"),
    )

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "sup_density_error": self.sup_density_error,
            "max_weak_defect": self.max_weak_defect,
            "H0": self.h0,
            "max_H": self.max_h,
            "max_W": self.max_w,
            "max_S": self.max_s,
            "error": self.error or "",
        }
