# db.py
import os

from dotenv import load_dotenv
from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

load_dotenv()

DB_URL = os.getenv("ANELASTIC_DB_URL", "sqlite:///anelastic_runs.db")

engine = create_engine(DB_URL, future=True, echo=False)
SessionLocal = sessionmaker(bind=engine, autoflush=False, autocommit=False)

Base = declarative_base()


def init_db():
    # Ensure run-index models are registered with Base metadata
    import models_aggregates  # noqa: F401

    Base.metadata.create_all(bind=engine)
