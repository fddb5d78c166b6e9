from collections.abc import Generator
from contextlib import contextmanager
from pathlib import Path

from sqlalchemy.engine import Engine
from sqlmodel import Session, SQLModel, create_engine

from app.config import settings
from app import models  # noqa: F401  registers the table models on SQLModel.metadata


def get_engine(path: Path | str | None = None) -> Engine:
    """Engine for the run-record store; tables are created on first use."""
    if path is None:
        uri = settings.DATABASE_URI
        Path(settings.OUTPUT_DIR).mkdir(parents=True, exist_ok=True)
    else:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        uri = f'sqlite:///{path}'
    engine = create_engine(uri)
    SQLModel.metadata.create_all(engine)
    return engine


@contextmanager
def session_scope(engine: Engine) -> Generator[Session, None, None]:
    with Session(engine) as session:
        yield session
