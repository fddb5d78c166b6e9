# Import all table models here to ensure they are registered with SQLModel
from .sweep import SweepRecord # noqa
