import hashlib
import json
import os
from pathlib import Path
from typing import Any

from pydantic import ValidationError, computed_field
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.exceptions import ConfigError
from app.models.experiment import ExperimentConfig

class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        env_prefix='GSLAB_',
        case_sensitive=True,
    )

    # Run-record store
    OUTPUT_DIR: Path = Path('results')
    DB_NAME: str = 'runs.db'

    @computed_field  # type: ignore[prop-decorator]
    @property
    def DATABASE_URI(self) -> str:
        return f'sqlite:///{self.OUTPUT_DIR / self.DB_NAME}'

    # Application settings
    APP_NAME: str = 'ground-state-lab'
    APP_VERSION: str = '0.1.0'
    SCHEMA_VERSION: int = 1
    LOG_LEVEL: str = 'INFO'
    JOBS: int = os.cpu_count() or 1

settings = Settings()


def _coerce_scalar(raw: str) -> Any:
    """Best-effort typing of a flat config value; pydantic does the strict part."""
    text = raw.strip()
    lowered = text.lower()
    if lowered in ('true', 'yes', 'on'):
        return True
    if lowered in ('false', 'no', 'off'):
        return False
    try:
        return int(text, 0)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_flat_config(text: str) -> dict[str, Any]:
    """Parse `key = value` lines; `#` starts a comment, commas make lists."""
    data: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", field=None)
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key", field=None)
        if key in _LIST_KEYS:
            data[key] = [_coerce_scalar(item) for item in value.split(',') if item.strip()]
        else:
            data[key] = _coerce_scalar(value)
    return data


_LIST_KEYS = frozenset(name for name, info in ExperimentConfig.model_fields.items()
                       if getattr(info.annotation, '__origin__', None) in (list, tuple))


def load_experiment_config(path: Path | str | None, **overrides: Any) -> ExperimentConfig:
    """Load and validate an experiment config (flat key/value or JSON); no path means defaults."""
    data = {} if path is None else _read_config(Path(path))
    data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = '.'.join(str(part) for part in first['loc']) or None
        raise ConfigError(f"{field}: {first['msg']}", field=field) from exc


def _read_config(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", field=None) from exc

    if path.suffix.lower() == '.json' or text.lstrip().startswith('{'):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}", field=None) from exc
    else:
        data = parse_flat_config(text)
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping", field=None)
    return data


def config_hash(config: ExperimentConfig) -> str:
    """Stable short digest of the validated config, embedded in every artifact.

    Output location and worker count do not change results and are left out.
    """
    payload = json.dumps(config.model_dump(mode='json', exclude={'output_dir', 'jobs'}), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]
