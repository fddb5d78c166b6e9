"""Self-describing output files.

CSV and plot-data files start with ``# key: value`` lines; JSON files carry the
same fields under ``meta``. Nothing time-dependent is written, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from app.config import config_hash, settings
from app.models.experiment import ExperimentConfig

logger = logging.getLogger(__name__)


def artifact_meta(config: ExperimentConfig | None = None, seed: int | None = None, **extra: Any) -> dict[str, Any]:
    meta: dict[str, Any] = {
        'schema_version': settings.SCHEMA_VERSION,
        'tool_version': f'{settings.APP_NAME} {settings.APP_VERSION}',
    }
    if config is not None:
        meta['config_hash'] = config_hash(config)
    meta['seed'] = None if seed is None else int(seed)
    meta.update(extra)
    return meta


def _format(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return '' if value is None else str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _header_lines(meta: dict[str, Any]) -> list[str]:
    # null, as in the JSON meta block, for fields that do not apply
    return [f'# {key}: {"null" if meta[key] is None else _format(meta[key])}\n' for key in sorted(meta)]


def write_csv(path: Path | str, meta: dict[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        handle.writelines(_header_lines(meta))
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow([_format(value) for value in row])
            count += 1
    logger.debug('wrote %d rows to %s', count, path)
    return path


def read_csv(path: Path | str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Header fields and rows of a file written by `write_csv`."""
    meta: dict[str, str] = {}
    body: list[str] = []
    with Path(path).open(encoding='utf-8') as handle:
        for line in handle:
            if line.startswith('# '):
                key, _, value = line[2:].rstrip('\n').partition(': ')
                meta[key] = value
            else:
                body.append(line)
    return meta, list(csv.DictReader(body))


def write_json(path: Path | str, meta: dict[str, Any], payload: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'meta': meta, **payload}
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    logger.debug('wrote %s', path)
    return path


def write_curve(path: Path | str, meta: dict[str, Any], xs: Iterable[float], ys: Iterable[float]) -> Path:
    """Two whitespace-separated columns per line, for plotting tools."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = _header_lines(meta)
    lines.extend(f'{_format(float(x))} {_format(float(y))}\n' for x, y in zip(xs, ys))
    path.write_text(''.join(lines), encoding='utf-8')
    return path
