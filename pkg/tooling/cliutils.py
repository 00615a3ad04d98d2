"""Helpers shared by the management commands: exit codes, JSON output, option parsing."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

from django.conf import settings
from django.core.management.base import CommandError

from stats.estimators import NULL_CONVENTIONS, normalize_convention

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


def usage_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_USAGE)


def data_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_DATA)


def infeasible_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_INFEASIBLE)


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=str)


def load_json_file(path: str, *, what: str, error=usage_error):
    file_path = Path(path)
    if not file_path.exists():
        raise error(f"{what} not found: {file_path}")
    try:
        return json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise error(f"{what} is not valid JSON: {exc}") from exc


def parse_convention(value: Optional[str]) -> str:
    try:
        return normalize_convention(value or NULL_CONVENTIONS[0])
    except ValueError as exc:
        raise usage_error(str(exc)) from exc


def parse_seed(value: Optional[int]) -> int:
    seed = settings.BELL_DEFAULT_SEED if value is None else int(value)
    if not (0 <= seed < 2**64):
        raise usage_error("--seed must be a 64-bit unsigned integer")
    return seed


def parse_trials(value: Optional[int]) -> int:
    trials = settings.BELL_DEFAULT_TRIALS if value is None else int(value)
    if trials < 1:
        raise usage_error("--trials must be >= 1")
    return trials


def output_path(value: str) -> Path:
    """Bare file names go under RESULTS_DIR; anything with a directory is used as given."""
    path = Path(value)
    if not path.is_absolute() and path.parent == Path("."):
        return Path(settings.RESULTS_DIR) / path
    return path


def fmt(value, digits: int = 4) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return f"{value:.{digits}f}"
