import json
import logging
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from django.conf import settings

from .services import BASE_COLUMNS, EVENT_NAMES, TrialLog

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"
META_SUFFIX = ".meta.json"


class TrialLogStore:
    """CSV persistence for trial logs.

    Layout: one CSV per run with header
    `trial,setting_a,setting_b,outcome_a,outcome_b,heralded`, then optional
    `t_<event>,x_<event>,y_<event>,z_<event>` columns for the five events and an
    optional `hidden` column. Run metadata goes to a `<name>.meta.json` sidecar.
    """

    _SAFE_NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")

    @classmethod
    def _validate_name(cls, name: str) -> str:
        value = (name or "").strip()
        if not value:
            raise ValueError("log name is required")
        if not cls._SAFE_NAME_RE.fullmatch(value):
            raise ValueError("invalid log name: only letters/numbers/._- are allowed")
        return value

    @staticmethod
    def _sanitize_token(token: str) -> str:
        value = (token or "").strip()
        if not value:
            return ""
        return re.sub(r"[^A-Za-z0-9._-]+", "_", value)

    @classmethod
    def build_filename(cls, label: str, *, seed: int, trials: int) -> str:
        token = cls._sanitize_token(label) or "run"
        return f"{token}_seed{int(seed)}_n{int(trials)}.csv"

    @classmethod
    def resolve_path(cls, name: str, results_dir: Optional[Path] = None) -> Path:
        value = cls._validate_name(name)
        base = Path(results_dir) if results_dir else Path(settings.RESULTS_DIR)
        for candidate in (base / value, base / f"{value}.csv"):
            if candidate.exists() and candidate.is_file():
                return candidate
        raise FileNotFoundError(f"No trial log named {value} in {base}")

    @staticmethod
    def _columns(frame: pd.DataFrame, include_hidden: bool) -> list[str]:
        columns = list(BASE_COLUMNS)
        for name in EVENT_NAMES:
            event_cols = [f"{axis}_{name}" for axis in "txyz"]
            if all(c in frame.columns for c in event_cols):
                columns.extend(event_cols)
        if include_hidden and "hidden" in frame.columns:
            columns.append("hidden")
        return columns

    @classmethod
    def write(cls, log: TrialLog, csv_path: Path, *, include_hidden: bool = False, write_meta: bool = True) -> Path:
        """Write atomically: temp file first, then rename over the target."""
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        out = log.frame[cls._columns(log.frame, include_hidden)].copy()
        out["heralded"] = out["heralded"].astype(np.int8)
        temp_path = csv_path.with_suffix(f"{csv_path.suffix}.tmp")
        out.to_csv(temp_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        temp_path.replace(csv_path)
        if write_meta:
            meta_path = csv_path.with_name(csv_path.name + META_SUFFIX)
            temp_meta = meta_path.with_suffix(".tmp")
            temp_meta.write_text(json.dumps(log.meta, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
            temp_meta.replace(meta_path)
        logger.info("wrote %d trials to %s", len(out), csv_path)
        return csv_path

    @staticmethod
    def read(csv_path: Path) -> TrialLog:
        csv_path = Path(csv_path)
        if not csv_path.exists():
            raise FileNotFoundError(f"trial log not found: {csv_path}")
        frame = pd.read_csv(csv_path)
        missing = [c for c in BASE_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"trial log missing required columns {missing}: {csv_path.name}")

        heralded = frame["heralded"]
        if heralded.dtype == object:
            heralded = heralded.astype(str).str.strip().str.lower().map(
                {"1": True, "true": True, "0": False, "false": False}
            )
            if heralded.isna().any():
                raise ValueError(f"heralded column must hold 0/1 or true/false: {csv_path.name}")
        frame["heralded"] = heralded.astype(bool)

        for col in ("setting_a", "setting_b"):
            if not frame[col].isin([0, 1]).all():
                raise ValueError(f"{col} must be 0 or 1: {csv_path.name}")
        for col in ("outcome_a", "outcome_b"):
            if not frame[col].isin([1, -1, 0]).all():
                raise ValueError(f"{col} must be +1, -1 or 0: {csv_path.name}")
        frame = frame.astype({"trial": np.int64, "setting_a": np.int8, "setting_b": np.int8,
                              "outcome_a": np.int8, "outcome_b": np.int8})

        meta: dict = {}
        meta_path = csv_path.with_name(csv_path.name + META_SUFFIX)
        if meta_path.exists():
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        meta["file"] = csv_path.name
        meta["last_modified"] = datetime.fromtimestamp(csv_path.stat().st_mtime, tz=timezone.utc).isoformat()
        return TrialLog(frame, meta)
