"""Setting sources: where each trial's (a, b) comes from."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from lhv.strategies import HiddenVariableModel

logger = logging.getLogger(__name__)

SOURCE_KINDS = ("iid_uniform", "biased", "quasi_periodic", "external_bitstream", "adversary_correlated")
PREDICTABLE_KINDS = frozenset({"quasi_periodic"})


@dataclass(frozen=True)
class SettingSource:
    """Configuration of a setting source.

    kind:
        iid_uniform           independent fair bits on both sides
        biased                joint table p(a, b)
        quasi_periodic        setting flips every `period_a` / `period_b` trials
        external_bitstream    0/1 characters read from `bitstream_path`, two per trial
        adversary_correlated  settings drawn from p(a, b | lambda) of a physics model, with
                              p(a, b) from `table` (uniform when omitted)
    """

    kind: str = "iid_uniform"
    table: Optional[tuple[tuple[float, float], tuple[float, float]]] = None
    period_a: int = 1
    period_b: int = 2
    bitstream_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown setting source: {self.kind} (choose from {', '.join(SOURCE_KINDS)})")
        if self.kind == "biased" and self.table is None:
            raise ValueError("biased source needs a 2x2 table")
        if self.table is not None:
            table = np.asarray(self.table, dtype=float)
            if table.shape != (2, 2) or (table < 0).any() or abs(table.sum() - 1.0) > 1e-9:
                raise ValueError("setting table must be a non-negative 2x2 table summing to 1")
            object.__setattr__(self, "table", tuple(tuple(float(v) for v in row) for row in table))
        if self.kind == "quasi_periodic" and (int(self.period_a) < 1 or int(self.period_b) < 1):
            raise ValueError("quasi_periodic periods must be >= 1")
        if self.kind == "external_bitstream" and not self.bitstream_path:
            raise ValueError("external_bitstream source needs a bitstream path")

    @property
    def predictable(self) -> bool:
        return self.kind in PREDICTABLE_KINDS

    @property
    def label(self) -> str:
        return "predictable" if self.predictable else "unpredictable"

    def draw(
        self,
        n: int,
        rng: np.random.Generator,
        *,
        model: Optional[HiddenVariableModel] = None,
    ) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        """Return (setting_a, setting_b, hidden) for n trials.

        `hidden` holds the drawn lambda index for adversary_correlated sources and
        is None otherwise.
        """
        if self.kind == "iid_uniform":
            bits = rng.integers(0, 2, size=(n, 2), dtype=np.int8)
            return bits[:, 0], bits[:, 1], None
        if self.kind == "biased":
            flat = np.asarray(self.table, dtype=float).ravel()
            joint = rng.choice(4, size=n, p=flat / flat.sum())
            return (joint // 2).astype(np.int8), (joint % 2).astype(np.int8), None
        if self.kind == "quasi_periodic":
            k = np.arange(n)
            return ((k // int(self.period_a)) % 2).astype(np.int8), ((k // int(self.period_b)) % 2).astype(np.int8), None
        if self.kind == "external_bitstream":
            bits = read_bitstream(self.bitstream_path, 2 * n)
            return bits[0::2], bits[1::2], None
        return self._draw_correlated(n, rng, model)

    @property
    def setting_distribution(self) -> np.ndarray:
        """p(a, b) as a 2x2 array; uniform unless a table is configured."""
        if self.table is None:
            return np.full((2, 2), 0.25)
        return np.asarray(self.table, dtype=float)

    def _draw_correlated(
        self, n: int, rng: np.random.Generator, model: Optional[HiddenVariableModel]
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if model is None:
            raise ValueError("adversary_correlated source needs an lhv physics model")
        p_settings = self.setting_distribution
        if not model.is_conditional:
            marginal = np.asarray(model.prior, dtype=float)
            hidden = rng.choice(marginal.shape[0], size=n, p=marginal / marginal.sum())
            pair = rng.choice(4, size=n, p=p_settings.ravel())
            return (pair // 2).astype(np.int8), (pair % 2).astype(np.int8), hidden.astype(np.int64)
        # Joint p(a, b, lambda) = p(a, b) p(lambda | a, b); lambda first, then settings given lambda.
        joint = p_settings[:, :, None] * np.asarray(model.prior, dtype=float)
        marginal = joint.sum(axis=(0, 1))
        hidden = rng.choice(marginal.shape[0], size=n, p=marginal / marginal.sum())
        given = joint.reshape(4, -1).T
        totals = given.sum(axis=1, keepdims=True)
        given = np.divide(given, totals, out=np.zeros_like(given), where=totals > 0)
        cumulative = np.cumsum(given[hidden], axis=1)
        pair = np.minimum((rng.random(n)[:, None] > cumulative).sum(axis=1), 3)
        return (pair // 2).astype(np.int8), (pair % 2).astype(np.int8), hidden.astype(np.int64)

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind}
        if self.table is not None:
            data["table"] = [list(row) for row in self.table]
        if self.kind == "quasi_periodic":
            data["period_a"] = int(self.period_a)
            data["period_b"] = int(self.period_b)
        if self.kind == "external_bitstream":
            data["bitstream_path"] = str(self.bitstream_path)
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "SettingSource":
        table = data.get("table")
        return cls(
            kind=str(data.get("kind", "iid_uniform")),
            table=tuple(tuple(row) for row in table) if table is not None else None,
            period_a=int(data.get("period_a", 1)),
            period_b=int(data.get("period_b", 2)),
            bitstream_path=data.get("bitstream_path"),
        )


def read_bitstream(path, count: int) -> np.ndarray:
    """First `count` bits of a file of '0'/'1' characters; whitespace is ignored."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"bitstream not found: {path}")
    text = "".join(path.read_text(encoding="utf-8").split())
    bad = set(text) - {"0", "1"}
    if bad:
        raise ValueError(f"bitstream {path.name} contains characters other than 0/1: {sorted(bad)[:5]}")
    if len(text) < count:
        raise ValueError(f"bitstream {path.name} holds {len(text)} bits, {count} needed")
    logger.debug("read %d bits from %s", count, path)
    return (np.frombuffer(text[:count].encode("ascii"), dtype=np.uint8) - ord("0")).astype(np.int8)
