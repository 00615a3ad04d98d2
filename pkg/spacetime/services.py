"""Flat-spacetime causal checks with c = 1.

Units are up to the caller (seconds with light-seconds, years with lightyears);
every function only assumes light covers one unit of space per unit of time.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-9
ROUNDING = 8 * float(np.finfo(float).eps)
SPACELIKE = "spacelike"
TIMELIKE = "timelike"
LIGHTLIKE = "lightlike"

ARRANGEMENT_LABELS = ("choose_a", "choose_b", "emission", "outcome_a", "outcome_b")


@dataclass(frozen=True)
class SpacetimeEvent:
    label: str
    t: float
    x: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        coords = tuple(float(v) for v in self.x)
        if len(coords) != 3:
            raise ValueError(f"event {self.label!r} needs a 3-vector position")
        object.__setattr__(self, "x", coords)
        object.__setattr__(self, "t", float(self.t))
        if not all(math.isfinite(v) for v in (self.t, *coords)):
            raise ValueError(f"event {self.label!r} has non-finite coordinates")

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)

    def to_dict(self) -> dict:
        return {"label": self.label, "t": self.t, "x": self.x[0], "y": self.x[1], "z": self.x[2]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SpacetimeEvent":
        if "label" not in data or "t" not in data:
            raise ValueError("event entries need at least 'label' and 't'")
        return cls(
            label=str(data["label"]),
            t=data["t"],
            x=(data.get("x", 0.0), data.get("y", 0.0), data.get("z", 0.0)),
        )


@dataclass(frozen=True)
class Interval:
    first: str
    second: str
    s2: float
    classification: str

    def to_dict(self) -> dict:
        return {"first": self.first, "second": self.second, "s2": self.s2, "classification": self.classification}


@dataclass(frozen=True)
class ConditionVerdict:
    number: int
    description: str
    passed: bool
    intervals: tuple[Interval, ...]

    @property
    def violations(self) -> list[Interval]:
        return [] if self.passed else list(self.intervals)

    def to_dict(self) -> dict:
        return {
            "condition": self.number,
            "description": self.description,
            "passed": self.passed,
            "intervals": [i.to_dict() for i in self.intervals],
        }


@dataclass(frozen=True)
class ArrangementReport:
    verdicts: tuple[ConditionVerdict, ...]
    intervals: tuple[Interval, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def failed_conditions(self) -> list[int]:
        return [v.number for v in self.verdicts if not v.passed]

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "failed_conditions": self.failed_conditions,
            "conditions": [v.to_dict() for v in self.verdicts],
            "intervals": [i.to_dict() for i in self.intervals],
        }


@dataclass(frozen=True)
class ExclusionReport:
    exclusion_time: float
    latest_common_cause: float
    per_side: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "exclusion_time": self.exclusion_time,
            "latest_common_cause": self.latest_common_cause,
            "per_side": dict(self.per_side),
        }


class SpacetimeService:
    @staticmethod
    def _scales(e1: SpacetimeEvent, e2: SpacetimeEvent) -> tuple[float, float]:
        """Largest coordinate separation and largest absolute coordinate of the pair."""
        separation = max(abs(e2.t - e1.t), *(abs(b - a) for a, b in zip(e1.x, e2.x)))
        magnitude = max(abs(v) for v in (e1.t, e2.t, *e1.x, *e2.x))
        return separation, magnitude

    @staticmethod
    def _tolerance(e1: SpacetimeEvent, e2: SpacetimeEvent) -> float:
        """Lightlike band for s^2, relative to the separation (squared units).

        The rounding term covers differences of large absolute coordinates, so
        shifting both events in time does not change the verdict.
        """
        separation, magnitude = SpacetimeService._scales(e1, e2)
        return RELATIVE_TOLERANCE * separation * separation + ROUNDING * magnitude * separation

    @staticmethod
    def _time_tolerance(e1: SpacetimeEvent, e2: SpacetimeEvent) -> float:
        separation, magnitude = SpacetimeService._scales(e1, e2)
        return RELATIVE_TOLERANCE * separation + ROUNDING * magnitude

    @staticmethod
    def interval(e1: SpacetimeEvent, e2: SpacetimeEvent) -> Interval:
        """s^2 = dt^2 - |dx|^2 and its classification."""
        dt = e2.t - e1.t
        dx = e2.position - e1.position
        # Sorted squares so interval(e1, e2) == interval(e2, e1) bit for bit.
        s2 = dt * dt - float(math.fsum(sorted(dx * dx)))
        tol = SpacetimeService._tolerance(e1, e2)
        if s2 < -tol:
            kind = SPACELIKE
        elif s2 > tol:
            kind = TIMELIKE
        else:
            kind = LIGHTLIKE
        return Interval(e1.label, e2.label, s2, kind)

    @staticmethod
    def is_spacelike(e1: SpacetimeEvent, e2: SpacetimeEvent) -> bool:
        return SpacetimeService.interval(e1, e2).classification == SPACELIKE

    @staticmethod
    def in_causal_past(earlier: SpacetimeEvent, later: SpacetimeEvent) -> bool:
        """True when a signal at or below light speed from `earlier` can reach `later`."""
        interval = SpacetimeService.interval(earlier, later)
        if interval.classification == SPACELIKE:
            return False
        return later.t - earlier.t >= -SpacetimeService._time_tolerance(earlier, later)

    @staticmethod
    def pairwise_intervals(events: Sequence[SpacetimeEvent]) -> list[Interval]:
        events = list(events)
        return [
            SpacetimeService.interval(events[i], events[j])
            for i in range(len(events))
            for j in range(i + 1, len(events))
        ]

    @staticmethod
    def boost_x(event: SpacetimeEvent, velocity: float) -> SpacetimeEvent:
        """Lorentz boost along x with speed `velocity` (|velocity| < 1); y and z are unchanged."""
        if not abs(velocity) < 1.0:
            raise ValueError("boost velocity must satisfy |v| < 1")
        gamma = 1.0 / math.sqrt(1.0 - velocity * velocity)
        t = gamma * (event.t - velocity * event.x[0])
        x = gamma * (event.x[0] - velocity * event.t)
        return SpacetimeEvent(event.label, t, (x, event.x[1], event.x[2]))

    @staticmethod
    def check_locality_arrangement(
        choose_a: SpacetimeEvent,
        choose_b: SpacetimeEvent,
        emission: SpacetimeEvent,
        outcome_a: SpacetimeEvent,
        outcome_b: SpacetimeEvent,
    ) -> ArrangementReport:
        """Check the five-event arrangement needed to close the locality loophole.

        Conditions:
            1. outcome_a is spacelike from choose_b.
            2. outcome_b is spacelike from choose_a.
            3. outcome_a is spacelike from outcome_b.
            4. each choice lies in the causal past of its own outcome.
            5. emission lies in the causal past of both outcomes.
            6. both choices are spacelike from emission.
        """
        events = [choose_a, choose_b, emission, outcome_a, outcome_b]
        labels = [e.label for e in events]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate event labels: {labels}")

        iv = SpacetimeService.interval
        past = SpacetimeService.in_causal_past

        def spacelike(*pairs):
            intervals = tuple(iv(x, y) for x, y in pairs)
            return all(i.classification == SPACELIKE for i in intervals), intervals

        def causal(*pairs):
            intervals = tuple(iv(x, y) for x, y in pairs)
            return all(past(x, y) for x, y in pairs), intervals

        checks = [
            (1, "outcome_a spacelike from choose_b", spacelike((choose_b, outcome_a))),
            (2, "outcome_b spacelike from choose_a", spacelike((choose_a, outcome_b))),
            (3, "outcome_a spacelike from outcome_b", spacelike((outcome_a, outcome_b))),
            (4, "each choice in the causal past of its outcome", causal((choose_a, outcome_a), (choose_b, outcome_b))),
            (5, "emission in the causal past of both outcomes", causal((emission, outcome_a), (emission, outcome_b))),
            (6, "both choices spacelike from emission", spacelike((emission, choose_a), (emission, choose_b))),
        ]
        verdicts = tuple(
            ConditionVerdict(number, description, ok, intervals)
            for number, description, (ok, intervals) in checks
        )
        report = ArrangementReport(verdicts, tuple(SpacetimeService.pairwise_intervals(events)))
        if not report.passed:
            logger.info("locality arrangement fails conditions %s", report.failed_conditions)
        return report

    @staticmethod
    def check_events(events: Iterable[SpacetimeEvent]) -> ArrangementReport:
        """check_locality_arrangement on a labeled collection (as read from an event-set file)."""
        events = list(events)
        labels = [e.label for e in events]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate event labels: {labels}")
        by_label = {e.label: e for e in events}
        missing = [label for label in ARRANGEMENT_LABELS if label not in by_label]
        if missing:
            raise ValueError(f"missing events: {', '.join(missing)}")
        return SpacetimeService.check_locality_arrangement(*(by_label[label] for label in ARRANGEMENT_LABELS))

    @staticmethod
    def latest_common_cause(e1: SpacetimeEvent, e2: SpacetimeEvent) -> float:
        """Latest time of a point lying in the causal past of both events."""
        distance = float(np.linalg.norm(e1.position - e2.position))
        return min((e1.t + e2.t - distance) / 2.0, e1.t, e2.t)

    @staticmethod
    def foc_exclusion_time(setting_source_events: Mapping[str, Sequence[SpacetimeEvent]]) -> ExclusionReport:
        """Most recent time at which a hidden cause could still bias at least one setting.

        Each side's latest source emission bounds that side; a mechanism only
        needs to reach one side, so the exclusion time is the later of the two.
        """
        if not setting_source_events:
            raise ValueError("setting source events are required")
        latest: dict[str, SpacetimeEvent] = {}
        for side, events in setting_source_events.items():
            events = list(events)
            if not events:
                raise ValueError(f"no setting source events for side {side!r}")
            latest[side] = max(events, key=lambda e: e.t)
        exclusion = max(e.t for e in latest.values())
        chosen = list(latest.values())
        if len(chosen) >= 2:
            common = min(
                SpacetimeService.latest_common_cause(chosen[i], chosen[j])
                for i in range(len(chosen))
                for j in range(i + 1, len(chosen))
            )
        else:
            common = chosen[0].t
        return ExclusionReport(
            exclusion_time=exclusion,
            latest_common_cause=common,
            per_side={side: e.t for side, e in latest.items()},
        )

    @staticmethod
    def load_events(data) -> list[SpacetimeEvent]:
        if not isinstance(data, list):
            raise ValueError("event-set file must hold a JSON array")
        return [SpacetimeEvent.from_dict(item) for item in data]
