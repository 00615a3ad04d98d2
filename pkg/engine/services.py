from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import pandas as pd

from lhv.memory import TrialHistoryEntry, build_memory_strategy
from lhv.services import CommunicationSampler, LhvService
from lhv.strategies import HiddenVariableModel
from quantum.services import OUTCOMES, SETTING_PAIRS, PolarizationState, QuantumService, SettingsQuad
from spacetime.services import SpacetimeEvent

from .sources import SettingSource

logger = logging.getLogger(__name__)

PHYSICS_KINDS = ("quantum", "lhv", "memory", "communication")
# Stream order is part of the reproducibility contract; append, never reorder.
RNG_STREAMS = ("source", "physics", "detection", "heralding")
BATCH_SEED_SALT = 0xB3115EED
EVENT_NAMES = ("choose_a", "choose_b", "emission", "outcome_a", "outcome_b")
BASE_COLUMNS = ("trial", "setting_a", "setting_b", "outcome_a", "outcome_b", "heralded")
MAX_SEED = 2**64 - 1


Vector3 = tuple[float, float, float]


def _vector(values) -> Vector3:
    coords = tuple(float(v) for v in values)
    if len(coords) != 3 or not all(math.isfinite(v) for v in coords):
        raise ValueError("positions must be finite 3-vectors")
    return coords


@dataclass(frozen=True)
class PhysicsSpec:
    kind: str
    state: Optional[PolarizationState] = None
    settings: Optional[SettingsQuad] = None
    model: Optional[HiddenVariableModel] = None
    memory: Optional[dict] = None
    targets: Optional[tuple[tuple[float, float], tuple[float, float]]] = None

    def __post_init__(self):
        if self.kind not in PHYSICS_KINDS:
            raise ValueError(f"unknown physics kind: {self.kind} (choose from {', '.join(PHYSICS_KINDS)})")
        if self.kind == "quantum" and (self.state is None or self.settings is None):
            raise ValueError("quantum physics needs a state and a settings quad")
        if self.kind == "lhv" and self.model is None:
            raise ValueError("lhv physics needs a hidden-variable model")
        if self.kind == "communication" and self.targets is None:
            raise ValueError("communication physics needs target correlations")

    @classmethod
    def quantum(cls, state: PolarizationState, settings: SettingsQuad) -> "PhysicsSpec":
        return cls("quantum", state=state, settings=settings)

    @classmethod
    def lhv(cls, model: HiddenVariableModel) -> "PhysicsSpec":
        return cls("lhv", model=model)

    @classmethod
    def memory_strategy(cls, spec: Optional[dict] = None) -> "PhysicsSpec":
        build_memory_strategy(spec or {})
        return cls("memory", memory=dict(spec or {"kind": "fixed"}))

    @classmethod
    def communication(cls, targets: Mapping[tuple[int, int], float]) -> "PhysicsSpec":
        sampler = LhvService.one_bit_communication_model(targets)
        return cls("communication", targets=sampler.targets)

    def to_dict(self) -> dict:
        data: dict = {"kind": self.kind}
        if self.kind == "quantum":
            data["state"] = self.state.to_dict()
            data["settings"] = self.settings.to_dict()
        elif self.kind == "lhv":
            data["model"] = self.model.to_dict()
        elif self.kind == "memory":
            data["strategy"] = dict(self.memory or {})
        else:
            data["targets"] = [list(row) for row in self.targets]
        return data

    @classmethod
    def from_dict(cls, data: Mapping) -> "PhysicsSpec":
        kind = str(data.get("kind", ""))
        if kind == "quantum":
            return cls.quantum(PolarizationState.from_dict(data["state"]), SettingsQuad.from_dict(data["settings"]))
        if kind == "lhv":
            return cls.lhv(HiddenVariableModel.from_dict(data["model"]))
        if kind == "memory":
            return cls.memory_strategy(data.get("strategy"))
        if kind == "communication":
            rows = data["targets"]
            return cls.communication({(a, b): rows[a][b] for (a, b) in SETTING_PAIRS})
        raise ValueError(f"unknown physics kind: {kind}")


@dataclass(frozen=True)
class Geometry:
    """Station layout and timing, in units with c = 1.

    Per trial k the source emits at t = k * trial_period. A photon reaches a
    station after distance / photon_speed; the setting there is chosen
    `setting_lead_*` before arrival and the outcome is registered
    `measurement_duration` after arrival.
    """

    source: Vector3 = (0.0, 0.0, 0.0)
    station_a: Vector3 = (1.0, 0.0, 0.0)
    station_b: Vector3 = (-1.0, 0.0, 0.0)
    trial_period: float = 1.0
    photon_speed: float = 1.0
    setting_lead_a: float = 0.0
    setting_lead_b: float = 0.0
    measurement_duration: float = 0.0
    setting_source_events_a: tuple[SpacetimeEvent, ...] = ()
    setting_source_events_b: tuple[SpacetimeEvent, ...] = ()
    units: str = "c=1"

    def __post_init__(self):
        object.__setattr__(self, "source", _vector(self.source))
        object.__setattr__(self, "station_a", _vector(self.station_a))
        object.__setattr__(self, "station_b", _vector(self.station_b))
        if not self.trial_period > 0:
            raise ValueError("trial_period must be > 0")
        if not (0.0 < self.photon_speed <= 1.0):
            raise ValueError("photon_speed must be in (0, 1]")
        for name in ("setting_lead_a", "setting_lead_b", "measurement_duration"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        object.__setattr__(self, "setting_source_events_a", tuple(self.setting_source_events_a))
        object.__setattr__(self, "setting_source_events_b", tuple(self.setting_source_events_b))

    def travel_time(self, side: str) -> float:
        station = self.station_a if side == "a" else self.station_b
        return math.dist(self.source, station) / self.photon_speed

    def setting_source_events(self) -> dict[str, list[SpacetimeEvent]]:
        events = {}
        if self.setting_source_events_a:
            events["a"] = list(self.setting_source_events_a)
        if self.setting_source_events_b:
            events["b"] = list(self.setting_source_events_b)
        return events

    def to_dict(self) -> dict:
        return {
            "source": list(self.source),
            "station_a": list(self.station_a),
            "station_b": list(self.station_b),
            "trial_period": self.trial_period,
            "photon_speed": self.photon_speed,
            "setting_lead_a": self.setting_lead_a,
            "setting_lead_b": self.setting_lead_b,
            "measurement_duration": self.measurement_duration,
            "setting_source_events_a": [e.to_dict() for e in self.setting_source_events_a],
            "setting_source_events_b": [e.to_dict() for e in self.setting_source_events_b],
            "units": self.units,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Geometry":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown geometry keys: {sorted(unknown)}")
        values = dict(data)
        for key in ("setting_source_events_a", "setting_source_events_b"):
            values[key] = tuple(SpacetimeEvent.from_dict(e) for e in values.get(key) or ())
        return cls(**values)


@dataclass(frozen=True)
class ExperimentConfig:
    physics: PhysicsSpec
    source: SettingSource = field(default_factory=SettingSource)
    efficiency_a: float = 1.0
    efficiency_b: float = 1.0
    herald_probability: float = 1.0
    trials: int = 1000
    seed: int = 0
    geometry: Optional[Geometry] = None
    record_hidden: bool = False

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        for name in ("efficiency_a", "efficiency_b"):
            value = float(getattr(self, name))
            if not (0.0 < value <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]")
        if not (0.0 <= float(self.herald_probability) <= 1.0):
            raise ValueError("herald_probability must be in [0, 1]")
        if not (0 <= int(self.seed) <= MAX_SEED):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.source.kind == "adversary_correlated" and self.physics.kind != "lhv":
            raise ValueError("adversary_correlated source needs lhv physics")

    def to_dict(self) -> dict:
        return {
            "physics": self.physics.to_dict(),
            "source": self.source.to_dict(),
            "efficiency_a": float(self.efficiency_a),
            "efficiency_b": float(self.efficiency_b),
            "herald_probability": float(self.herald_probability),
            "trials": int(self.trials),
            "seed": int(self.seed),
            "geometry": self.geometry.to_dict() if self.geometry is not None else None,
            "record_hidden": bool(self.record_hidden),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        if "physics" not in data:
            raise ValueError("config needs a physics section")
        geometry = data.get("geometry")
        return cls(
            physics=PhysicsSpec.from_dict(data["physics"]),
            source=SettingSource.from_dict(data.get("source") or {}),
            efficiency_a=float(data.get("efficiency_a", 1.0)),
            efficiency_b=float(data.get("efficiency_b", 1.0)),
            herald_probability=float(data.get("herald_probability", 1.0)),
            trials=int(data.get("trials", 1000)),
            seed=int(data.get("seed", 0)),
            geometry=Geometry.from_dict(geometry) if geometry else None,
            record_hidden=bool(data.get("record_hidden", False)),
        )


@dataclass
class TrialLog:
    frame: pd.DataFrame
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def has_events(self) -> bool:
        return all(f"t_{name}" in self.frame.columns for name in EVENT_NAMES)


def _sample_index(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of an (n, K) probability table."""
    cumulative = np.cumsum(probabilities, axis=1)
    draws = rng.random(probabilities.shape[0])[:, None]
    return np.minimum((draws >= cumulative).sum(axis=1), probabilities.shape[1] - 1)


class TrialEngine:
    @staticmethod
    def streams(seed: int) -> dict[str, np.random.Generator]:
        """Independent Philox generators for each named stream, in RNG_STREAMS order."""
        children = np.random.SeedSequence(int(seed)).spawn(len(RNG_STREAMS))
        return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(RNG_STREAMS, children)}

    @staticmethod
    def derive_seeds(seed: int, count: int) -> list[int]:
        """Seeds for `count` independent replications: 64-bit words of SeedSequence([seed, salt])."""
        if count < 1:
            raise ValueError("count must be >= 1")
        words = np.random.SeedSequence([int(seed), BATCH_SEED_SALT]).generate_state(int(count), dtype=np.uint64)
        return [int(w) for w in words]

    @staticmethod
    def _quantum_outcomes(physics: PhysicsSpec, a: np.ndarray, b: np.ndarray, rng: np.random.Generator):
        tables = np.zeros((2, 2, 4))
        for (i, j) in SETTING_PAIRS:
            tables[i, j] = QuantumService.joint_distribution(
                physics.state, physics.settings.left(i), physics.settings.right(j)
            ).ravel()
        index = _sample_index(tables[a, b], rng)
        values = np.asarray(OUTCOMES, dtype=np.int8)
        return values[index // 2], values[index % 2], None

    @staticmethod
    def _lhv_outcomes(
        model: HiddenVariableModel,
        a: np.ndarray,
        b: np.ndarray,
        rng: np.random.Generator,
        hidden: Optional[np.ndarray],
    ):
        if hidden is None:
            if model.is_conditional:
                hidden = _sample_index(model.prior[a, b], rng)
            else:
                hidden = rng.choice(len(model.lambda_support), size=a.shape[0], p=model.prior)
        alphabet = np.asarray(model.alphabet, dtype=np.int8)
        outcome_a = alphabet[_sample_index(model.left_response[hidden, a], rng)]
        outcome_b = alphabet[_sample_index(model.right_response[hidden, b], rng)]
        return outcome_a, outcome_b, hidden

    @staticmethod
    def _memory_outcomes(physics: PhysicsSpec, a: np.ndarray, b: np.ndarray):
        strategy = build_memory_strategy(physics.memory or {})
        strategy.reset()
        n = a.shape[0]
        outcome_a = np.zeros(n, dtype=np.int8)
        outcome_b = np.zeros(n, dtype=np.int8)
        history: list[TrialHistoryEntry] = []
        for k in range(n):
            chosen = strategy.next_strategy(history)
            outcome_a[k] = chosen.left(int(a[k]))
            outcome_b[k] = chosen.right(int(b[k]))
            history.append(TrialHistoryEntry(int(a[k]), int(b[k]), int(outcome_a[k]), int(outcome_b[k])))
        return outcome_a, outcome_b, None

    @staticmethod
    def run(config: ExperimentConfig) -> TrialLog:
        """Simulate config.trials trials; identical configs give identical logs."""
        n = int(config.trials)
        rngs = TrialEngine.streams(config.seed)
        physics = config.physics
        model = physics.model if physics.kind == "lhv" else None
        a, b, hidden = config.source.draw(n, rngs["source"], model=model)
        a = a.astype(np.int64)
        b = b.astype(np.int64)

        if physics.kind == "quantum":
            outcome_a, outcome_b, hidden = TrialEngine._quantum_outcomes(physics, a, b, rngs["physics"])
        elif physics.kind == "lhv":
            outcome_a, outcome_b, hidden = TrialEngine._lhv_outcomes(physics.model, a, b, rngs["physics"], hidden)
        elif physics.kind == "memory":
            outcome_a, outcome_b, hidden = TrialEngine._memory_outcomes(physics, a, b)
        else:
            sampler = CommunicationSampler(targets=physics.targets)
            outcome_a, outcome_b = sampler.sample(a, b, rngs["physics"])

        detection = rngs["detection"].random((n, 2))
        outcome_a = np.where(detection[:, 0] < config.efficiency_a, outcome_a, 0).astype(np.int8)
        outcome_b = np.where(detection[:, 1] < config.efficiency_b, outcome_b, 0).astype(np.int8)
        heralded = rngs["heralding"].random(n) < config.herald_probability

        frame = pd.DataFrame(
            {
                "trial": np.arange(n, dtype=np.int64),
                "setting_a": a.astype(np.int8),
                "setting_b": b.astype(np.int8),
                "outcome_a": outcome_a,
                "outcome_b": outcome_b,
                "heralded": heralded,
            }
        )
        if hidden is not None and config.record_hidden:
            frame["hidden"] = np.asarray(hidden, dtype=np.int64)
        meta = {
            "seed": int(config.seed),
            "trials": n,
            "physics": physics.kind,
            "source": config.source.kind,
            "source_label": config.source.label,
            "efficiency_a": float(config.efficiency_a),
            "efficiency_b": float(config.efficiency_b),
            "herald_probability": float(config.herald_probability),
            "rng_streams": list(RNG_STREAMS),
        }
        if physics.kind == "communication":
            meta["signals_distant_setting"] = True
        log = TrialLog(frame, meta)
        if config.geometry is not None:
            log = TrialEngine.attach_geometry(log, config.geometry)
        logger.info("ran %d trials (%s physics, %s source, seed=%d)", n, physics.kind, config.source.kind, config.seed)
        return log

    @staticmethod
    def run_batch(config: ExperimentConfig, replications: int, *, jobs: int = 1) -> list[TrialLog]:
        """Independent replications with derived seeds, returned in replication order."""
        configs = [dataclasses.replace(config, seed=s) for s in TrialEngine.derive_seeds(config.seed, replications)]
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
                return list(pool.map(TrialEngine.run, configs))
        return [TrialEngine.run(c) for c in configs]

    @staticmethod
    def event_ready_filter(log: TrialLog) -> TrialLog:
        """Keep heralded trials only; original trial indices are preserved."""
        kept = log.frame[log.frame["heralded"].astype(bool)].reset_index(drop=True)
        meta = {**log.meta, "heralded_kept": int(len(kept)), "heralded_total": int(len(log.frame))}
        logger.info("event-ready filter kept %d of %d trials", len(kept), len(log.frame))
        return TrialLog(kept, meta)

    @staticmethod
    def check_order(log: TrialLog) -> None:
        trials = log.frame["trial"].to_numpy()
        if trials.size > 1 and not (np.diff(trials) > 0).all():
            raise ValueError("trial indices must be strictly increasing")

    @staticmethod
    def attach_geometry(log: TrialLog, geometry: Geometry) -> TrialLog:
        """Add t_/x_/y_/z_ columns for the five events of every trial."""
        frame = log.frame.copy()
        emission = frame["trial"].to_numpy(dtype=float) * geometry.trial_period
        arrival_a = emission + geometry.travel_time("a")
        arrival_b = emission + geometry.travel_time("b")
        timeline = {
            "choose_a": (arrival_a - geometry.setting_lead_a, geometry.station_a),
            "choose_b": (arrival_b - geometry.setting_lead_b, geometry.station_b),
            "emission": (emission, geometry.source),
            "outcome_a": (arrival_a + geometry.measurement_duration, geometry.station_a),
            "outcome_b": (arrival_b + geometry.measurement_duration, geometry.station_b),
        }
        for name, (times, position) in timeline.items():
            frame[f"t_{name}"] = times
            for axis, value in zip("xyz", position):
                frame[f"{axis}_{name}"] = value
        return TrialLog(frame, {**log.meta, "geometry": geometry.to_dict()})

    @staticmethod
    def trial_events(log: TrialLog, index: int) -> dict[str, SpacetimeEvent]:
        """The five events of the row at position `index`."""
        if not log.has_events:
            raise ValueError("trial log has no event coordinates; attach a geometry first")
        if not (0 <= index < len(log.frame)):
            raise ValueError(f"trial position {index} out of range")
        row = log.frame.iloc[index]
        return {
            name: SpacetimeEvent(name, row[f"t_{name}"], (row[f"x_{name}"], row[f"y_{name}"], row[f"z_{name}"]))
            for name in EVENT_NAMES
        }
