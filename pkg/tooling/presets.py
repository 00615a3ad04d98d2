"""Scenario presets: one ideal-state configuration per historical experiment class.

Lab geometry is in meters with time in light-meters (c = 1). Setting-source
emissions used for the freedom-of-choice exclusion live on a cosmological
scale and are kept apart in years / light-years.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from engine.services import ExperimentConfig, Geometry, PhysicsSpec
from engine.sources import SettingSource
from quantum.services import QuantumService
from spacetime.services import SpacetimeEvent

UNMODELED_NOTE = "apparatus fidelity, unmodeled"


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    title: str
    config: ExperimentConfig
    reference_S: Optional[float] = None
    reference_se: Optional[float] = None
    closes: tuple[str, ...] = ()
    opens: tuple[str, ...] = ()
    notes: str = ""
    setting_sources: dict[str, tuple[SpacetimeEvent, ...]] = field(default_factory=dict)
    setting_source_units: str = "years"

    @property
    def reference_label(self) -> str:
        if self.reference_S is None:
            return "none quoted"
        return f"{self.reference_S:g} ± {self.reference_se:g}"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "title": self.title,
            "reference_S": self.reference_S,
            "reference_se": self.reference_se,
            "closes": list(self.closes),
            "opens": list(self.opens),
            "notes": self.notes,
            "config": self.config.to_dict(),
            "setting_sources": {
                side: [e.to_dict() for e in events] for side, events in self.setting_sources.items()
            },
            "setting_source_units": self.setting_source_units,
        }


def _symmetric_geometry(half_distance, *, photon_speed=1.0, lead, duration, period=1000.0) -> Geometry:
    return Geometry(
        source=(0.0, 0.0, 0.0),
        station_a=(half_distance, 0.0, 0.0),
        station_b=(-half_distance, 0.0, 0.0),
        trial_period=period,
        photon_speed=photon_speed,
        setting_lead_a=lead,
        setting_lead_b=lead,
        measurement_duration=duration,
        units="meters",
    )


def _ideal_config(geometry: Geometry, *, source=None, efficiency=1.0, herald_probability=1.0, settings=None) -> ExperimentConfig:
    return ExperimentConfig(
        physics=PhysicsSpec.quantum(
            QuantumService.make_bell_state("+"),
            settings or QuantumService.tsirelson_settings(),
        ),
        source=source or SettingSource(),
        efficiency_a=efficiency,
        efficiency_b=efficiency,
        herald_probability=herald_probability,
        geometry=geometry,
    )


def _star_pair(distance_a: float, distance_b: float) -> dict[str, tuple[SpacetimeEvent, ...]]:
    """Emission events of two sources whose light reaches the stations (origin) at t = 0."""
    return {
        "a": (SpacetimeEvent("source_a", -distance_a, (distance_a, 0.0, 0.0)),),
        "b": (SpacetimeEvent("source_b", -distance_b, (-distance_b, 0.0, 0.0)),),
    }


PRESETS: dict[str, ScenarioPreset] = {
    preset.name: preset
    for preset in (
        ScenarioPreset(
            name="freedman-clauser",
            title="Atomic cascade, fixed polarizers",
            # Block schedule: settings held for long runs and fixed well before emission.
            config=_ideal_config(
                _symmetric_geometry(3.0, lead=100.0, duration=1.0),
                source=SettingSource(kind="quasi_periodic", period_a=50, period_b=100),
                efficiency=0.3,
                settings=QuantumService.freedman_settings(math.pi / 8),
            ),
            reference_S=2.388,
            reference_se=0.072,
            opens=("locality", "detection", "freedom-of-choice"),
            notes="Settings chosen long before emission; low detection efficiency.",
        ),
        ScenarioPreset(
            name="aspect",
            title="Periodic switches during flight",
            config=_ideal_config(
                _symmetric_geometry(6.0, lead=4.0, duration=1.0),
                source=SettingSource(kind="quasi_periodic", period_a=1, period_b=2),
                efficiency=0.5,
            ),
            closes=("locality",),
            opens=("detection", "freedom-of-choice"),
            notes="Switches operated quasi-periodically, so settings are predictable.",
        ),
        ScenarioPreset(
            name="weihs",
            title="Fast random switching, 400 m baseline",
            config=_ideal_config(
                _symmetric_geometry(200.0, photon_speed=0.68, lead=150.0, duration=30.0),
                efficiency=0.5,
            ),
            reference_S=2.73,
            reference_se=0.02,
            closes=("locality",),
            opens=("detection",),
            notes="Independent quantum random number generators at each station.",
        ),
        ScenarioPreset(
            name="nist-ions",
            title="Trapped ions, near-unit detection",
            # Ions a few micrometers apart against a long readout window.
            config=_ideal_config(
                _symmetric_geometry(1.5e-6, lead=1e-6, duration=3000.0),
                efficiency=0.98,
            ),
            reference_S=2.25,
            reference_se=0.03,
            closes=("detection",),
            opens=("locality",),
            notes="Measurement takes far longer than light needs to cross between the ions.",
        ),
        ScenarioPreset(
            name="delft",
            title="Event-ready electron spins, 1.3 km",
            config=_ideal_config(
                _symmetric_geometry(640.0, photon_speed=0.68, lead=600.0, duration=300.0),
                herald_probability=0.25,
            ),
            reference_S=2.42,
            reference_se=0.20,
            closes=("locality", "detection"),
            notes="Only heralded trials are scored.",
        ),
        ScenarioPreset(
            name="cosmic-vienna",
            title="Settings from Milky Way stars",
            config=_ideal_config(_symmetric_geometry(500.0, lead=400.0, duration=100.0), efficiency=0.6),
            reference_S=2.502,
            reference_se=0.042,
            closes=("locality", "freedom-of-choice"),
            opens=("detection",),
            notes="Setting bits from stars 600 and 1930 light-years away.",
            setting_sources=_star_pair(600.0, 1930.0),
        ),
        ScenarioPreset(
            name="cosmic-quasar",
            title="Settings from distant quasars",
            config=_ideal_config(_symmetric_geometry(500.0, lead=450.0, duration=50.0), efficiency=0.6),
            reference_S=2.646,
            reference_se=0.070,
            closes=("locality", "freedom-of-choice"),
            opens=("detection",),
            notes="Setting bits from quasar light emitted 7.78 and 12.21 billion years ago.",
            setting_sources=_star_pair(7.78e9, 12.21e9),
        ),
    )
}


def get_preset(name: str) -> ScenarioPreset:
    key = (name or "").strip().lower()
    if key not in PRESETS:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[key]
