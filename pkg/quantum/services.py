"""Quantum predictions for polarization measurements on photon pairs.

States are written in the {HH, HV, VH, VV} product basis, with the left photon
first. Outcome +1 means transmission along the rotated H axis, -1 along the
rotated V axis.

The right-hand photon travels in the opposite direction, so its analyzer angle
is applied in the mirrored frame (rotation by -beta). With that convention the
state (|HV> + |VH>)/sqrt(2) gives E(alpha, beta) = -cos 2(alpha - beta).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12
BASIS_LABELS = ("HH", "HV", "VH", "VV")
OUTCOMES = (1, -1)
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)

# Sign of each correlation in S, keyed by (left setting index, right setting index).
CHSH_SIGNS: dict[tuple[int, int], int] = {
    (0, 0): 1,
    (1, 0): 1,
    (0, 1): -1,
    (1, 1): 1,
}
SETTING_PAIRS: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (0, 1), (1, 1))


def chsh_combination(correlations: Mapping[tuple[int, int], float]) -> float:
    """Signed CHSH combination E(a,b) + E(a',b) - E(a,b') + E(a',b')."""
    missing = [pair for pair in SETTING_PAIRS if pair not in correlations]
    if missing:
        raise ValueError(f"missing correlations for setting pairs {missing}")
    return float(sum(CHSH_SIGNS[pair] * float(correlations[pair]) for pair in SETTING_PAIRS))


@dataclass(frozen=True)
class AnalyzerAngle:
    """Polarizer orientation in radians, canonicalized to [0, pi)."""

    radians: float

    def __post_init__(self):
        value = float(self.radians)
        if not math.isfinite(value):
            raise ValueError("angle must be finite")
        value = math.fmod(value, math.pi)
        if value < 0:
            value += math.pi
        if value >= math.pi:
            value = 0.0
        object.__setattr__(self, "radians", value)

    @classmethod
    def from_degrees(cls, degrees: float) -> "AnalyzerAngle":
        return cls(math.radians(float(degrees)))

    @property
    def degrees(self) -> float:
        return math.degrees(self.radians)


AngleLike = Union[AnalyzerAngle, float, int]


def _as_angle(value: AngleLike) -> AnalyzerAngle:
    if isinstance(value, AnalyzerAngle):
        return value
    return AnalyzerAngle(float(value))


@dataclass(frozen=True)
class SettingsQuad:
    """The four analyzer orientations (a, a', b, b') of a CHSH test."""

    a: AnalyzerAngle
    a_prime: AnalyzerAngle
    b: AnalyzerAngle
    b_prime: AnalyzerAngle

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, _as_angle(getattr(self, name)))

    @classmethod
    def from_degrees(cls, a: float, a_prime: float, b: float, b_prime: float) -> "SettingsQuad":
        return cls(
            AnalyzerAngle.from_degrees(a),
            AnalyzerAngle.from_degrees(a_prime),
            AnalyzerAngle.from_degrees(b),
            AnalyzerAngle.from_degrees(b_prime),
        )

    def left(self, index: int) -> AnalyzerAngle:
        if index == 0:
            return self.a
        if index == 1:
            return self.a_prime
        raise ValueError(f"unknown left setting index: {index}")

    def right(self, index: int) -> AnalyzerAngle:
        if index == 0:
            return self.b
        if index == 1:
            return self.b_prime
        raise ValueError(f"unknown right setting index: {index}")

    def to_dict(self) -> dict:
        return {
            "unit": "rad",
            "a": self.a.radians,
            "a_prime": self.a_prime.radians,
            "b": self.b.radians,
            "b_prime": self.b_prime.radians,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SettingsQuad":
        unit = str(data.get("unit", "rad")).lower()
        try:
            values = [float(data[k]) for k in ("a", "a_prime", "b", "b_prime")]
        except KeyError as exc:
            raise ValueError(f"settings missing key {exc.args[0]!r}") from exc
        if unit in {"deg", "degree", "degrees"}:
            return cls.from_degrees(*values)
        if unit not in {"rad", "radian", "radians"}:
            raise ValueError("settings unit must be 'rad' or 'deg'")
        return cls(*values)


@dataclass(frozen=True)
class PolarizationState:
    """Two-photon polarization state, amplitudes ordered (HH, HV, VH, VV)."""

    amplitudes: tuple[complex, complex, complex, complex]
    label: str = ""

    def __post_init__(self):
        amps = tuple(complex(a) for a in self.amplitudes)
        if len(amps) != 4:
            raise ValueError("a polarization state needs exactly 4 amplitudes")
        if not all(math.isfinite(a.real) and math.isfinite(a.imag) for a in amps):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.amplitudes, dtype=np.complex128)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def is_normalized(self, tolerance: float = NORM_TOLERANCE) -> bool:
        return abs(float(np.sum(np.abs(self.vector) ** 2)) - 1.0) <= tolerance

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "amplitudes": [[a.real, a.imag] for a in self.amplitudes],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolarizationState":
        raw = data.get("amplitudes")
        if raw is None or len(raw) != 4:
            raise ValueError("state.amplitudes must list 4 [re, im] pairs")
        amps = []
        for item in raw:
            if isinstance(item, (list, tuple)):
                re, im = (float(item[0]), float(item[1])) if len(item) == 2 else (float(item[0]), 0.0)
                amps.append(complex(re, im))
            else:
                amps.append(complex(float(item), 0.0))
        return cls(tuple(amps), label=str(data.get("label", "")))


class QuantumService:
    @staticmethod
    def make_bell_state(sign: Union[str, int] = "+") -> PolarizationState:
        """Maximally entangled state (|HV> +/- |VH>)/sqrt(2)."""
        if sign in {"+", 1, "plus"}:
            s = 1.0
        elif sign in {"-", -1, "minus"}:
            s = -1.0
        else:
            raise ValueError("sign must be '+' or '-'")
        amp = 1.0 / math.sqrt(2.0)
        label = "bell_plus" if s > 0 else "bell_minus"
        return PolarizationState((0.0, amp, s * amp, 0.0), label=label)

    @staticmethod
    def make_eberhard_state(r: float) -> PolarizationState:
        """Non-maximally entangled state (|HV> + r|VH>)/sqrt(1 + r^2), 0 < r <= 1."""
        r = float(r)
        if not (0.0 < r <= 1.0):
            raise ValueError("r must be in (0, 1]")
        scale = 1.0 / math.sqrt(1.0 + r * r)
        return PolarizationState((0.0, scale, r * scale, 0.0), label=f"eberhard_r={r:g}")

    @staticmethod
    def make_state(kind: str, *, r: Optional[float] = None) -> PolarizationState:
        """Build a named state: bell_plus, bell_minus or eberhard (needs r)."""
        key = (kind or "").strip().lower()
        if key in {"bell_plus", "bell+", "psi_plus"}:
            return QuantumService.make_bell_state("+")
        if key in {"bell_minus", "bell-", "psi_minus"}:
            return QuantumService.make_bell_state("-")
        if key == "eberhard":
            if r is None:
                raise ValueError("eberhard state requires r")
            return QuantumService.make_eberhard_state(r)
        raise ValueError(f"unknown state kind: {kind}")

    @staticmethod
    def rotated_eigenstates(phi: AngleLike) -> tuple[np.ndarray, np.ndarray]:
        """Single-photon basis for a polarizer rotated by phi.

        Returns:
            (H~, V~) with H~ = (cos phi, sin phi) and V~ = (-sin phi, cos phi).
        """
        angle = phi.radians if isinstance(phi, AnalyzerAngle) else float(phi)
        c, s = math.cos(angle), math.sin(angle)
        return np.array([c, s]), np.array([-s, c])

    @staticmethod
    def _require_normalized(state: PolarizationState) -> None:
        if not state.is_normalized():
            raise ValueError(f"state is not normalized (norm={state.norm:.15g})")

    @staticmethod
    def joint_distribution(state: PolarizationState, alpha: AngleLike, beta: AngleLike) -> np.ndarray:
        """Born-rule outcome table p[i, j] for A = OUTCOMES[i], B = OUTCOMES[j]."""
        QuantumService._require_normalized(state)
        alpha_rad = _as_angle(alpha).radians
        beta_rad = _as_angle(beta).radians
        left = np.vstack(QuantumService.rotated_eigenstates(alpha_rad))
        right = np.vstack(QuantumService.rotated_eigenstates(-beta_rad))
        amplitudes = np.kron(left, right) @ state.vector
        probs = (np.abs(amplitudes) ** 2).reshape(2, 2)
        return probs / probs.sum()

    @staticmethod
    def correlation(state: PolarizationState, alpha: AngleLike, beta: AngleLike) -> float:
        p = QuantumService.joint_distribution(state, alpha, beta)
        value = float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])
        return min(1.0, max(-1.0, value))

    @staticmethod
    def correlations(state: PolarizationState, quad: SettingsQuad) -> dict[tuple[int, int], float]:
        return {
            (i, j): QuantumService.correlation(state, quad.left(i), quad.right(j))
            for (i, j) in SETTING_PAIRS
        }

    @staticmethod
    def chsh_value(state: PolarizationState, quad: SettingsQuad) -> float:
        return abs(chsh_combination(QuantumService.correlations(state, quad)))

    @staticmethod
    def tsirelson_settings() -> SettingsQuad:
        return SettingsQuad(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)

    @staticmethod
    def freedman_settings(phi: float) -> SettingsQuad:
        """Settings with theta_ab = theta_a'b = theta_a'b' = phi and theta_ab' = 3 phi."""
        phi = float(phi)
        return SettingsQuad(0.0, 2 * phi, phi, 3 * phi)

    @staticmethod
    def holt_pipkin_rate(phi: float) -> float:
        """Ideal coincidence rate R(phi)/R0 = (1 + cos 2 phi)/4 at relative angle phi."""
        return 0.25 * (1.0 + math.cos(2.0 * float(phi)))
