"""Physical constants, unit-carrying scalars and the frequency convention switch.

Everything downstream works in SI units at double precision. The only
configurable piece is how a quoted clock frequency (in Hz) is turned into an
angular frequency: either used as-is ("direct") or multiplied by 2*pi
("times-two-pi"). Published estimates in this domain are only reproduced under
the direct convention, so that is the default; reports always record which
convention produced them.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass


class FrequencyConvention(str, enum.Enum):
    """How quoted experimental frequencies map onto angular frequencies."""

    DIRECT = "direct"
    TIMES_TWO_PI = "times-two-pi"

    @classmethod
    def parse(cls, value) -> "FrequencyConvention":
        if isinstance(value, cls):
            return value
        aliases = {"2pi": cls.TIMES_TWO_PI, "two-pi": cls.TIMES_TWO_PI}
        if value in aliases:
            return aliases[value]
        return cls(value)


DEFAULT_CONVENTION = FrequencyConvention.DIRECT


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 values; immutable, shared by every module."""

    G: float      # gravitational constant, m^3 kg^-1 s^-2
    hbar: float   # reduced Planck constant, J s
    c: float      # speed of light, m s^-1

    def __post_init__(self):
        if not (self.G > 0 and self.hbar > 0 and self.c > 0):
            raise ValueError("physical constants must be strictly positive")

    def to_json(self) -> str:
        # repr round-trips doubles bit-exactly
        return json.dumps({"G": self.G, "hbar": self.hbar, "c": self.c},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PhysicalConstants":
        d = json.loads(text)
        return cls(G=d["G"], hbar=d["hbar"], c=d["c"])


CONSTANTS = PhysicalConstants(G=6.67430e-11, hbar=1.054571817e-34, c=2.99792458e8)


def _check_scalar(value: float, name: str, nonnegative: bool = True) -> float:
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if nonnegative and value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


@dataclass(frozen=True)
class AngularFrequency:
    """Angular transition frequency, rad/s."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _check_scalar(self.value, "angular frequency"))

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Rate:
    """A dephasing or measurement rate, s^-1."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _check_scalar(self.value, "rate"))

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class PositionMeasurementRate:
    """Strength of a continuous position measurement, Hz m^-2."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _check_scalar(self.value, "position measurement rate"))

    def __float__(self) -> float:
        return self.value


def apply_convention(quoted_frequency: float,
                     convention: FrequencyConvention | str = DEFAULT_CONVENTION) -> AngularFrequency:
    """Turn a quoted frequency in Hz into an angular frequency in rad/s."""
    f = _check_scalar(quoted_frequency, "quoted frequency")
    convention = FrequencyConvention.parse(convention)
    if convention is FrequencyConvention.TIMES_TWO_PI:
        return AngularFrequency(2.0 * math.pi * f)
    return AngularFrequency(f)
