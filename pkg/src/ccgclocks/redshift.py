"""Dephasing of a single clock from the gravitational redshift channel.

A trapped clock near a mass element m at distance d couples through

    g_i = G m w / (c^2 d^2)      [Hz / m]

and the channel adds a clock dephasing D = Gamma_z / 2 + sum_i g_i^2 / (8 Gamma_i)
together with position diffusion on the mass (whose coefficients are reported
but never evolved here; the position sector belongs to companion treatments).
For a crystal of identical atoms the internal gravitational couplings fix
Gamma = G m^2 / (hbar L_c^3), which turns the feedback sum into
(G hbar L_c^3 w^2 / 8 c^4) sum_i d_i^(-4): only nearby atoms matter. For a
spherical shell (inner radius l, outer L) the volume integral is exact:

    D = Gamma_z / 2 + (pi G hbar w^2 / 2 c^4) (1/l - 1/L).

No minimization is attempted in this sector (the clock-mass asymmetry defeats
it); experiment-derived bounds on the rates replace it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .constants import (
    CONSTANTS,
    DEFAULT_CONVENTION,
    FrequencyConvention,
    PositionMeasurementRate,
    Rate,
)
from .continuum import kahan_sum


@dataclass(frozen=True)
class ShellShape:
    """Spherical shell centered on the clock: inner radius l, outer radius L.

    A zero-thickness shell (L = l) is allowed and contributes nothing.
    """

    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not (self.outer_radius >= self.inner_radius > 0):
            raise ValueError("a shell needs outer radius >= inner radius > 0")


@dataclass(frozen=True)
class ExplicitAtoms:
    """Atom positions of a composite body, one row per atom (meters)."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) == 0:
            raise ValueError("positions must be a non-empty (N, 3) array")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class SimpleBody:
    """Massive body treated as a single degree of freedom."""

    mass: float
    distance: float
    gamma_position: PositionMeasurementRate

    def __post_init__(self):
        if not (self.mass > 0 and self.distance > 0):
            raise ValueError("mass and distance must be positive")
        if not isinstance(self.gamma_position, PositionMeasurementRate):
            object.__setattr__(self, "gamma_position",
                               PositionMeasurementRate(float(self.gamma_position)))


@dataclass(frozen=True)
class CompositeBody:
    """Crystal of identical atoms: atom mass, lattice constant and a shape."""

    atom_mass: float
    lattice_constant: float
    shape: ShellShape | ExplicitAtoms

    def __post_init__(self):
        if not (self.atom_mass > 0 and self.lattice_constant > 0):
            raise ValueError("atom mass and lattice constant must be positive")
        if not isinstance(self.shape, (ShellShape, ExplicitAtoms)):
            raise ValueError("shape must be a ShellShape or ExplicitAtoms")


@dataclass(frozen=True)
class RedshiftDephasing:
    """Clock dephasing split into measurement and feedback parts.

    position_diffusion holds the per-atom coefficients Gamma/2 + g_i^2/(8 Gamma_z)
    in Hz m^-2 (infinite for Gamma_z = 0); they are reported, not evolved.
    """

    total: float
    measurement_part: float
    feedback_part: float
    position_diffusion: np.ndarray | None = None
    convention: FrequencyConvention = DEFAULT_CONVENTION

    def __post_init__(self):
        if self.measurement_part < 0 or self.feedback_part < 0:
            raise ValueError("dephasing parts must be non-negative")
        if not math.isclose(self.total, self.measurement_part + self.feedback_part,
                            rel_tol=1e-12, abs_tol=0.0):
            raise ValueError("total must equal measurement + feedback part")
        if self.position_diffusion is not None:
            arr = np.asarray(self.position_diffusion, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, "position_diffusion", arr)
        object.__setattr__(self, "convention",
                           FrequencyConvention.parse(self.convention))

    def to_json_dict(self) -> dict:
        out = {
            "total_hz": float(self.total),
            "measurement_part_hz": float(self.measurement_part),
            "feedback_part_hz": float(self.feedback_part),
            "convention": self.convention.value,
        }
        if self.position_diffusion is not None:
            out["position_diffusion_hz_per_m2"] = [
                float(x) for x in self.position_diffusion]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def redshift_coupling(mass: float, distance: float, omega) -> float:
    """Energy-position coupling G m w / (c^2 d^2), units Hz/m."""
    if not distance > 0:
        raise ValueError("distance must be positive")
    if mass < 0:
        raise ValueError("mass must be non-negative")
    return CONSTANTS.G * mass * float(omega) / (CONSTANTS.c ** 2 * distance ** 2)


def internal_measurement_rate(atom_mass: float, lattice_constant: float) -> PositionMeasurementRate:
    """Position measurement rate G m^2 / (hbar L_c^3) fixed by the couplings
    between neighboring atoms of the body itself."""
    if not (atom_mass > 0 and lattice_constant > 0):
        raise ValueError("atom mass and lattice constant must be positive")
    return PositionMeasurementRate(
        CONSTANTS.G * atom_mass ** 2 / (CONSTANTS.hbar * lattice_constant ** 3))


def shell_dephasing(inner_radius: float, outer_radius: float, omega,
                    gamma_z, convention=DEFAULT_CONVENTION) -> RedshiftDephasing:
    """Closed-form clock dephasing from a shell of matter around the clock."""
    if not outer_radius >= inner_radius > 0:
        raise ValueError("need outer radius >= inner radius > 0")
    gz = float(gamma_z)
    if gz < 0:
        raise ValueError("clock measurement rate must be non-negative")
    w = float(omega)
    feedback = (math.pi * CONSTANTS.G * CONSTANTS.hbar * w ** 2
                / (2.0 * CONSTANTS.c ** 4)) * (1.0 / inner_radius - 1.0 / outer_radius)
    return RedshiftDephasing(total=gz / 2.0 + feedback,
                             measurement_part=gz / 2.0,
                             feedback_part=feedback,
                             convention=convention)


def composite_dephasing(body: CompositeBody, clock_position, omega, gamma_z, *,
                        gamma_atoms: PositionMeasurementRate | float | None = None,
                        convention=DEFAULT_CONVENTION) -> RedshiftDephasing:
    """Clock dephasing from a composite body.

    Shell shapes use the exact volume integral. Explicit atom lists are summed
    with compensated summation; the clock must stay outside every atom's
    exclusion radius L_c / 2, mirroring the lower cutoff that keeps the d^-4
    sum convergent. gamma_atoms overrides the internal measurement rate (used
    e.g. to realize a one-atom body with a prescribed rate).
    """
    gz = float(gamma_z)
    if gz < 0:
        raise ValueError("clock measurement rate must be non-negative")
    w = float(omega)
    if isinstance(body.shape, ShellShape):
        return shell_dephasing(body.shape.inner_radius, body.shape.outer_radius,
                               w, gz, convention=convention)
    gamma = float(gamma_atoms) if gamma_atoms is not None else float(
        internal_measurement_rate(body.atom_mass, body.lattice_constant))
    if not gamma > 0:
        raise ValueError("atom measurement rate must be positive")
    pos = body.shape.positions
    d = np.linalg.norm(pos - np.asarray(clock_position, dtype=float), axis=1)
    exclusion = body.lattice_constant / 2.0
    if np.any(d < exclusion):
        k = int(np.argmin(d))
        raise ValueError(
            f"clock lies inside the exclusion radius of atom {k} "
            f"(distance {d[k]:.3e} m < {exclusion:.3e} m)")
    couplings = CONSTANTS.G * body.atom_mass * w / (CONSTANTS.c ** 2 * d ** 2)
    feedback = kahan_sum((couplings ** 2 / (8.0 * gamma)).tolist())
    if gz > 0:
        diffusion = gamma / 2.0 + couplings ** 2 / (8.0 * gz)
    else:
        diffusion = np.full(len(d), np.inf)
    return RedshiftDephasing(total=gz / 2.0 + feedback,
                             measurement_part=gz / 2.0,
                             feedback_part=feedback,
                             position_diffusion=diffusion,
                             convention=convention)


def simple_particle_dephasing(mass: float, distance: float, omega,
                              gamma_i, gamma_z,
                              convention=DEFAULT_CONVENTION) -> RedshiftDephasing:
    """Clock dephasing with the body as one collective degree of freedom:
    D = Gamma_z/2 + G^2 M^2 w^2 / (8 c^4 d^4 Gamma_i). This is the one-atom
    limit of the composite description."""
    if not (mass > 0 and distance > 0):
        raise ValueError("mass and distance must be positive")
    gi = float(gamma_i)
    if not gi > 0:
        raise ValueError("position measurement rate must be positive "
                         "(the feedback term diverges at zero)")
    gz = float(gamma_z)
    if gz < 0:
        raise ValueError("clock measurement rate must be non-negative")
    w = float(omega)
    coupling = redshift_coupling(mass, distance, w)
    feedback = coupling ** 2 / (8.0 * gi)
    return RedshiftDephasing(total=gz / 2.0 + feedback,
                             measurement_part=gz / 2.0,
                             feedback_part=feedback,
                             position_diffusion=np.array([gi / 2.0 + coupling ** 2 / (8.0 * gz)])
                             if gz > 0 else np.array([np.inf]),
                             convention=convention)


def bound_parameters(observed_dephasing_cap, mass: float, distance: float,
                     omega) -> tuple[PositionMeasurementRate, Rate]:
    """Experiment-derived bounds from the absence of anomalous dephasing.

    A cap on the observed dephasing bounds the measurement rate from above
    (Gamma_z <= 2 cap) and the position rate from below (feedback term alone
    must not exceed the cap).
    """
    cap = float(observed_dephasing_cap)
    if not cap > 0:
        raise ValueError("the dephasing cap must be positive")
    w = float(omega)
    coupling = redshift_coupling(mass, distance, w)
    gamma_i_lower = coupling ** 2 / (8.0 * cap)
    return PositionMeasurementRate(gamma_i_lower), Rate(2.0 * cap)
