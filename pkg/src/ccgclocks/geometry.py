"""Clock arrays and pair interaction rates.

A clock pair at distance d with angular frequencies w1, w2 couples at the rate

    g12 = G * hbar * w1 * w2 / (d * c^4)

which sets every dephasing scale in the package. Arrays are stored as explicit
3-vector positions even when they were built as regular lattices; the lattice
metadata is kept so the continuum module can map a sum onto its integral
approximation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    CONSTANTS,
    DEFAULT_CONVENTION,
    AngularFrequency,
    FrequencyConvention,
    Rate,
)

# Full pairwise validation/matrix construction is O(N^2); above this size the
# coincidence check is deferred to the operations that actually need pairs.
_PAIR_CHECK_LIMIT = 2048
_PAIR_MATRIX_LIMIT = 4096


@dataclass(frozen=True)
class ClockSpec:
    """One two-level clock: angular frequency, position, optional rest mass."""

    omega: AngularFrequency
    position: tuple[float, float, float]
    rest_mass: float | None = None

    def __post_init__(self):
        if not isinstance(self.omega, AngularFrequency):
            object.__setattr__(self, "omega", AngularFrequency(float(self.omega)))
        pos = tuple(float(x) for x in self.position)
        if len(pos) != 3 or not all(np.isfinite(pos)):
            raise ValueError(f"position must be a finite 3-vector, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        if self.rest_mass is not None and not float(self.rest_mass) > 0:
            raise ValueError("rest_mass must be positive when given")


@dataclass(frozen=True)
class LatticeInfo:
    """Advisory metadata for arrays built as regular grids."""

    dimension: int
    lattice_constant: float
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"lattice dimension must be 1, 2 or 3, got {self.dimension}")
        if not self.lattice_constant > 0:
            raise ValueError("lattice constant must be positive")
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != self.dimension or any(c < 1 for c in counts):
            raise ValueError(f"need {self.dimension} per-axis counts >= 1, got {self.counts!r}")
        object.__setattr__(self, "counts", counts)


class ClockArray:
    """Ordered collection of clocks, immutable after construction.

    Positions are stored as an (N, 3) float array and frequencies as a length-N
    array, which keeps million-site lattices cheap. `convention` records how the
    angular frequencies were produced from quoted values.
    """

    def __init__(self, omegas, positions, rest_masses=None,
                 lattice: LatticeInfo | None = None,
                 convention: FrequencyConvention | str = DEFAULT_CONVENTION):
        omegas = np.asarray(omegas, dtype=float).reshape(-1)
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError(f"positions must have shape (N, 3), got {positions.shape}")
        if len(omegas) != len(positions):
            raise ValueError("omegas and positions must have the same length")
        if len(omegas) < 1:
            raise ValueError("a clock array needs at least one clock")
        if np.any(omegas < 0) or not np.all(np.isfinite(omegas)):
            raise ValueError("angular frequencies must be finite and non-negative")
        if not np.all(np.isfinite(positions)):
            raise ValueError("positions must be finite")
        if rest_masses is not None:
            rest_masses = np.asarray(rest_masses, dtype=float).reshape(-1)
            if len(rest_masses) != len(omegas):
                raise ValueError("rest_masses must match the number of clocks")
            rest_masses.setflags(write=False)
        if len(omegas) <= _PAIR_CHECK_LIMIT:
            i, j = _coincident_pair(positions)
            if i is not None:
                raise ValueError(f"clocks {i} and {j} are coincident")
        omegas.setflags(write=False)
        positions.setflags(write=False)
        self._omegas = omegas
        self._positions = positions
        self._rest_masses = rest_masses
        self.lattice = lattice
        self.convention = FrequencyConvention.parse(convention)

    def __len__(self) -> int:
        return len(self._omegas)

    @property
    def omegas(self) -> np.ndarray:
        return self._omegas

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def rest_masses(self) -> np.ndarray | None:
        return self._rest_masses

    @property
    def clocks(self) -> tuple[ClockSpec, ...]:
        masses = self._rest_masses
        return tuple(
            ClockSpec(AngularFrequency(w), tuple(p),
                      None if masses is None else float(masses[k]))
            for k, (w, p) in enumerate(zip(self._omegas, self._positions))
        )

    @classmethod
    def from_clocks(cls, clocks, lattice: LatticeInfo | None = None,
                    convention=DEFAULT_CONVENTION) -> "ClockArray":
        clocks = list(clocks)
        masses = [c.rest_mass for c in clocks]
        has_mass = any(m is not None for m in masses)
        if has_mass and not all(m is not None for m in masses):
            raise ValueError("either all clocks carry a rest mass or none do")
        return cls(
            omegas=[float(c.omega) for c in clocks],
            positions=[c.position for c in clocks],
            rest_masses=masses if has_mass else None,
            lattice=lattice,
            convention=convention,
        )

    def center_index(self) -> int:
        """Index of the clock nearest the centroid (ties break to lowest index)."""
        centroid = self._positions.mean(axis=0)
        return int(np.argmin(np.linalg.norm(self._positions - centroid, axis=1)))

    # -- JSON import/export ------------------------------------------------

    def to_json_dict(self) -> dict:
        clocks = []
        for k in range(len(self)):
            entry = {"omega": float(self._omegas[k]),
                     "position": [float(x) for x in self._positions[k]]}
            if self._rest_masses is not None:
                entry["rest_mass"] = float(self._rest_masses[k])
            clocks.append(entry)
        out = {"clocks": clocks, "convention": self.convention.value}
        if self.lattice is not None:
            out["lattice"] = {
                "dimension": self.lattice.dimension,
                "lattice_constant": self.lattice.lattice_constant,
                "counts": list(self.lattice.counts),
            }
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "ClockArray":
        clocks = data["clocks"]
        masses = [c.get("rest_mass") for c in clocks]
        has_mass = any(m is not None for m in masses)
        lattice = None
        if "lattice" in data:
            lat = data["lattice"]
            lattice = LatticeInfo(lat["dimension"], lat["lattice_constant"],
                                  tuple(lat["counts"]))
        return cls(
            omegas=[c["omega"] for c in clocks],
            positions=[c["position"] for c in clocks],
            rest_masses=masses if has_mass else None,
            lattice=lattice,
            convention=data.get("convention", DEFAULT_CONVENTION),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ClockArray":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class PairRateMatrix:
    """Symmetric N x N matrix of pair interaction rates, zero diagonal."""

    g: np.ndarray
    convention: FrequencyConvention = field(default=DEFAULT_CONVENTION)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"pair rate matrix must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("pair rates must be finite")
        if np.any(np.abs(np.diag(g)) != 0):
            raise ValueError("pair rate matrix must have an exactly zero diagonal")
        if not np.allclose(g, g.T, rtol=0, atol=0):
            raise ValueError("pair rate matrix must be exactly symmetric")
        if np.any(g < 0):
            raise ValueError("pair rates must be non-negative")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "convention", FrequencyConvention.parse(self.convention))

    def __len__(self) -> int:
        return self.g.shape[0]

    @classmethod
    def from_matrix(cls, g, convention=DEFAULT_CONVENTION) -> "PairRateMatrix":
        return cls(np.array(g, dtype=float), convention)


def _coincident_pair(positions: np.ndarray):
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    if d2[i, j] == 0.0:
        return (int(min(i, j)), int(max(i, j)))
    return (None, None)


def build_lattice(dimension: int, lattice_constant: float, counts,
                  omega: AngularFrequency | float,
                  convention=DEFAULT_CONVENTION) -> ClockArray:
    """Regular grid of identical clocks centered at the origin.

    `counts` gives the number of sites per axis; unused axes sit at zero, so a
    1D chain lies along x and a 2D sheet in the x-y plane.
    """
    info = LatticeInfo(dimension, float(lattice_constant), tuple(counts))
    axes = [
        (np.arange(n, dtype=float) - (n - 1) / 2.0) * info.lattice_constant
        for n in info.counts
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    n_total = int(np.prod(info.counts))
    positions = np.zeros((n_total, 3))
    for axis, grid in enumerate(grids):
        positions[:, axis] = grid.ravel()
    omegas = np.full(n_total, float(omega))
    return ClockArray(omegas, positions, lattice=info, convention=convention)


def pair_interaction_rate(clock1: ClockSpec, clock2: ClockSpec) -> Rate:
    """Interaction rate G hbar w1 w2 / (d c^4) for a single clock pair."""
    d = float(np.linalg.norm(np.subtract(clock1.position, clock2.position)))
    if d == 0.0:
        raise ValueError("coincident clocks have a singular interaction rate")
    k = CONSTANTS.G * CONSTANTS.hbar / CONSTANTS.c**4
    return Rate(k * float(clock1.omega) * float(clock2.omega) / d)


def pair_rate_matrix(array: ClockArray) -> PairRateMatrix:
    """Full symmetric matrix of pair interaction rates for an array."""
    n = len(array)
    if n > _PAIR_MATRIX_LIMIT:
        raise ValueError(
            f"pair rate matrix for N={n} clocks exceeds the dense limit "
            f"({_PAIR_MATRIX_LIMIT}); use the continuum module for large arrays")
    pos = array.positions
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off_diag = ~np.eye(n, dtype=bool)
    if np.any(d[off_diag] == 0.0):
        i, j = _coincident_pair(pos)
        raise ValueError(f"clocks {i} and {j} are coincident")
    k = CONSTANTS.G * CONSTANTS.hbar / CONSTANTS.c**4
    with np.errstate(divide="ignore"):
        g = k * np.outer(array.omegas, array.omegas) / d
    g[~off_diag] = 0.0
    g = 0.5 * (g + g.T)  # exact symmetry despite float noise in d
    return PairRateMatrix(g, convention=array.convention)
