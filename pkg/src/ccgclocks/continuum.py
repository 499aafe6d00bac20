"""Lattice sums, their continuum integral approximation, and scaling fits.

The distance sums sum_j d_ij^(-alpha) over a regular D-dimensional array of
spacing L_c are approximated by

    (S_D / L_c^D) * integral_{L_c}^{R} r^(D-1-alpha) dr,   R = N^(1/D) L_c

with S_D = 1, 2*pi, 4*pi for linear, planar and spherical geometry. In 1D the
center clock sees two half-lines, each integrated to R/2. The integral only
tracks the sum up to an order-one factor, which compare_sum_vs_integral
quantifies; scaling exponents in N are what it predicts reliably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ClockArray

SOLID_ANGLE = {1: 1.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

# Canonical odd side counts: dense at small N where saturating laws still bend,
# log-spaced above. Chosen so every fit spans >= 2 decades in N.
DEFAULT_SIDES = {
    1: (5, 7, 11, 15, 21, 31, 51, 101, 201, 501, 1001, 2001, 5001, 10001, 30001, 100001),
    2: (5, 7, 11, 15, 21, 31, 51, 101, 151, 221, 317),
    3: (5, 7, 9, 11, 15, 21, 27, 33, 41),
}


def kahan_sum(values) -> float:
    """Neumaier-compensated sum; order-independent to near machine precision."""
    total = 0.0
    comp = 0.0
    for v in values:
        v = float(v)
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def lattice_sum_exact(array: ClockArray, center_index: int, alpha: float) -> float:
    """sum_{j != i} d_ij^(-alpha) for clock i, compensated summation."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    n = len(array)
    if not 0 <= center_index < n:
        raise ValueError(f"center index {center_index} out of range for {n} clocks")
    pos = array.positions
    d = np.linalg.norm(pos - pos[center_index], axis=1)
    d = np.delete(d, center_index)
    return kahan_sum((d ** (-alpha)).tolist())


@dataclass(frozen=True)
class ContinuumEstimate:
    """Closed-form integral approximation of a lattice distance sum."""

    D: int
    alpha: float
    S_D: float
    L_c: float
    R: float          # N^(1/D) * L_c; 1D integrates two half-lines to R/2 each
    value: float      # units m^(-alpha)

    def __post_init__(self):
        if self.D not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.R < self.L_c:
            raise ValueError("outer radius must not be below the lattice constant")
        if self.S_D != SOLID_ANGLE[self.D]:
            raise ValueError("S_D inconsistent with the dimension")


def _radial_integral(lower: float, upper: float, power: float) -> float:
    # integral of r^power dr, exact at the logarithmic point power = -1
    if upper <= lower:
        return 0.0
    if power == -1.0:
        return math.log(upper / lower)
    p1 = power + 1.0
    return (upper ** p1 - lower ** p1) / p1


def continuum_sum(N: int, D: int, L_c: float, alpha: float) -> ContinuumEstimate:
    """Integral estimate of sum_j d^(-alpha) for a center clock, N sites total."""
    if N < 2:
        raise ValueError("the continuum estimate needs at least two clocks")
    if D not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if not (L_c > 0 and alpha > 0):
        raise ValueError("lattice constant and alpha must be positive")
    S_D = SOLID_ANGLE[D]
    R = N ** (1.0 / D) * L_c
    power = D - 1.0 - alpha
    if D == 1:
        # two half-lines of N/2 clocks each
        value = 2.0 * (S_D / L_c) * _radial_integral(L_c, (N / 2.0) * L_c, power)
    else:
        value = (S_D / L_c ** D) * _radial_integral(L_c, R, power)
    return ContinuumEstimate(D=D, alpha=alpha, S_D=S_D, L_c=L_c, R=R, value=value)


def compare_sum_vs_integral(array: ClockArray, alpha: float) -> float:
    """Ratio exact sum / continuum estimate for the array's center clock."""
    if array.lattice is None:
        raise ValueError("comparison requires lattice metadata")
    exact = lattice_sum_exact(array, array.center_index(), alpha)
    est = continuum_sum(len(array), array.lattice.dimension,
                        array.lattice.lattice_constant, alpha)
    if est.value == 0.0:
        raise ValueError("continuum estimate is zero (degenerate 1D case N <= 2); "
                         "the ratio is undefined")
    return exact / est.value


# -- scaling-law fits ---------------------------------------------------------

# Evaluation order doubles as a parsimony ranking: when residuals tie within
# _TIE_FACTOR the earlier family wins. Pure power-law data is also fit
# perfectly by rate^2/N affine in log N, so ties do occur.
_MODEL_ORDER = ("power-law", "log-law", "sqrt-log-law", "saturating", "sqrt-n-log-law")
_TIE_FACTOR = 2.0


@dataclass(frozen=True)
class ScalingFit:
    """Best-fit scaling model for rate-vs-N data, with the full ranking."""

    model: str
    parameter: float
    coefficients: tuple[float, float]
    residual: float
    ranking: tuple[tuple[str, float], ...]


def _fit_all_models(N: np.ndarray, y: np.ndarray) -> dict:
    lnN = np.log(N)
    design_log = np.stack([np.ones_like(lnN), lnN], axis=1)
    design_inv = np.stack([np.ones_like(N), 1.0 / N], axis=1)
    fits = {}

    coef, *_ = np.linalg.lstsq(design_log, np.log(y), rcond=None)
    fits["power-law"] = (coef, np.exp(design_log @ coef), float(coef[1]))

    coef, *_ = np.linalg.lstsq(design_log, y, rcond=None)
    fits["log-law"] = (coef, design_log @ coef, float(coef[1]))

    coef, *_ = np.linalg.lstsq(design_log, y * y, rcond=None)
    fits["sqrt-log-law"] = (coef, np.sqrt(np.maximum(design_log @ coef, 0.0)), float(coef[1]))

    coef, *_ = np.linalg.lstsq(design_inv, y * y, rcond=None)
    # y = a sqrt(1 - b/N); b is the saturation coefficient
    b = float(-coef[1] / coef[0]) if coef[0] != 0 else 0.0
    fits["saturating"] = (coef, np.sqrt(np.maximum(design_inv @ coef, 0.0)), b)

    coef, *_ = np.linalg.lstsq(design_log, y * y / N, rcond=None)
    fits["sqrt-n-log-law"] = (coef, np.sqrt(np.maximum((design_log @ coef) * N, 0.0)),
                              float(coef[1]))
    return fits


def fit_scaling(points) -> ScalingFit:
    """Fit candidate scaling models to (N, rate) points and rank them.

    Each model is fit by least squares in its linearizing transform; models are
    compared by relative RMS residual in rate space. Requires at least four
    points spanning two decades in N.
    """
    pts = sorted((float(n), float(r)) for n, r in points)
    if len(pts) < 4:
        raise ValueError("need at least 4 points to fit a scaling law")
    N = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if N.min() <= 0 or np.any(y <= 0):
        raise ValueError("N and rates must be positive")
    if N.max() / N.min() < 100.0:
        raise ValueError("points must span at least two decades in N")

    fits = _fit_all_models(N, y)
    residuals = {m: float(np.sqrt(np.mean(((pred - y) / y) ** 2)))
                 for m, (coef, pred, par) in fits.items()}
    best_res = min(residuals.values())
    chosen = next(m for m in _MODEL_ORDER if residuals[m] <= _TIE_FACTOR * best_res)
    coef, _, par = fits[chosen]
    ranking = tuple(sorted(residuals.items(), key=lambda kv: kv[1]))
    return ScalingFit(model=chosen, parameter=par,
                      coefficients=(float(coef[0]), float(coef[1])),
                      residual=residuals[chosen], ranking=ranking)


# -- rate sweeps over lattice sizes ------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    N: int
    exact_sum: float
    continuum_estimate: float
    ratio: float
    rate: float


def _center_sum_fast(D: int, side: int, alpha: float, L_c: float) -> float:
    """Distance sum from the center of an odd-sided grid without building a
    ClockArray (the sweep sizes make per-site objects pointless)."""
    half = (side - 1) // 2
    ax = np.arange(-half, half + 1, dtype=float) * L_c
    if D == 1:
        d2 = ax ** 2
    elif D == 2:
        d2 = (ax ** 2)[:, None] + (ax ** 2)[None, :]
    else:
        d2 = ((ax ** 2)[:, None, None] + (ax ** 2)[None, :, None]
              + (ax ** 2)[None, None, :])
    d2 = d2.ravel()
    d2 = d2[d2 > 0]
    return kahan_sum((d2 ** (-alpha / 2.0)).tolist())


def scaling_rate_sweep(D: int, mode: str, case: str, omega: float,
                       L_c: float = 1.0, sides=None) -> list[SweepPoint]:
    """Center-clock minimum dephasing rate versus N for one channel/case.

    mode/case pairs map onto the closed-form minima: (pairwise, A-free) uses
    the alpha=1 sum, (global, A-free) and both B-fixed cases use alpha=2.
    Sides must be odd so a true center clock exists.
    """
    from .constants import CONSTANTS  # local import to keep module load light

    if mode not in ("pairwise", "global") or case not in ("A-free", "B-fixed"):
        raise ValueError(f"unsupported mode/case combination ({mode}, {case})")
    if sides is None:
        sides = DEFAULT_SIDES[D]
    sides = [int(s) for s in sides]
    if any(s < 3 or s % 2 == 0 for s in sides):
        raise ValueError("sweep sides must be odd and at least 3")
    alpha = 1.0 if (mode, case) == ("pairwise", "A-free") else 2.0
    prefactor = CONSTANTS.G * CONSTANTS.hbar * float(omega) ** 2 / (2.0 * CONSTANTS.c ** 4)

    points = []
    for side in sides:
        n = side ** D
        s = _center_sum_fast(D, side, alpha, L_c)
        est = continuum_sum(n, D, L_c, alpha).value
        if (mode, case) == ("pairwise", "A-free"):
            rate = prefactor * s
        elif (mode, case) == ("global", "A-free"):
            rate = prefactor * math.sqrt(s)
        elif (mode, case) == ("pairwise", "B-fixed"):
            rate = prefactor * math.sqrt((n - 1) * s)
        else:  # global, B-fixed
            rate = prefactor * math.sqrt(s)
        points.append(SweepPoint(N=n, exact_sum=s, continuum_estimate=est,
                                 ratio=s / est, rate=rate))
    return points
