"""Exact and numerical evolution of N-clock states under the clock channel.

Every generator here is diagonal in the computational (sigma_z product) basis:
the Hamiltonian is H = sum_i hbar w_i sz_i - hbar sum_{i<j} g_ij sz_i sz_j and
the dissipator is a quadratic form of sigma_z commutators,

    L_diss(rho) = - sum_{jk} M_jk [sz_j, [sz_k, rho]].

For pairwise feedback the matrix M is diagonal (independent measurement
records per pair). For global feedback the broadcast of one record to every
other clock makes the feedback noise correlated: M picks up rank-one blocks
b_j b_j^T / (8 Gamma_j) with b_j[i] = g_ij. The diagonal of M is the familiar
per-clock dephasing rate in either case, and a single clock's coherence decays
at exactly 4 * M_ii; the off-diagonal entries only matter for multi-clock
coherences. They are what keeps the global channel entanglement-free: with a
diagonal-only dissipator the same per-clock rates can leave a weakly negative
partial transpose for three or more clocks.

Matrix elements evolve in closed form,

    rho_ab(t) = rho_ab(0) * exp(-i (e_a - e_b) t) * exp(-Lambda_ab t),
    Lambda_ab = (z_a - z_b)^T M (z_a - z_b),

which evolve_exact applies directly. evolve_numeric integrates the same master
equation with fixed-step classical RK4 on the vectorized generator and serves
as the independent oracle for the closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .constants import Rate
from .geometry import ClockArray, pair_rate_matrix
from .rates import MeasurementRates, dephasing_given_rates

DENSE_CLOCK_LIMIT = 12       # 2^N density matrices
ANALYTIC_CLOCK_LIMIT = 20    # closed-form coherences only
NUMERIC_CLOCK_LIMIT = 6      # 4^N vectorized generator

_NAMED_KETS = {
    "zero": np.array([1.0, 0.0], dtype=complex),
    "one": np.array([0.0, 1.0], dtype=complex),
    "plus": np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
    "minus": np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0),
    "plus-i": np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2.0),
}


def qubit_state(state) -> np.ndarray:
    """Normalize a qubit description (name, ket or 2x2 matrix) to a 2x2 dm."""
    if isinstance(state, str):
        if state not in _NAMED_KETS:
            raise ValueError(f"unknown state name {state!r}; "
                             f"choose from {sorted(_NAMED_KETS)}")
        ket = _NAMED_KETS[state]
        return np.outer(ket, ket.conj())
    arr = np.asarray(state, dtype=complex)
    if arr.shape == (2,):
        norm = np.linalg.norm(arr)
        if norm == 0:
            raise ValueError("qubit ket must be non-zero")
        ket = arr / norm
        return np.outer(ket, ket.conj())
    if arr.shape == (2, 2):
        return arr
    raise ValueError(f"cannot interpret {state!r} as a qubit state")


class DensityMatrix:
    """2^N x 2^N Hermitian, unit-trace, positive-semidefinite state."""

    HERMITICITY_TOL = 1e-12
    TRACE_TOL = 1e-12
    EIGENVALUE_FLOOR = -1e-10

    def __init__(self, matrix, eigenvalue_floor: float | None = None):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got {m.shape}")
        dim = m.shape[0]
        n = int(round(math.log2(dim)))
        if 2 ** n != dim:
            raise ValueError(f"dimension {dim} is not a power of two")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.conj().T)) > self.HERMITICITY_TOL * scale:
            raise ValueError("density matrix is not Hermitian")
        if abs(m.trace() - 1.0) > self.TRACE_TOL:
            raise ValueError(f"trace must be 1, got {m.trace()}")
        floor = self.EIGENVALUE_FLOOR if eigenvalue_floor is None else eigenvalue_floor
        if float(np.min(np.linalg.eigvalsh(m))) < floor:
            raise ValueError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        self._m = m
        self.n_clocks = n

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @classmethod
    def from_qubit_states(cls, states) -> "DensityMatrix":
        rho = np.array([[1.0 + 0j]])
        for s in states:
            rho = np.kron(rho, qubit_state(s))
        return cls(rho)

    @classmethod
    def all_plus(cls, n_clocks: int) -> "DensityMatrix":
        return cls.from_qubit_states(["plus"] * n_clocks)

    def purity(self) -> float:
        return float(np.real(np.trace(self._m @ self._m)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self._m)).copy()

    def to_json_dict(self) -> dict:
        if self.n_clocks > 4:
            raise ValueError("JSON export is limited to 4 clocks")
        return {
            "n_clocks": self.n_clocks,
            "real": [[float(x) for x in row] for row in self._m.real],
            "imag": [[float(x) for x in row] for row in self._m.imag],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _z_table(n: int) -> np.ndarray:
    """(2^n, n) table of sigma_z eigenvalues; clock 0 is the leading bit."""
    basis = np.arange(2 ** n)
    z = np.empty((2 ** n, n))
    for i in range(n):
        z[:, i] = 1.0 - 2.0 * ((basis >> (n - 1 - i)) & 1)
    return z


@dataclass(frozen=True)
class EvolutionModel:
    """Hamiltonian plus dephasing data for one evolution kind.

    `dephasing` is the full coefficient matrix M described in the module
    docstring; its diagonal holds the per-clock rates. `time_unit` records how
    many seconds one unit of evolution time corresponds to (None = SI).
    """

    kind: str
    omegas: np.ndarray
    coupling: np.ndarray
    dephasing: np.ndarray
    interaction_sign: float = -1.0
    time_unit: float | None = None
    analytic_only: bool = False

    def __post_init__(self):
        if self.kind not in ("unitary", "ccg-pairwise", "ccg-global"):
            raise ValueError(f"unknown evolution kind {self.kind!r}")
        w = np.asarray(self.omegas, dtype=float).reshape(-1)
        n = len(w)
        g = np.asarray(self.coupling, dtype=float)
        m = np.asarray(self.dephasing, dtype=float)
        if g.shape != (n, n) or not np.allclose(g, g.T, rtol=0, atol=0):
            raise ValueError("coupling must be a symmetric N x N matrix")
        if np.any(np.diag(g) != 0):
            raise ValueError("coupling diagonal must be zero")
        if m.shape != (n, n):
            raise ValueError("dephasing matrix must be N x N")
        if np.any(np.diag(m) < 0):
            raise ValueError("per-clock dephasing rates must be non-negative")
        if self.kind == "unitary" and np.any(m != 0):
            raise ValueError("unitary kind must have zero dephasing")
        if abs(self.interaction_sign) != 1.0:
            raise ValueError("interaction sign must be +1 or -1")
        for arr in (w, g, m):
            arr.setflags(write=False)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "coupling", g)
        object.__setattr__(self, "dephasing", m)

    @property
    def n_clocks(self) -> int:
        return len(self.omegas)

    @property
    def per_clock_dephasing(self) -> np.ndarray:
        return np.diag(self.dephasing).copy()

    def basis_energies(self) -> np.ndarray:
        """e_a = sum_i w_i z_i(a) + sign * sum_{i<j} g_ij z_i z_j (units of hbar)."""
        z = _z_table(self.n_clocks)
        e = z @ self.omegas
        zg = z @ (self.interaction_sign * self.coupling)
        e += 0.5 * np.einsum("ai,ai->a", zg, z)  # each pair counted once
        return e

    def nondimensionalized(self, reference: float | None = None) -> "EvolutionModel":
        """Rescale so the reference rate (default: max coupling) equals one."""
        if reference is None:
            reference = float(np.max(self.coupling))
        if not reference > 0:
            raise ValueError("reference rate must be positive")
        return EvolutionModel(
            kind=self.kind,
            omegas=self.omegas / reference,
            coupling=self.coupling / reference,
            dephasing=self.dephasing / reference,
            interaction_sign=self.interaction_sign,
            time_unit=1.0 / reference,
            analytic_only=self.analytic_only,
        )


def _global_dephasing_matrix(g: np.ndarray, gamma: np.ndarray,
                             correlated: bool) -> np.ndarray:
    n = len(gamma)
    m = np.diag(gamma / 2.0).astype(float)
    for j in range(n):
        b = g[:, j].copy()
        b[j] = 0.0
        if correlated:
            m += np.outer(b, b) / (8.0 * gamma[j])
        else:
            m += np.diag(b ** 2) / (8.0 * gamma[j])
    return m


def build_model(array: ClockArray, rates: MeasurementRates | None = None, *,
                correlated_feedback_noise: bool = True,
                analytic_only: bool = False) -> EvolutionModel:
    """Build the evolution model for an array, optionally with a channel.

    Without rates the model is purely unitary. With rates the per-clock
    dephasing follows the pairwise/global channel formulas; the global kind
    carries the correlated feedback-noise terms unless explicitly disabled
    (the diagonal-only variant exists to demonstrate why they are needed).
    """
    n = len(array)
    limit = ANALYTIC_CLOCK_LIMIT if analytic_only else DENSE_CLOCK_LIMIT
    if n > limit:
        if analytic_only:
            raise ValueError(f"at most {ANALYTIC_CLOCK_LIMIT} clocks are supported")
        raise ValueError(
            f"dense 2^N evolution is limited to {DENSE_CLOCK_LIMIT} clocks; "
            f"pass analytic_only=True for closed-form coherences up to "
            f"{ANALYTIC_CLOCK_LIMIT}")
    g = pair_rate_matrix(array)
    if rates is None:
        kind = "unitary"
        m = np.zeros((n, n))
    elif rates.mode == "pairwise":
        kind = "ccg-pairwise"
        m = np.diag(dephasing_given_rates(g, rates).per_clock)
    else:
        kind = "ccg-global"
        if len(rates) != n:
            raise ValueError("rates do not match the array size")
        m = _global_dephasing_matrix(g.g, rates.global_gamma,
                                     correlated_feedback_noise)
    return EvolutionModel(kind=kind, omegas=array.omegas.copy(),
                          coupling=g.g.copy(), dephasing=m,
                          analytic_only=analytic_only)


def dimensionless_model(coupling, kind: str = "ccg-pairwise", omegas=None,
                        rates: MeasurementRates | str | None = "optimal", *,
                        correlated_feedback_noise: bool = True) -> EvolutionModel:
    """Model from a dimensionless coupling matrix (reference rate = 1).

    rates="optimal" picks the summed-dephasing minimum for the kind; a
    MeasurementRates instance is used as given; None requires kind="unitary".
    """
    from .geometry import PairRateMatrix
    from .rates import min_dephasing_global_A, min_dephasing_pairwise_A

    g = PairRateMatrix.from_matrix(coupling)
    n = len(g)
    w = np.zeros(n) if omegas is None else np.asarray(omegas, dtype=float)
    if kind == "unitary":
        m = np.zeros((n, n))
    else:
        if rates == "optimal":
            if kind == "ccg-pairwise":
                rates = min_dephasing_pairwise_A(g).optimal_rates
            else:
                rates = min_dephasing_global_A(g).optimal_rates
            if rates is None:
                raise ValueError("optimal rates are undefined for this coupling")
        if not isinstance(rates, MeasurementRates):
            raise ValueError("ccg kinds need measurement rates")
        if kind == "ccg-pairwise":
            if rates.mode != "pairwise":
                raise ValueError("ccg-pairwise needs pairwise rates")
            m = np.diag(dephasing_given_rates(g, rates).per_clock)
        elif kind == "ccg-global":
            if rates.mode != "global":
                raise ValueError("ccg-global needs global rates")
            m = _global_dephasing_matrix(g.g, rates.global_gamma,
                                         correlated_feedback_noise)
        else:
            raise ValueError(f"unknown evolution kind {kind!r}")
    return EvolutionModel(kind=kind, omegas=w, coupling=g.g.copy(),
                          dephasing=m, time_unit=1.0)


# -- propagation --------------------------------------------------------------

def _phase_and_decay(model: EvolutionModel, t: float):
    e = model.basis_energies()
    z = _z_table(model.n_clocks)
    zm = z @ model.dephasing
    q = np.einsum("ai,ai->a", zm, z)
    lam = q[:, None] + q[None, :] - 2.0 * (zm @ z.T)
    return np.exp((-1j * np.subtract.outer(e, e) - lam) * t)


def evolve_exact(rho0: DensityMatrix, model: EvolutionModel, t: float) -> DensityMatrix:
    """Closed-form propagation; exact because the generator is diagonal."""
    if model.analytic_only:
        raise ValueError("model was built for closed-form coherences only")
    if t < 0:
        raise ValueError("time must be non-negative")
    if rho0.n_clocks != model.n_clocks:
        raise ValueError("state and model sizes differ")
    return DensityMatrix(rho0.matrix * _phase_and_decay(model, t))


@dataclass(frozen=True)
class NumericEvolution:
    """Result of the fixed-step integrator, with its step-halving estimate."""

    rho: DensityMatrix
    convergence_estimate: float
    n_steps: int


def _vectorized_generator(model: EvolutionModel) -> np.ndarray:
    n = model.n_clocks
    dim = 2 ** n
    z = _z_table(n)
    h = np.diag(model.basis_energies()).astype(complex)
    eye = np.eye(dim, dtype=complex)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    comms = []
    for i in range(n):
        sz = np.diag(z[:, i]).astype(complex)
        comms.append(np.kron(sz, eye) - np.kron(eye, sz.T))
    m = model.dephasing
    for j in range(n):
        for k in range(n):
            if m[j, k] != 0.0:
                gen -= m[j, k] * (comms[j] @ comms[k])
    return gen


def _rk4_step_operator(gen: np.ndarray, dt: float) -> np.ndarray:
    # classical RK4 on a linear autonomous system collapses to the degree-4
    # Taylor polynomial of exp(dt * L); evaluating it as a matrix lets long
    # runs use binary powering without changing the method
    a = dt * gen
    eye = np.eye(gen.shape[0], dtype=complex)
    a2 = a @ a
    return eye + a + a2 / 2.0 + (a2 @ a) / 6.0 + (a2 @ a2) / 24.0


def _matrix_power_apply(op: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    out = v
    p = op
    while n:
        if n & 1:
            out = p @ out
        n >>= 1
        if n:
            p = p @ p
    return out


def _rk4_run(gen: np.ndarray, rho0: np.ndarray, t: float, n_steps: int) -> np.ndarray:
    op = _rk4_step_operator(gen, t / n_steps)
    v = _matrix_power_apply(op, rho0.reshape(-1), n_steps)
    return v.reshape(rho0.shape)


def evolve_numeric(rho0: DensityMatrix, model: EvolutionModel, t: float,
                   dt: float) -> NumericEvolution:
    """Fixed-step 4th-order integration of the master equation.

    Integrates d(rho)/dt = -i[H, rho] - sum_{jk} M_jk [sz_j, [sz_k, rho]] with
    step size at most dt, and attaches the Frobenius distance to a half-step
    rerun as a convergence estimate.
    """
    if model.analytic_only:
        raise ValueError("model was built for closed-form coherences only")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t < 0:
        raise ValueError("time must be non-negative")
    if model.n_clocks > NUMERIC_CLOCK_LIMIT:
        raise ValueError(
            f"the vectorized integrator is limited to {NUMERIC_CLOCK_LIMIT} "
            "clocks; use evolve_exact for larger systems")
    if rho0.n_clocks != model.n_clocks:
        raise ValueError("state and model sizes differ")
    if t == 0.0:
        return NumericEvolution(rho=rho0, convergence_estimate=0.0, n_steps=0)
    n_steps = max(1, int(math.ceil(t / dt)))
    gen = _vectorized_generator(model)
    result = _rk4_run(gen, rho0.matrix, t, n_steps)
    halved = _rk4_run(gen, rho0.matrix, t, 2 * n_steps)
    estimate = float(np.linalg.norm(result - halved))
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (result + result.conj().T))))
    if min_eig < -1e-8:
        raise ValueError(
            f"positivity violated by {min_eig:.2e}; the step dt={dt} is too large")
    # integrator results may sit between the -1e-8 gate and the type's
    # stricter default floor; tolerate that window explicitly
    return NumericEvolution(rho=DensityMatrix(result, eigenvalue_floor=-1e-8),
                            convergence_estimate=estimate, n_steps=n_steps)


# -- coherences and diagnostics ------------------------------------------------

def single_clock_coherences(rho: DensityMatrix) -> np.ndarray:
    """|<sigma_+^(i)>| for each clock i."""
    n = rho.n_clocks
    m = rho.matrix
    out = np.empty(n)
    idx = np.arange(2 ** n)
    for i in range(n):
        step = 1 << (n - 1 - i)
        upper = idx[(idx >> (n - 1 - i)) & 1 == 1]
        out[i] = abs(m[upper, upper - step].sum())
    return out


@dataclass(frozen=True)
class CoherenceTrace:
    """Per-clock coherence magnitudes on a time grid."""

    times: np.ndarray
    magnitudes: np.ndarray  # shape (T, N)
    fitted_rate: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        m = np.asarray(self.magnitudes, dtype=float)
        if m.ndim != 2 or m.shape[0] != len(t):
            raise ValueError("magnitudes must have shape (len(times), n_clocks)")
        if np.any(m < -1e-12) or np.any(m > 0.5 + 1e-9):
            raise ValueError("coherence magnitudes must lie in [0, 1/2]")
        t.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "magnitudes", m)

    def csv_rows(self) -> list[list]:
        n = self.magnitudes.shape[1]
        rows = [["time"] + [f"coherence_{i}" for i in range(n)]]
        for k, t in enumerate(self.times):
            rows.append([repr(float(t))] +
                        [repr(float(x)) for x in self.magnitudes[k]])
        return rows


def simulate_coherence(model: EvolutionModel, initial, times) -> CoherenceTrace:
    """Evolve an initial state exactly and record per-clock coherences."""
    rho0 = initial if isinstance(initial, DensityMatrix) \
        else DensityMatrix.from_qubit_states(initial)
    times = np.asarray(times, dtype=float)
    mags = np.empty((len(times), model.n_clocks))
    for k, t in enumerate(times):
        mags[k] = single_clock_coherences(evolve_exact(rho0, model, float(t)))
    return CoherenceTrace(times=times, magnitudes=mags)


def product_state_coherence(model: EvolutionModel, qubit_states, times) -> CoherenceTrace:
    """Closed-form per-clock coherences for a product initial state.

    O(N) per clock and time sample, so it works for models up to the analytic
    clock limit where dense density matrices are out of reach.
    """
    n = model.n_clocks
    states = [qubit_state(s) for s in qubit_states]
    if len(states) != n:
        raise ValueError("need one qubit state per clock")
    times = np.asarray(times, dtype=float)
    pops = np.array([np.real(s[0, 0]) for s in states])
    cohs = np.array([s[1, 0] for s in states])
    d = model.per_clock_dephasing
    sign = model.interaction_sign
    mags = np.empty((len(times), n))
    for k, t in enumerate(times):
        for i in range(n):
            env = 1.0 + 0j
            for j in range(n):
                if j == i:
                    continue
                phase = np.exp(2j * sign * model.coupling[i, j] * t)
                env *= pops[j] * phase + (1.0 - pops[j]) / phase
            mags[k, i] = abs(cohs[i]) * math.exp(-4.0 * d[i] * t) * abs(env)
    return CoherenceTrace(times=times, magnitudes=mags)


def coherence_decay_rate(trace: CoherenceTrace, clock: int = 0,
                         residual_threshold: float = 1e-3) -> Rate:
    """Exponential decay rate of one clock's coherence (minus the log-slope).

    Raises if the trace is not exponential to within the threshold (relative
    RMS residual of the straight-line fit in log space), e.g. for the
    oscillatory coherence of purely unitary evolution.
    """
    if len(trace.times) < 10:
        raise ValueError("need at least 10 samples to fit a decay rate")
    y = trace.magnitudes[:, clock]
    if not y[0] > 0:
        raise ValueError("initial coherence must be positive")
    if np.any(y <= 0):
        raise ValueError("coherence reaches zero: not an exponential decay")
    logy = np.log(y)
    slope, intercept = np.polyfit(trace.times, logy, 1)
    resid = float(np.sqrt(np.mean((logy - (slope * trace.times + intercept)) ** 2)))
    if resid > residual_threshold:
        raise ValueError(
            f"trace is not exponential (log-residual {resid:.3e} exceeds "
            f"{residual_threshold:.1e})")
    rate = -float(slope)
    if rate < 0:
        if rate > -1e-12:
            rate = 0.0
        else:
            raise ValueError("coherence grows; not a decay")
    return Rate(rate)


def negativity(rho: DensityMatrix, partition) -> float:
    """Entanglement negativity across a bipartition (sum |negative eigenvalues|
    of the partial transpose over the given clocks)."""
    n = rho.n_clocks
    part = sorted(set(int(i) for i in partition))
    if any(i < 0 or i >= n for i in part):
        raise ValueError(f"partition indices must lie in [0, {n})")
    if not 0 < len(part) < n:
        raise ValueError("partition must be a non-empty proper subset of the clocks")
    tensor = rho.matrix.reshape((2,) * (2 * n))
    perm = list(range(2 * n))
    for q in part:
        perm[q], perm[n + q] = perm[n + q], perm[q]
    pt = np.transpose(tensor, perm).reshape(2 ** n, 2 ** n)
    eigs = np.linalg.eigvalsh(pt)
    return float(-eigs[eigs < 0].sum()) + 0.0
