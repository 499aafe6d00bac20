"""Acceptance suite: one test per acceptance criterion, one pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they are produced.
"""

import json
import math

import numpy as np
import pytest

from ccgclocks.continuum import DEFAULT_SIDES, fit_scaling, scaling_rate_sweep
from ccgclocks.geometry import ClockArray, pair_rate_matrix
from ccgclocks.lindblad import (
    DensityMatrix,
    coherence_decay_rate,
    dimensionless_model,
    evolve_exact,
    evolve_numeric,
    negativity,
    simulate_coherence,
    single_clock_coherences,
)
from ccgclocks.rates import (
    MeasurementRates,
    min_dephasing_global_A,
    min_dephasing_pairwise_A,
    optimize_rates,
)
from ccgclocks.redshift import (
    CompositeBody,
    ExplicitAtoms,
    composite_dephasing,
    shell_dephasing,
)
from ccgclocks.report import paper_report
from ccgclocks.scenarios import run_scenario


def criterion(number: int, description: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] criterion {number}: {description}" +
          (f" ({detail})" if detail else ""))
    assert ok, f"criterion {number} failed: {description} {detail}"


def random_geometry(rng, n, min_sep=0.08):
    while True:
        pos = rng.uniform(0.0, 1.0, size=(n, 3))
        diff = pos[:, None] - pos[None, :]
        d = np.sqrt((diff**2).sum(-1))
        np.fill_diagonal(d, np.inf)
        if d.min() > min_sep:
            return ClockArray(np.full(n, 1e15), pos)


def random_ket(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def test_criterion_1_optimizer_closed_form_equivalence():
    rng = np.random.default_rng(20260810)
    worst_gamma, worst_obj = 0.0, 0.0
    for trial in range(50):
        n = int(rng.integers(2, 13))
        g = pair_rate_matrix(random_geometry(rng, n))
        off = ~np.eye(n, dtype=bool)

        rates_pw, rep_pw = optimize_rates(g, "pairwise")
        err_pw = np.max(np.abs(rates_pw.pairwise_gamma[off] / (g.g[off] / 2.0) - 1.0))
        closed_pw = min_dephasing_pairwise_A(g)
        obj_pw = abs(rep_pw.objective() / closed_pw.objective() - 1.0)

        rates_gl, rep_gl = optimize_rates(g, "global")
        target = np.sqrt((g.g**2).sum(axis=1)) / 2.0
        err_gl = np.max(np.abs(rates_gl.global_gamma / target - 1.0))
        closed_gl = min_dephasing_global_A(g)
        obj_gl = abs(rep_gl.objective() / closed_gl.objective() - 1.0)

        worst_gamma = max(worst_gamma, err_pw, err_gl)
        worst_obj = max(worst_obj, obj_pw, obj_gl)
    criterion(1, "optimizer recovers closed-form minima on 50 random geometries",
              worst_gamma <= 1e-6 and worst_obj <= 1e-10,
              f"max rate err {worst_gamma:.2e}, max objective err {worst_obj:.2e}")


def test_criterion_2_master_equation_decay_rate():
    model = dimensionless_model([[0.0, 1.0], [1.0, 0.0]], kind="ccg-pairwise")
    times = np.linspace(0.0, 3.0, 31)

    exact_trace = simulate_coherence(model, ["plus", "zero"], times)
    rate_exact = float(coherence_decay_rate(exact_trace, clock=0))

    rho0 = DensityMatrix.from_qubit_states(["plus", "zero"])
    dt = times[-1] / 10**4
    mags = np.empty((len(times), 2))
    for k, t in enumerate(times):
        out = evolve_numeric(rho0, model, float(t), dt)
        mags[k] = single_clock_coherences(out.rho)
    from ccgclocks.lindblad import CoherenceTrace
    rate_numeric = float(coherence_decay_rate(
        CoherenceTrace(times=times, magnitudes=mags), clock=0))

    ok = abs(rate_exact - 2.0) <= 1e-6 and abs(rate_numeric - 2.0) <= 1e-3
    criterion(2, "two-clock optimum dephases at rate 2g", ok,
              f"exact {rate_exact:.9f}, numeric {rate_numeric:.6f}")


def test_criterion_3_propagator_oracle_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for trial in range(20):
        n = int(rng.integers(2, 5))
        pos = rng.uniform(0.0, 1.0, size=(n, 3)) + np.arange(n)[:, None] * 0.3
        d = np.sqrt(((pos[:, None] - pos[None, :])**2).sum(-1))
        np.fill_diagonal(d, np.inf)
        g = 1.0 / d
        g[np.isinf(d)] = 0.0
        g = 0.5 * (g + g.T) / g.max()
        kind = "ccg-pairwise" if trial % 2 == 0 else "ccg-global"
        if kind == "ccg-pairwise":
            gam = rng.uniform(0.3, 1.5, size=(n, n))
            np.fill_diagonal(gam, 0.0)
            rates = MeasurementRates("pairwise", pairwise_gamma=gam)
        else:
            rates = MeasurementRates("global",
                                     global_gamma=rng.uniform(0.3, 1.5, size=n))
        model = dimensionless_model(g, kind=kind, rates=rates,
                                    omegas=rng.uniform(0.0, 1.0, size=n))
        a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
        m = a @ a.conj().T
        rho0 = DensityMatrix(m / np.trace(m))
        for t in (2.5, 5.0):
            exact = evolve_exact(rho0, model, t)
            numeric = evolve_numeric(rho0, model, t, dt=2.5e-4)
            worst = max(worst, float(np.linalg.norm(
                exact.matrix - numeric.rho.matrix)))
    criterion(3, "exact and numeric propagators agree on 20 random cases",
              worst <= 1e-8, f"max Frobenius distance {worst:.2e}")


def test_criterion_4_locc_property():
    rng = np.random.default_rng(11)
    g3 = np.array([[0.0, 1.0, 0.6], [1.0, 0.0, 0.3], [0.6, 0.3, 0.0]])
    g2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    times = np.linspace(0.0, 8.0, 17)

    max_neg = 0.0
    for n, g in ((2, g2), (3, g3)):
        states = [[random_ket(rng) for _ in range(n)] for _ in range(10)]
        rate_sets = {"ccg-pairwise": ["optimal"], "ccg-global": ["optimal"]}
        gam = rng.uniform(0.3, 1.5, size=(n, n))
        np.fill_diagonal(gam, 0.0)
        rate_sets["ccg-pairwise"].append(
            MeasurementRates("pairwise", pairwise_gamma=gam))
        rate_sets["ccg-global"].append(
            MeasurementRates("global", global_gamma=rng.uniform(0.3, 1.5, size=n)))
        partitions = [[i] for i in range(n)] + ([[0, 1]] if n == 3 else [])
        for kind, rate_list in rate_sets.items():
            for rates in rate_list:
                model = dimensionless_model(g, kind=kind, rates=rates)
                for kets in states:
                    rho0 = DensityMatrix.from_qubit_states(kets)
                    for t in times:
                        rho = evolve_exact(rho0, model, float(t))
                        for part in partitions:
                            max_neg = max(max_neg, negativity(rho, part))

    unitary = dimensionless_model(g2, kind="unitary", rates=None)
    rho_pp = DensityMatrix.all_plus(2)
    neg_quarter = negativity(evolve_exact(rho_pp, unitary, math.pi / 4), [0])

    short = np.logspace(-3, -1.5, 12)
    ccg_model = dimensionless_model(g2, kind="ccg-pairwise")
    loss_ccg = 1.0 - simulate_coherence(ccg_model, ["plus", "plus"],
                                        short).magnitudes[:, 0] / 0.5
    loss_uni = 1.0 - simulate_coherence(unitary, ["plus", "plus"],
                                        short).magnitudes[:, 0] / 0.5
    slope_ccg = float(np.polyfit(np.log(short), np.log(loss_ccg), 1)[0])
    slope_uni = float(np.polyfit(np.log(short), np.log(loss_uni), 1)[0])

    ok = (max_neg <= 1e-10 and neg_quarter >= 0.49
          and abs(slope_ccg - 1.0) <= 0.05 and abs(slope_uni - 2.0) <= 0.05)
    criterion(4, "channel kinds never entangle; unitary does; loss orders 1 vs 2",
              ok, f"max negativity {max_neg:.2e}, unitary peak {neg_quarter:.3f}, "
                  f"slopes {slope_ccg:.3f}/{slope_uni:.3f}")


# (mode, case, D) -> (expected model, stated power exponent or None)
TABLE_ENTRIES = {
    ("pairwise", "A-free", 1): ("log-law", None),
    ("pairwise", "A-free", 2): ("power-law", 0.5),
    ("pairwise", "A-free", 3): ("power-law", 2.0 / 3.0),
    ("global", "A-free", 1): ("saturating", None),
    ("global", "A-free", 2): ("sqrt-log-law", None),
    ("global", "A-free", 3): ("power-law", 1.0 / 6.0),
    ("pairwise", "B-fixed", 1): ("power-law", 0.5),
    ("pairwise", "B-fixed", 2): ("sqrt-n-log-law", None),
    ("pairwise", "B-fixed", 3): ("power-law", 2.0 / 3.0),
}


def test_criterion_5_table_scaling_laws():
    failures = []
    ratio_lo, ratio_hi = math.inf, 0.0
    for (mode, case, dim), (want_model, want_exp) in TABLE_ENTRIES.items():
        points = scaling_rate_sweep(dim, mode, case, omega=1e15,
                                    sides=DEFAULT_SIDES[dim])
        for p in points:
            ratio_lo = min(ratio_lo, p.ratio)
            ratio_hi = max(ratio_hi, p.ratio)
        fit = fit_scaling([(p.N, p.rate) for p in points])
        if fit.model != want_model:
            failures.append(f"{mode}/{case}/{dim}D got {fit.model}")
        elif want_exp is not None and abs(fit.parameter - want_exp) > 0.05:
            failures.append(f"{mode}/{case}/{dim}D exponent {fit.parameter:.3f}")
    ratios_ok = ratio_lo >= 1.0 / 3.0 and ratio_hi <= 3.0
    criterion(5, "exact sweeps reproduce all nine scaling-law entries",
              not failures and ratios_ok,
              f"failures={failures or 'none'}, sum/integral ratio in "
              f"[{ratio_lo:.3f}, {ratio_hi:.3f}]")


def _shell_atoms(inner, outer, spacing):
    n = int(math.ceil(outer / spacing)) + 1
    ax = (np.arange(-n, n + 1) + 0.5) * spacing
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    pos = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    d2 = (pos**2).sum(axis=1)
    return pos[(d2 >= inner**2) & (d2 <= outer**2)]


def test_criterion_6_shell_formula():
    inner, outer, omega = 0.5, 1.5, 1e15
    closed = shell_dephasing(inner, outer, omega, gamma_z=0.0).feedback_part
    errors, spacings = [], []
    for k in (4, 8, 16, 32):
        h = inner / k
        body = CompositeBody(1.0, h, ExplicitAtoms(_shell_atoms(inner, outer, h)))
        got = composite_dephasing(body, (0, 0, 0), omega, 0.0).feedback_part
        errors.append(abs(got - closed) / closed)
        spacings.append(h)
    order = float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])
    monotone = all(a > b for a, b in zip(errors, errors[1:]))
    ok = errors[-1] <= 0.01 and order >= 1.0 and monotone
    criterion(6, "discretized shell converges to the closed form",
              ok, f"finest error {errors[-1]:.2e}, observed order {order:.2f}")


def test_criterion_7_headline_report():
    rep = paper_report()

    def direct_row(claim_id):
        entry = rep.claim(claim_id)
        return [r for r in entry.rows if r.convention == "direct"][0]

    checks = {
        "two-clock within x10": direct_row("two-clock-300nm").fold_difference <= 10,
        "fractional within x10":
            direct_row("fractional-uncertainty").fold_difference <= 10,
        "earth gamma_i within x3":
            direct_row("earth-gamma-i").fold_difference <= 3,
        "earth gamma_z within x2":
            direct_row("earth-gamma-z").fold_difference <= 2.0 + 1e-9,
    }
    best_1e6 = rep.claim("array-1e6-800nm").closest_row()
    checks["1e6-array within x100 with mode"] = (
        best_1e6.fold_difference <= 100 and best_1e6.mode in ("pairwise", "global"))
    for claim_id in ("array-1e23-1fm", "mossbauer-linewidth",
                     "mossbauer-atom-count"):
        combos = {(r.convention, r.mode) for r in rep.claim(claim_id).rows}
        checks[f"{claim_id} tabulates 4 combos"] = combos == {
            ("direct", "pairwise"), ("direct", "global"),
            ("times-two-pi", "pairwise"), ("times-two-pi", "global")}
    failed = [name for name, ok in checks.items() if not ok]
    criterion(7, "headline numbers reproduced within their stated factors",
              not failed, f"failed={failed or 'none'}")


SCENARIO_SET = [
    {"kind": "rates",
     "parameters": {"geometry": {"clocks": [
         {"quoted_frequency": 1e15, "position": [0, 0, 0]},
         {"quoted_frequency": 1e15, "position": [3e-7, 0, 0]}]},
         "mode": "pairwise", "case": "A-free"},
     "output": {"stem": "rates_pair"}},
    {"kind": "optimize",
     "parameters": {"geometry": {"lattice": {
         "dimension": 1, "lattice_constant": 1e-6, "counts": [4],
         "quoted_frequency": 1e15}}, "mode": "global"},
     "output": {"stem": "optimize_chain"}},
    {"kind": "scaling-sweep", "convention": "both",
     "parameters": {"dimension": 1, "mode": "pairwise", "case": "A-free",
                    "sides": [5, 11, 101, 1001]},
     "output": {"stem": "scaling_1d"}},
    {"kind": "simulate",
     "parameters": {"kind": "ccg-pairwise", "initial_state": ["plus", "zero"],
                    "times": {"stop": 3.0, "num": 61},
                    "export_density_matrix": True},
     "output": {"stem": "sim_opt"}},
    {"kind": "redshift",
     "parameters": {"body": {"kind": "shell", "inner_radius": 0.01,
                             "outer_radius": 1.0},
                    "quoted_frequency": 1e15, "gamma_clock": 1e-4},
     "output": {"stem": "shell"}},
    {"kind": "paper-report", "output": {"stem": "headlines"}},
]


def test_criterion_8_determinism(tmp_path):
    trees = []
    for run in ("first", "second"):
        out = tmp_path / run
        for cfg in SCENARIO_SET:
            run_scenario(json.loads(json.dumps(cfg)), out)
        trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same_names = sorted(trees[0]) == sorted(trees[1])
    same_bytes = same_names and all(trees[0][k] == trees[1][k] for k in trees[0])
    criterion(8, "rerunning the scenario set is byte-identical",
              same_bytes, f"{len(trees[0])} files compared")
