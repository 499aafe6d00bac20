"""Scenario configs: schema validation, dispatch and deterministic outputs.

A scenario is a JSON document with a `kind`, optional `convention` and
`output` blocks, and kind-specific `parameters`. Validation is strict
(unknown keys are rejected) and every emitted file is byte-identical across
reruns of the same config: floats are written with repr, JSON keys are
sorted, and CSV rows end with CRLF.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .constants import FrequencyConvention, apply_convention
from .continuum import fit_scaling, scaling_rate_sweep
from .geometry import ClockArray, ClockSpec, build_lattice, pair_rate_matrix
from .lindblad import (
    DensityMatrix,
    coherence_decay_rate,
    dimensionless_model,
    simulate_coherence,
)
from .rates import (
    MeasurementRates,
    dephasing_given_rates,
    min_dephasing_global_A,
    min_dephasing_global_B,
    min_dephasing_pairwise_A,
    min_dephasing_pairwise_B,
    optimize_rates,
)
from .redshift import (
    CompositeBody,
    ExplicitAtoms,
    composite_dephasing,
    shell_dephasing,
    simple_particle_dephasing,
)
from .report import paper_report

_POSITION = {"type": "array", "minItems": 3, "maxItems": 3,
             "items": {"type": "number"}}

_GEOMETRY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "oneOf": [{"required": ["clocks"]}, {"required": ["lattice"]}],
    "properties": {
        "clocks": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False,
                "required": ["quoted_frequency", "position"],
                "properties": {
                    "quoted_frequency": {"type": "number", "minimum": 0},
                    "position": _POSITION,
                    "rest_mass": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "lattice": {
            "type": "object", "additionalProperties": False,
            "required": ["dimension", "lattice_constant", "counts",
                         "quoted_frequency"],
            "properties": {
                "dimension": {"enum": [1, 2, 3]},
                "lattice_constant": {"type": "number", "exclusiveMinimum": 0},
                "counts": {"type": "array", "minItems": 1, "maxItems": 3,
                           "items": {"type": "integer", "minimum": 1}},
                "quoted_frequency": {"type": "number", "minimum": 0},
            },
        },
    },
}

_GAMMA_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "oneOf": [{"required": ["pairwise"]}, {"required": ["global"]}],
    "properties": {
        "pairwise": {"type": "array",
                     "items": {"type": "array", "items": {"type": "number"}}},
        "global": {"type": "array", "items": {"type": "number"}},
    },
}

_PARAMETER_SCHEMAS = {
    "rates": {
        "type": "object", "additionalProperties": False,
        "required": ["geometry", "mode", "case"],
        "properties": {
            "geometry": _GEOMETRY_SCHEMA,
            "mode": {"enum": ["pairwise", "global"]},
            "case": {"enum": ["A-free", "B-fixed", "given-rates"]},
            "gamma": _GAMMA_SCHEMA,
        },
    },
    "optimize": {
        "type": "object", "additionalProperties": False,
        "required": ["geometry", "mode"],
        "properties": {
            "geometry": _GEOMETRY_SCHEMA,
            "mode": {"enum": ["pairwise", "global", "fixed-scalar",
                              "fixed-scalar-global"]},
        },
    },
    "scaling-sweep": {
        "type": "object", "additionalProperties": False,
        "required": ["dimension", "mode", "case"],
        "properties": {
            "dimension": {"enum": [1, 2, 3]},
            "mode": {"enum": ["pairwise", "global"]},
            "case": {"enum": ["A-free", "B-fixed"]},
            "sides": {"type": "array", "minItems": 4,
                      "items": {"type": "integer", "minimum": 3}},
            "lattice_constant": {"type": "number", "exclusiveMinimum": 0},
            "quoted_frequency": {"type": "number", "minimum": 0},
        },
    },
    "simulate": {
        "type": "object", "additionalProperties": False,
        "required": ["kind", "initial_state", "times"],
        "properties": {
            "kind": {"enum": ["unitary", "ccg-pairwise", "ccg-global"]},
            "coupling_matrix": {"type": "array",
                                "items": {"type": "array",
                                          "items": {"type": "number"}}},
            "omegas": {"type": "array", "items": {"type": "number"}},
            "gamma": {"oneOf": [{"const": "optimal"}, _GAMMA_SCHEMA]},
            "initial_state": {
                "type": "array", "minItems": 1,
                "items": {"oneOf": [
                    {"type": "string"},
                    {"type": "array", "minItems": 2, "maxItems": 2,
                     "items": {"type": "array", "minItems": 2, "maxItems": 2,
                               "items": {"type": "number"}}},
                ]},
            },
            "times": {
                "type": "object", "additionalProperties": False,
                "required": ["stop", "num"],
                "properties": {
                    "start": {"type": "number", "minimum": 0},
                    "stop": {"type": "number", "exclusiveMinimum": 0},
                    "num": {"type": "integer", "minimum": 2},
                },
            },
            "fit_decay": {"type": "boolean"},
            "fit_clock": {"type": "integer", "minimum": 0},
            "export_density_matrix": {"type": "boolean"},
        },
    },
    "redshift": {
        "type": "object", "additionalProperties": False,
        "required": ["body", "quoted_frequency", "gamma_clock"],
        "properties": {
            "body": {
                "oneOf": [
                    {"type": "object", "additionalProperties": False,
                     "required": ["kind", "inner_radius", "outer_radius"],
                     "properties": {
                         "kind": {"const": "shell"},
                         "inner_radius": {"type": "number", "exclusiveMinimum": 0},
                         "outer_radius": {"type": "number", "exclusiveMinimum": 0},
                     }},
                    {"type": "object", "additionalProperties": False,
                     "required": ["kind", "mass", "distance", "gamma_position"],
                     "properties": {
                         "kind": {"const": "simple"},
                         "mass": {"type": "number", "exclusiveMinimum": 0},
                         "distance": {"type": "number", "exclusiveMinimum": 0},
                         "gamma_position": {"type": "number", "exclusiveMinimum": 0},
                     }},
                    {"type": "object", "additionalProperties": False,
                     "required": ["kind", "atom_mass", "lattice_constant",
                                  "positions", "clock_position"],
                     "properties": {
                         "kind": {"const": "crystal"},
                         "atom_mass": {"type": "number", "exclusiveMinimum": 0},
                         "lattice_constant": {"type": "number",
                                              "exclusiveMinimum": 0},
                         "positions": {"type": "array", "minItems": 1,
                                       "items": _POSITION},
                         "clock_position": _POSITION,
                     }},
                ],
            },
            "quoted_frequency": {"type": "number", "minimum": 0},
            "gamma_clock": {"type": "number", "minimum": 0},
        },
    },
    "paper-report": {
        "type": "object", "additionalProperties": False, "properties": {},
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": sorted(_PARAMETER_SCHEMAS)},
        "convention": {"enum": ["direct", "times-two-pi", "2pi", "both"]},
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "stem": {"type": "string", "minLength": 1},
                "format": {"enum": ["csv", "json", "both"]},
            },
        },
        "parameters": {"type": "object"},
    },
}


def validate_scenario(config: dict) -> None:
    """Validate a scenario config; raises jsonschema.ValidationError."""
    jsonschema.validate(config, SCENARIO_SCHEMA)
    kind = config["kind"]
    params = config.get("parameters", {})
    validator = jsonschema.Draft202012Validator(_PARAMETER_SCHEMAS[kind])
    for error in sorted(validator.iter_errors(params), key=str):
        error.path.appendleft("parameters")
        raise error
    if kind == "rates":
        case = params["case"]
        if case == "given-rates" and "gamma" not in params:
            raise jsonschema.ValidationError(
                "case 'given-rates' requires a gamma block",
                path=["parameters", "gamma"])
        if case != "given-rates" and "gamma" in params:
            raise jsonschema.ValidationError(
                f"case {case!r} takes no gamma block",
                path=["parameters", "gamma"])
    if kind == "scaling-sweep" and "sides" in params:
        for k, side in enumerate(params["sides"]):
            if side % 2 == 0:
                raise jsonschema.ValidationError(
                    f"sweep sides must be odd, got {side}",
                    path=["parameters", "sides", k])


# -- builders ------------------------------------------------------------------

def _build_geometry(block: dict, convention: FrequencyConvention) -> ClockArray:
    if "lattice" in block:
        lat = block["lattice"]
        return build_lattice(lat["dimension"], lat["lattice_constant"],
                             lat["counts"],
                             apply_convention(lat["quoted_frequency"], convention),
                             convention=convention)
    clocks = [
        ClockSpec(apply_convention(c["quoted_frequency"], convention),
                  tuple(c["position"]), c.get("rest_mass"))
        for c in block["clocks"]
    ]
    return ClockArray.from_clocks(clocks, convention=convention)


def _build_gamma(block: dict) -> MeasurementRates:
    if "pairwise" in block:
        return MeasurementRates("pairwise",
                                pairwise_gamma=np.array(block["pairwise"], float))
    return MeasurementRates("global",
                            global_gamma=np.array(block["global"], float))


def _csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _meta(convention: FrequencyConvention | None) -> dict:
    meta = {"package": "ccgclocks", "version": __version__}
    if convention is not None:
        meta["convention"] = convention.value
    return meta


def _state_from_config(entries):
    states = []
    for entry in entries:
        if isinstance(entry, str):
            states.append(entry)
        else:
            states.append(np.array([complex(re, im) for re, im in entry]))
    return states


def emit_plot_data(entries) -> bytes:
    """Tidy long-format CSV for scaling plots; header-only when empty."""
    rows = [["N", "D", "mode", "case", "rate", "fit_model", "fit_param"]]
    for e in entries:
        rows.append([e["N"], e["D"], e["mode"], e["case"], repr(e["rate"]),
                     e["fit_model"], repr(e["fit_param"])])
    return _csv_bytes(rows)


# -- per-kind runners (return {filename: bytes}) --------------------------------

_CLOSED_FORMS = {
    ("pairwise", "A-free"): min_dephasing_pairwise_A,
    ("global", "A-free"): min_dephasing_global_A,
    ("pairwise", "B-fixed"): min_dephasing_pairwise_B,
    ("global", "B-fixed"): min_dephasing_global_B,
}


def _run_rates(params, convention, stem, fmt):
    array = _build_geometry(params["geometry"], convention)
    g = pair_rate_matrix(array)
    if params["case"] == "given-rates":
        report = dephasing_given_rates(g, _build_gamma(params["gamma"]))
        if report.mode != params["mode"]:
            raise ValueError("gamma block does not match the requested mode")
    else:
        report = _CLOSED_FORMS[(params["mode"], params["case"])](g)
    out = {}
    if fmt in ("csv", "both"):
        out[f"{stem}.csv"] = _csv_bytes(report.csv_rows())
    if fmt in ("json", "both"):
        out[f"{stem}.json"] = _json_bytes(
            {"meta": _meta(convention), "report": report.to_json_dict()})
    return out


def _run_optimize(params, convention, stem, fmt):
    array = _build_geometry(params["geometry"], convention)
    g = pair_rate_matrix(array)
    rates, report = optimize_rates(g, params["mode"])
    out = {}
    if fmt in ("csv", "both"):
        out[f"{stem}.csv"] = _csv_bytes(report.csv_rows())
    if fmt in ("json", "both"):
        out[f"{stem}.json"] = _json_bytes({
            "meta": _meta(convention),
            "optimal_rates": rates.to_json_dict(),
            "achieved": report.to_json_dict(),
            "objective": report.objective(),
        })
    return out


def _run_scaling(params, convention, stem, fmt):
    omega = float(apply_convention(params.get("quoted_frequency", 1e15),
                                   convention))
    dim = params["dimension"]
    mode, case = params["mode"], params["case"]
    points = scaling_rate_sweep(dim, mode, case, omega,
                                L_c=params.get("lattice_constant", 1.0),
                                sides=params.get("sides"))
    fit = fit_scaling([(p.N, p.rate) for p in points])
    rows = [["N", "exact_sum", "continuum_estimate", "ratio",
             "fitted_model", "parameter", "mode", "case", "convention"]]
    for p in points:
        rows.append([p.N, repr(p.exact_sum), repr(p.continuum_estimate),
                     repr(p.ratio), fit.model, repr(fit.parameter),
                     mode, case, convention.value])
    plot = emit_plot_data([
        {"N": p.N, "D": dim, "mode": mode, "case": case, "rate": p.rate,
         "fit_model": fit.model, "fit_param": fit.parameter}
        for p in points
    ])
    out = {}
    if fmt in ("csv", "both"):
        out[f"{stem}.csv"] = _csv_bytes(rows)
        out[f"{stem}_plot.csv"] = plot
    if fmt in ("json", "both"):
        out[f"{stem}.json"] = _json_bytes({
            "meta": _meta(convention),
            "dimension": dim, "mode": mode, "case": case,
            "fit": {"model": fit.model, "parameter": fit.parameter,
                    "residual": fit.residual,
                    "ranking": [[m, r] for m, r in fit.ranking]},
            "points": [{"N": p.N, "exact_sum": p.exact_sum,
                        "continuum_estimate": p.continuum_estimate,
                        "ratio": p.ratio, "rate": p.rate} for p in points],
        })
    return out


def _run_simulate(params, convention, stem, fmt):
    coupling = params.get("coupling_matrix", [[0.0, 1.0], [1.0, 0.0]])
    gamma = params.get("gamma", "optimal")
    rates = gamma if gamma == "optimal" else _build_gamma(gamma)
    model = dimensionless_model(coupling, kind=params["kind"],
                                omegas=params.get("omegas"),
                                rates=None if params["kind"] == "unitary" else rates)
    states = _state_from_config(params["initial_state"])
    if len(states) != model.n_clocks:
        raise ValueError(
            f"initial_state has {len(states)} entries for {model.n_clocks} clocks")
    rho0 = DensityMatrix.from_qubit_states(states)
    t = params["times"]
    times = np.linspace(t.get("start", 0.0), t["stop"], t["num"])
    trace = simulate_coherence(model, rho0, times)
    summary = {
        "meta": _meta(convention),
        "kind": params["kind"],
        "n_clocks": model.n_clocks,
        "per_clock_dephasing": [float(x) for x in model.per_clock_dephasing],
        "time_unit_s": model.time_unit,
    }
    if params.get("fit_decay", True):
        clock = params.get("fit_clock", 0)
        try:
            summary["fitted_decay_rate"] = float(
                coherence_decay_rate(trace, clock=clock))
            summary["fit_error"] = None
        except ValueError as exc:
            summary["fitted_decay_rate"] = None
            summary["fit_error"] = str(exc)
    out = {}
    if fmt in ("csv", "both"):
        out[f"{stem}.csv"] = _csv_bytes(trace.csv_rows())
    if fmt in ("json", "both"):
        out[f"{stem}.json"] = _json_bytes(summary)
    if params.get("export_density_matrix", False):
        final = simulate_final_state(model, rho0, float(times[-1]))
        out[f"{stem}_rho.json"] = _json_bytes(
            {"meta": _meta(convention), "time": float(times[-1]),
             "rho": final.to_json_dict()})
    return out


def simulate_final_state(model, rho0: DensityMatrix, t: float) -> DensityMatrix:
    from .lindblad import evolve_exact
    return evolve_exact(rho0, model, t)


def _run_redshift(params, convention, stem, fmt):
    omega = apply_convention(params["quoted_frequency"], convention)
    body = params["body"]
    gz = params["gamma_clock"]
    if body["kind"] == "shell":
        result = shell_dephasing(body["inner_radius"], body["outer_radius"],
                                 omega, gz, convention=convention)
    elif body["kind"] == "simple":
        result = simple_particle_dephasing(body["mass"], body["distance"],
                                           omega, body["gamma_position"], gz,
                                           convention=convention)
    else:
        comp = CompositeBody(body["atom_mass"], body["lattice_constant"],
                             ExplicitAtoms(np.array(body["positions"], float)))
        result = composite_dephasing(comp, body["clock_position"], omega, gz,
                                     convention=convention)
    payload = {"meta": _meta(convention), "dephasing": result.to_json_dict()}
    if result.position_diffusion is not None and np.any(
            ~np.isfinite(result.position_diffusion)):
        payload["dephasing"]["position_diffusion_hz_per_m2"] = [
            "inf" if not np.isfinite(x) else float(x)
            for x in result.position_diffusion]
    return {f"{stem}.json": _json_bytes(payload)}


def _run_paper_report(params, convention, stem, fmt):
    report = paper_report()
    out = {}
    if fmt in ("csv", "both"):
        out[f"{stem}.csv"] = _csv_bytes(report.csv_rows())
    if fmt in ("json", "both"):
        out[f"{stem}.json"] = _json_bytes(
            {"meta": _meta(None), "report": report.to_json_dict()})
    return out


_RUNNERS = {
    "rates": (_run_rates, "rates", "both"),
    "optimize": (_run_optimize, "optimize", "json"),
    "scaling-sweep": (_run_scaling, "scaling", "both"),
    "simulate": (_run_simulate, "simulate", "both"),
    "redshift": (_run_redshift, "redshift", "json"),
    "paper-report": (_run_paper_report, "paper_report", "both"),
}

_CONVENTION_SUFFIX = {
    FrequencyConvention.DIRECT: "direct",
    FrequencyConvention.TIMES_TWO_PI: "2pi",
}


def run_scenario(config: dict | str | Path, out_dir: str | Path,
                 convention_override: str | None = None) -> list[Path]:
    """Validate a scenario, run it, and write its artifacts into out_dir.

    Returns the written paths. Identical configs produce byte-identical files.
    """
    if not isinstance(config, dict):
        config = json.loads(Path(config).read_text(encoding="utf-8"))
    validate_scenario(config)
    kind = config["kind"]
    runner, default_stem, default_fmt = _RUNNERS[kind]
    out_block = config.get("output", {})
    stem = out_block.get("stem", default_stem)
    fmt = out_block.get("format", default_fmt)
    requested = convention_override or config.get("convention", "direct")
    if requested == "both":
        conventions = [FrequencyConvention.DIRECT,
                       FrequencyConvention.TIMES_TWO_PI]
    else:
        conventions = [FrequencyConvention.parse(requested)]

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = config.get("parameters", {})
    written = []
    for conv in conventions:
        conv_stem = stem if len(conventions) == 1 \
            else f"{stem}_{_CONVENTION_SUFFIX[conv]}"
        artifacts = runner(params, conv, conv_stem, fmt)
        for name in sorted(artifacts):
            path = out_dir / name
            path.write_bytes(artifacts[name])
            written.append(path)
    return written
