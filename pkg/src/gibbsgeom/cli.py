"""JSON-config command line front end.

Subcommands:
    gibbs-geom run --config FILE [--out-dir DIR] [--seed-override N] [--threads N] [--verbose]
    gibbs-geom validate --config FILE
    gibbs-geom render --in diagram.json --out scene.svg

Exit codes: 0 success, 1 runtime failure, 2 config schema violation.  All
outputs are written atomically and listed in a manifest with content hashes;
no numerical logic lives here.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .config import (
    Ball,
    Box,
    Configuration,
    configuration_from_obj,
    configuration_to_obj,
)
from .facets import (
    CounterexampleSpec,
    FacetEnergyModel,
    cap_intensities,
    cross_cap_pair_counts,
    facet_energy,
    guaranteed_crossing_scale,
    partition_lower_bound_log_term,
    sample_paired_caps,
    truncation_radius,
)
from .laguerre import build_diagram, check_general_position, is_normal
from .laguerre_energy import is_admissible
from .mcmc import (
    ChainParams,
    CutoffSpec,
    FacetInteraction,
    GibbsSpec,
    LaguerreVertexInteraction,
    MoveMix,
    checkpoint_to_obj,
    dlr_consistency_test,
    run_chain,
)
from .poisson import (
    AtomLaw,
    DirectionAtoms,
    FacetMarkLaw,
    HemisphereUniform,
    PoissonSpec,
    UniformLaw,
    WeightMarkLaw,
    sample_poisson,
)
from .svg import render_diagram_svg
from .tempered import (
    check_clearance_property,
    clearance_radius,
    temperedness_level,
)

# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_VEC = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}

_WINDOW = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "box"}, "lower": _VEC, "upper": _VEC},
            "required": ["kind", "lower", "upper"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "ball"},
                "center": _VEC,
                "radius": _NUM,
                "closed": {"type": "boolean"},
            },
            "required": ["kind", "center", "radius"],
            "additionalProperties": False,
        },
    ]
}

_SCALAR_LAW = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "uniform"}, "lo": _NUM, "hi": _NUM},
            "required": ["kind", "lo", "hi"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "atoms"},
                "atoms": {"type": "array", "items": {"type": "array", "items": _NUM}},
            },
            "required": ["kind", "atoms"],
            "additionalProperties": False,
        },
    ]
}

_MARK_LAW = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"kind": {"const": "weight"}, "law": _SCALAR_LAW},
            "required": ["kind", "law"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "kind": {"const": "facet"},
                "direction": {
                    "oneOf": [
                        {
                            "type": "object",
                            "properties": {"kind": {"const": "hemisphere"}},
                            "required": ["kind"],
                            "additionalProperties": False,
                        },
                        {
                            "type": "object",
                            "properties": {
                                "kind": {"const": "atoms"},
                                "atoms": {"type": "array"},
                            },
                            "required": ["kind", "atoms"],
                            "additionalProperties": False,
                        },
                    ]
                },
                "radius": _SCALAR_LAW,
            },
            "required": ["kind", "direction", "radius"],
            "additionalProperties": False,
        },
    ]
}

_MODEL = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "kind": {"const": "facet"},
                "dim": {"enum": [2, 3]},
                "coefficients": {"type": "array", "items": _NUM},
                "tolerance": _NUM,
            },
            "required": ["kind", "dim", "coefficients"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"kind": {"const": "laguerre-vertex"}},
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

_CHAIN = {
    "type": "object",
    "properties": {
        "steps": _INT,
        "burnin": _INT,
        "thinning": _INT,
        "move_mix": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
    },
    "required": ["steps", "burnin", "thinning"],
    "additionalProperties": False,
}

_CONFIG_ARRAY = {"type": "array"}

_PARAMS_BY_KIND = {
    "poisson": {
        "type": "object",
        "properties": {
            "window": _WINDOW,
            "activity": _NUM,
            "mark_law": _MARK_LAW,
            "seeds": {"type": "array", "items": _INT, "minItems": 1},
        },
        "required": ["window", "activity", "mark_law", "seeds"],
        "additionalProperties": False,
    },
    "facet-energy": {
        "type": "object",
        "properties": {"configuration": _CONFIG_ARRAY, "model": _MODEL},
        "required": ["configuration", "model"],
        "additionalProperties": False,
    },
    "facet-counterexample": {
        "type": "object",
        "properties": {
            "k_min": _INT,
            "k_max": _INT,
            "z": _NUM,
            "eps": _NUM,
            "a": _NUM,
            "b": _NUM,
            "u_angle": _NUM,
            "v_angle": _NUM,
            "n1_angle": _NUM,
            "n2_angle": _NUM,
        },
        "required": ["k_min", "k_max", "z"],
        "additionalProperties": False,
    },
    "laguerre-build": {
        "type": "object",
        "properties": {"generators": _CONFIG_ARRAY, "bbox": _WINDOW},
        "required": ["generators"],
        "additionalProperties": False,
    },
    "gibbs-chain": {
        "type": "object",
        "properties": {
            "window": _WINDOW,
            "activity": _NUM,
            "model": _MODEL,
            "mark_law": _MARK_LAW,
            "chain": _CHAIN,
            "boundary": _CONFIG_ARRAY,
            "cutoff": {
                "type": "object",
                "properties": {"n": _INT, "mark_bound": _NUM},
                "required": ["n", "mark_bound"],
                "additionalProperties": False,
            },
        },
        "required": ["window", "activity", "model", "mark_law", "chain"],
        "additionalProperties": False,
    },
    "dlr-test": {
        "type": "object",
        "properties": {
            "big_window": _WINDOW,
            "small_window": _WINDOW,
            "activity": _NUM,
            "model": _MODEL,
            "mark_law": _MARK_LAW,
            "n_samples": _INT,
            "outer_burnin": _INT,
            "outer_thinning": _INT,
            "inner_steps": _INT,
        },
        "required": ["big_window", "small_window", "activity", "model", "mark_law"],
        "additionalProperties": False,
    },
    "admissibility": {
        "type": "object",
        "properties": {
            "configuration": _CONFIG_ARRAY,
            "observation_window": _WINDOW,
            "delta": _NUM,
            "l_max": _INT,
            "k_max": _INT,
        },
        "required": ["configuration", "observation_window"],
        "additionalProperties": False,
    },
    "property-suite": {
        "type": "object",
        "properties": {"trials": _INT, "pairs": _INT},
        "required": ["trials"],
        "additionalProperties": False,
    },
}

TOP_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": sorted(_PARAMS_BY_KIND)},
        "seed": _INT,
        "params": {"type": "object"},
    },
    "required": ["kind", "seed", "params"],
    "additionalProperties": False,
}


def validate_config(cfg: dict) -> list[str]:
    """Schema errors (empty when valid); unknown fields are rejected."""
    import jsonschema

    errors = []
    v = jsonschema.Draft202012Validator(TOP_SCHEMA)
    errors += [e.message for e in v.iter_errors(cfg)]
    if not errors:
        pv = jsonschema.Draft202012Validator(_PARAMS_BY_KIND[cfg["kind"]])
        errors += [e.message for e in pv.iter_errors(cfg["params"])]
    return errors


# ---------------------------------------------------------------------------
# Decoding helpers
# ---------------------------------------------------------------------------


def _window_from(obj: dict):
    if obj["kind"] == "box":
        return Box(tuple(obj["lower"]), tuple(obj["upper"]))
    return Ball(tuple(obj["center"]), obj["radius"], closed=obj.get("closed", False))


def _scalar_law_from(obj: dict):
    if obj["kind"] == "uniform":
        return UniformLaw(obj["lo"], obj["hi"])
    return AtomLaw(tuple((v, p) for v, p in obj["atoms"]))


def _mark_law_from(obj: dict):
    if obj["kind"] == "weight":
        return WeightMarkLaw(_scalar_law_from(obj["law"]))
    dr = obj["direction"]
    direction = (
        HemisphereUniform()
        if dr["kind"] == "hemisphere"
        else DirectionAtoms(tuple((tuple(d), p) for d, p in dr["atoms"]))
    )
    return FacetMarkLaw(direction, _scalar_law_from(obj["radius"]))


def _model_from(obj: dict):
    if obj["kind"] == "facet":
        return FacetInteraction(
            FacetEnergyModel(
                obj["dim"], tuple(obj["coefficients"]), obj.get("tolerance", 1e-9)
            )
        )
    return LaguerreVertexInteraction()


def _chain_from(obj: dict, seed: int) -> ChainParams:
    mix = MoveMix(*obj["move_mix"]) if "move_mix" in obj else MoveMix()
    return ChainParams(
        steps=obj["steps"], burnin=obj["burnin"], thinning=obj["thinning"], seed=seed, move_mix=mix
    )


# ---------------------------------------------------------------------------
# Atomic output handling
# ---------------------------------------------------------------------------


def _atomic_write(path: str, data: bytes) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=".tmp_")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return hashlib.sha256(data).hexdigest()


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue().encode()


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _run_poisson(params: dict, seed: int) -> dict[str, bytes]:
    window = _window_from(params["window"])
    law = _mark_law_from(params["mark_law"])
    out = {}
    for s in params["seeds"]:
        gamma = sample_poisson(PoissonSpec(window, params["activity"], law, s))
        out[f"configuration_{s}.json"] = _json_bytes(configuration_to_obj(gamma))
    return out


def _run_facet_energy(params: dict, seed: int) -> dict[str, bytes]:
    model_obj = params["model"]
    model = FacetEnergyModel(
        model_obj["dim"], tuple(model_obj["coefficients"]), model_obj.get("tolerance", 1e-9)
    )
    gamma = configuration_from_obj(params["configuration"], dim=model.dim)
    energy = facet_energy(gamma, model)
    return {"energy.json": _json_bytes({"energy": energy, "n_points": len(gamma)})}


def _run_counterexample(params: dict, seed: int) -> dict[str, bytes]:
    base = CounterexampleSpec(
        n1=_angle_vec(params.get("n1_angle", math.pi / 3.0)),
        n2=_angle_vec(params.get("n2_angle", -math.pi / 3.0)),
        u=_angle_vec(params.get("u_angle", math.pi / 4.0)),
        v=_angle_vec(params.get("v_angle", -math.pi / 4.0)),
        eps=params.get("eps", math.pi / 12.0),
        a=params.get("a", 1.0),
        b=params.get("b", 2.0),
        z=params["z"],
    )
    s = guaranteed_crossing_scale(base, validate_samples=10_000, seed=seed)
    law = FacetMarkLaw(HemisphereUniform(), UniformLaw(base.a, base.b))
    gu, gv, dr = cap_intensities(base, s, law)
    rows = []
    for k in range(params["k_min"], params["k_max"] + 1):
        gamma = sample_paired_caps(k, base, s, seed + k)
        cross, within = cross_cap_pair_counts(gamma, base)
        energy = facet_energy(gamma, FacetEnergyModel(2, (-1.0,)))
        rows.append([k, partition_lower_bound_log_term(k, gu, gv, dr), cross, energy])
    return {
        "counterexample.csv": _csv_bytes(
            ["k", "log_lower_bound", "cross_pair_count", "energy"], rows
        ),
        "scale.json": _json_bytes(
            {"box_halfwidth": s, "gamma_u": gu, "gamma_v": gv, "delta_rest": dr}
        ),
    }


def _angle_vec(theta: float) -> tuple[float, float]:
    return (math.cos(theta), math.sin(theta))


def _diagram_to_obj(dia) -> dict:
    return {
        "generators": [
            [float(x), float(y), float(w)]
            for (x, y), w in zip(dia.nuclei.tolist(), dia.weights.tolist())
        ],
        "bbox": {
            "kind": "box",
            "lower": list(dia.bbox.lower),
            "upper": list(dia.bbox.upper),
        },
        "cells": [
            {
                "vertices": "EMPTY" if c.empty else [[float(x), float(y)] for x, y in c.vertices],
                "clipped": c.clipped,
                "neighbors": list(c.neighbors),
            }
            for c in dia.cells
        ],
        "vertices": [
            {"point": [float(v.point[0]), float(v.point[1])], "cells": list(v.cells)}
            for v in dia.vertices
        ],
        "edges": [
            {
                "cells": list(e.cells),
                "endpoints": [[float(a) for a in e.endpoints[0]], [float(a) for a in e.endpoints[1]]],
            }
            for e in dia.edges
        ],
    }


def _run_laguerre_build(params: dict, seed: int) -> dict[str, bytes]:
    gamma = configuration_from_obj(params["generators"], dim=2)
    bbox = _window_from(params["bbox"]) if "bbox" in params else None
    dia = build_diagram(gamma, bbox)
    gp = check_general_position(gamma)
    norm = is_normal(dia)
    summary = {
        "n_generators": len(gamma),
        "empty_cells": dia.empty_cells,
        "in_general_position": gp.in_general_position,
        "normal": norm.normal,
        "vertex_degree_histogram": {str(k): v for k, v in norm.vertex_degree_histogram.items()},
    }
    return {
        "diagram.json": _json_bytes(_diagram_to_obj(dia)),
        "diagram.svg": render_diagram_svg(dia).encode(),
        "summary.json": _json_bytes(summary),
    }


def _run_gibbs_chain(params: dict, seed: int) -> dict[str, bytes]:
    window = _window_from(params["window"])
    model = _model_from(params["model"])
    law = _mark_law_from(params["mark_law"])
    boundary = (
        configuration_from_obj(params["boundary"], dim=window.dim)
        if "boundary" in params
        else None
    )
    cutoff = (
        CutoffSpec(params["cutoff"]["n"], params["cutoff"]["mark_bound"])
        if "cutoff" in params
        else None
    )
    spec = GibbsSpec(
        window,
        params["activity"],
        model,
        law,
        _chain_from(params["chain"], seed),
        boundary=boundary,
        cutoff=cutoff,
    )
    out = run_chain(spec)
    rows = [
        [i + 1, m, int(a), int(n), e]
        for i, (m, a, n, e) in enumerate(
            zip(out.move_trace, out.accepted_trace, out.count_trace, out.energy_trace)
        )
    ]
    return {
        "trace.csv": _csv_bytes(["step", "moveType", "accepted", "nPoints", "energy"], rows),
        "samples.json": _json_bytes([configuration_to_obj(s) for s in out.samples]),
        "checkpoint.json": _json_bytes(checkpoint_to_obj(out.final_state, out.rng_state)),
        "chain_summary.json": _json_bytes(
            {
                "acceptance": {k: list(v) for k, v in out.acceptance.items()},
                "geweke_z": out.geweke_z,
                "n_samples": len(out.samples),
            }
        ),
    }


def _run_dlr(params: dict, seed: int) -> dict[str, bytes]:
    res = dlr_consistency_test(
        _window_from(params["big_window"]),
        _window_from(params["small_window"]),
        params["activity"],
        _model_from(params["model"]),
        _mark_law_from(params["mark_law"]),
        seed,
        n_samples=params.get("n_samples", 200),
        outer_burnin=params.get("outer_burnin", 2000),
        outer_thinning=params.get("outer_thinning", 40),
        inner_steps=params.get("inner_steps", 400),
    )
    return {
        "dlr.json": _json_bytes(
            {
                "statistic": res.statistic,
                "p_value": res.p_value,
                "p_per_coordinate": list(res.p_per_coordinate),
                "n_samples": res.n_samples,
                "effective_sample_size": res.effective_sample_size,
                "sufficient": res.sufficient,
            }
        )
    }


def _run_admissibility(params: dict, seed: int) -> dict[str, bytes]:
    gamma = configuration_from_obj(params["configuration"], dim=2)
    rep = is_admissible(
        gamma,
        _window_from(params["observation_window"]),
        delta=params.get("delta", 0.5),
        l_max=params.get("l_max"),
        k_max=params.get("k_max"),
    )
    return {"admissibility.json": (rep.to_json() + "\n").encode()}


def _run_property_suite(params: dict, seed: int) -> dict[str, bytes]:
    from .laguerre import check_far_generator_power_bound
    from .poisson import substream

    trials = params["trials"]
    pairs = params.get("pairs", 100)
    rng = substream(seed, 0)
    clearance_ok = 0
    for _ in range(trials):
        n = int(rng.integers(0, 6))
        pts = []
        seen = set()
        for _ in range(n):
            loc = tuple(rng.uniform(-30, 30, size=2))
            if loc in seen:
                continue
            seen.add(loc)
            from .config import MarkedPoint, WeightMark

            pts.append(MarkedPoint(loc, WeightMark(float(rng.uniform(0.1, 3.0)))))
        gamma = Configuration(pts, dim=2)
        t = temperedness_level(gamma, 2, 0.5, l_max=64)
        lo = int(math.ceil(clearance_radius(t, 0.5)))
        if check_clearance_property(gamma, t, 0.5, range(lo, lo + 10)):
            clearance_ok += 1
    power_ok = check_far_generator_power_bound(1, trials, seed=seed) and (
        check_far_generator_power_bound(16, trials, seed=seed + 1)
    )
    mono_ok = 0
    for _ in range(pairs):
        a = float(rng.uniform(0, 5))
        b = a + float(rng.uniform(0.01, 5))
        w = Box((-1.0, -1.0), (1.0, 1.0))
        if truncation_radius(a, 16, w) <= truncation_radius(b, 16, w):
            mono_ok += 1
    return {
        "properties.json": _json_bytes(
            {
                "clearance_trials": trials,
                "clearance_ok": clearance_ok,
                "power_bound_ok": power_ok,
                "truncation_monotone_pairs": pairs,
                "truncation_monotone_ok": mono_ok,
            }
        )
    }


_RUNNERS = {
    "poisson": _run_poisson,
    "facet-energy": _run_facet_energy,
    "facet-counterexample": _run_counterexample,
    "laguerre-build": _run_laguerre_build,
    "gibbs-chain": _run_gibbs_chain,
    "dlr-test": _run_dlr,
    "admissibility": _run_admissibility,
    "property-suite": _run_property_suite,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _cmd_run(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    errors = validate_config(cfg)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    seed = args.seed_override if args.seed_override is not None else cfg["seed"]
    out_dir = args.out_dir or "."
    try:
        artifacts = _RUNNERS[cfg["kind"]](cfg["params"], seed)
    except Exception as exc:  # runtime failure -> exit 1
        print(f"runtime failure: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1
    hashes = {}
    for name, data in sorted(artifacts.items()):
        hashes[name] = _atomic_write(os.path.join(out_dir, name), data)
    manifest = {
        "config_hash": _config_hash(cfg),
        "kind": cfg["kind"],
        "seed": seed,
        "versions": {
            "gibbsgeom": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "outputs": hashes,
    }
    data = _json_bytes(manifest)
    _atomic_write(os.path.join(out_dir, "manifest.json"), data)
    sys.stdout.write(data.decode())
    return 0


def _cmd_validate(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    errors = validate_config(cfg)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def _cmd_render(args) -> int:
    with open(args.infile) as fh:
        obj = json.load(fh)
    try:
        gens = obj["generators"]
        bbox = Box(tuple(obj["bbox"]["lower"]), tuple(obj["bbox"]["upper"]))
        nuclei = np.array([[g[0], g[1]] for g in gens], dtype=float).reshape(len(gens), 2)
        weights = np.array([g[2] for g in gens], dtype=float)
        dia = build_diagram((nuclei, weights), bbox)
        svg = render_diagram_svg(dia)
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    _atomic_write(args.outfile, svg.encode())
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="gibbs-geom", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out-dir", default=None)
    run_p.add_argument("--seed-override", type=int, default=None)
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--verbose", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="schema-check an experiment config")
    val_p.add_argument("--config", required=True)
    val_p.set_defaults(func=_cmd_validate)

    ren_p = sub.add_parser("render", help="render a diagram JSON to SVG")
    ren_p.add_argument("--in", dest="infile", required=True)
    ren_p.add_argument("--out", dest="outfile", required=True)
    ren_p.set_defaults(func=_cmd_render)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
