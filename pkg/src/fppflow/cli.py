"""Command line front end: config parsing, manifests and result files.

Exit codes
----------
0  success
2  configuration error
3  instance refused by an exhaustive oracle (size cap)
4  counterexample: good blocks without an open crossing path
5  oracle disagreement (flow value differs from an exhaustive oracle)
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema

from . import __version__
from .bounds import (BoundParams, chebyshev_exponent, choose_lambda_p0, epsilon0_renorm,
                     growth_table, log_zero_flow_bound)
from .capacity import P_C_DEFAULT, Bernoulli, SeedSpec, parse_distribution, sample_capacities, truncate
from .estimate import ExperimentSpec, HeightFunction, rate_sweep
from .flow import (OracleSizeError, brute_force_min_cut, brute_force_packing,
                   count_disjoint_open_paths, max_flow)
from .lattice import CylinderSpec, build_cylinder
from .renorm import (CounterexampleError, RescaledCylinder, block_box, block_process,
                     construct_crossing_path, estimate_delta_K, exact_event_probabilities,
                     find_good_block_path, threshold)

log = logging.getLogger("fppflow")

EXIT_OK, EXIT_CONFIG, EXIT_REFUSED, EXIT_COUNTEREXAMPLE, EXIT_MISMATCH = 0, 2, 3, 4, 5
KINDS = ("flow", "sweep", "blocks", "bounds", "oracle")

_TAIL = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["type", "rate"],
         "properties": {"type": {"const": "exponential"}, "rate": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "additionalProperties": False, "required": ["type", "a", "b"],
         "properties": {"type": {"const": "uniform"}, "a": {"type": "number", "minimum": 0},
                        "b": {"type": "number"}}},
    ]
}
DIST_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["type", "p"],
         "properties": {"type": {"const": "bernoulli"}, "p": {"type": "number", "minimum": 0, "maximum": 1}}},
        {"type": "object", "additionalProperties": False, "required": ["type", "value"],
         "properties": {"type": {"const": "constant"}, "value": {"type": "number", "minimum": 0}}},
        {"type": "object", "additionalProperties": False, "required": ["type"],
         "properties": {"type": {"const": "mixture"},
                        "atoms": {"type": "array", "items": {
                            "type": "array", "minItems": 2, "maxItems": 2,
                            "items": {"type": "number", "minimum": 0}}},
                        "tail": _TAIL,
                        "tail_weight": {"type": "number", "minimum": 0, "maximum": 1}}},
    ]
}
_D = {"type": "integer", "minimum": 2, "maximum": 3}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_REPS = {"type": "integer", "minimum": 1}
_POS = {"type": "integer", "minimum": 1}


def _obj(required, props):
    props = {"kind": {"type": "string"}, **props}
    return {"type": "object", "additionalProperties": False, "required": required, "properties": props}


SCHEMAS = {
    "flow": _obj(["d", "k", "m", "dist"], {
        "d": _D, "k": {"type": "array", "items": _POS}, "m": _POS, "dist": DIST_SCHEMA,
        "seed": _SEED, "replicate": {"type": "integer", "minimum": 0},
        "eta": {"type": "number", "minimum": 0}, "include_flows": {"type": "boolean"}}),
    "sweep": _obj(["d", "n", "dist", "epsilon", "replicates"], {
        "d": _D, "n": {"type": "array", "items": _POS, "minItems": 1},
        "height": {"type": "object", "additionalProperties": False, "required": ["kind"],
                   "properties": {"kind": {"enum": ["constant", "linear", "power", "exponential"]},
                                  "c": {"type": "number", "exclusiveMinimum": 0},
                                  "a": {"type": "number", "minimum": 0},
                                  "base": {"type": "number", "exclusiveMinimum": 1},
                                  "r": {"type": "number", "exclusiveMinimum": 0}}},
        "dist": DIST_SCHEMA, "epsilon": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "replicates": _REPS, "seed": _SEED, "floor": {"type": "number", "minimum": 0}}),
    "blocks": _obj(["d", "K", "p"], {
        "d": _D, "K": {"type": "array", "items": _POS, "minItems": 1},
        "p": {"type": "number", "minimum": 0, "maximum": 1}, "replicates": _REPS, "seed": _SEED,
        "exact": {"type": "boolean"},
        "sample": {"type": "object", "additionalProperties": False, "required": ["n", "h", "K"],
                   "properties": {"n": _POS, "h": _POS, "K": _POS}}}),
    "bounds": _obj(["d"], {
        "d": _D, "epsilon": {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}},
        "c": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}},
        "p": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "rho": {"type": "number", "minimum": 0}, "K": {"type": "array", "items": _POS},
        "eta": {"type": "number", "exclusiveMinimum": 0}, "animals": {"type": "boolean"},
        "zero_flow": {"type": "object", "additionalProperties": False, "required": ["n", "h", "p"],
                      "properties": {"n": _POS, "h": _POS, "p": {"type": "number", "minimum": 0, "maximum": 1}}}}),
    "oracle": _obj(["d", "k", "m", "dist"], {
        "d": _D, "k": {"type": "array", "items": _POS}, "m": _POS, "dist": DIST_SCHEMA,
        "seed": _SEED, "replicates": _REPS}),
}


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class RunManifest:
    kind: str
    params: dict
    seed: int
    outputs: list[str] = field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _semantic_checks(kind: str, cfg: dict) -> list[str]:
    errs = []
    d = cfg.get("d")
    if kind in ("flow", "oracle") and isinstance(d, int) and isinstance(cfg.get("k"), list):
        if len(cfg["k"]) != d - 1:
            errs.append(f"k: needs d-1 = {d - 1} side lengths, got {len(cfg['k'])}")
    for K in cfg.get("K", []) if isinstance(cfg.get("K"), list) else []:
        if isinstance(K, int) and K % 2:
            errs.append(f"K: block side must be even, got {K}")
    sample = cfg.get("sample")
    if isinstance(sample, dict) and isinstance(sample.get("K"), int) and sample["K"] % 2:
        errs.append(f"sample.K: block side must be even, got {sample['K']}")
    if isinstance(cfg.get("n"), list) and cfg["n"] != sorted(set(cfg["n"])):
        errs.append("n: side list must be strictly increasing")
    dist = cfg.get("dist")
    if isinstance(dist, dict) and not errs:
        try:
            parse_distribution(dist)
        except (ValueError, KeyError, TypeError) as exc:
            errs.append(f"dist: {exc}")
    return errs


def parse_config(text: str, kind: str | None = None) -> RunManifest:
    """Validate a JSON config; every violation is reported, not just the first."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"]) from None
    if not isinstance(cfg, dict):
        raise ConfigError(["config must be a JSON object"])
    kind = kind or cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError([f"kind: must be one of {KINDS}, got {kind!r}"])
    if cfg.get("kind", kind) != kind:
        raise ConfigError([f"kind: config says {cfg['kind']!r} but {kind!r} was requested"])
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    errs = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path)):
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        if err.validator == "minimum" and path == "d":
            errs.append("d: dimension must be >= 2")
        else:
            errs.append(f"{path}: {err.message}")
    errs += _semantic_checks(kind, cfg)
    if errs:
        raise ConfigError(errs)
    params = {k: v for k, v in cfg.items() if k != "kind"}
    seed = params.pop("seed", 0)
    return RunManifest(kind, params, seed, _OUTPUTS[kind])


_OUTPUTS = {
    "flow": ["flow.csv", "flow.json"],
    "sweep": ["sweep.csv", "sweep.json"],
    "blocks": ["blocks.csv", "blocks.json"],
    "bounds": ["bounds.csv", "bounds.json"],
    "oracle": ["oracle.csv", "oracle.json"],
}


# -- runners -------------------------------------------------------------------

def _csv(manifest: RunManifest, header: str, rows) -> str:
    lines = [f"# manifest_sha256={manifest.sha256}", header]
    lines += [",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v)) for v in row)
              for row in rows]
    return "\n".join(lines) + "\n"


def _run_flow(m: RunManifest, threads: int):
    p = m.params
    g = build_cylinder(CylinderSpec(p["d"], tuple(p["k"]), p["m"]))
    f = sample_capacities(g, parse_distribution(p["dist"]), SeedSpec(m.seed, p.get("replicate", 0)))
    if "eta" in p:
        f = truncate(f, p["eta"])
    res = max_flow(g, f)
    print(f"flow value {res.value} cut size {len(res.cut)}")
    rows = [(e, *g.edge_coords(e)[0], *g.edge_coords(e)[1], repr(float(f.values[e]))) for e in res.cut]
    d = g.d
    header = ",".join(["edge"] + [f"u{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)] + ["capacity"])
    summary = json.loads(res.to_json(p.get("include_flows", False)))
    return _csv(m, header, rows), summary, EXIT_OK


def _run_sweep(m: RunManifest, threads: int):
    p = m.params
    hcfg = dict(p.get("height", {"kind": "linear", "c": 1.0}))
    spec = ExperimentSpec(p["d"], tuple(p["n"]), parse_distribution(p["dist"]), tuple(p["epsilon"]),
                          p["replicates"], m.seed, HeightFunction(**hcfg))
    res = rate_sweep(spec, p.get("floor", 0.05), threads)
    log.info("sweep finished in %.1fs", res.report.wall_time)
    body = res.report.to_csv().splitlines()
    csv = f"# manifest_sha256={m.sha256}\n" + "\n".join(body) + "\n"
    summary = {"floor": res.floor, "above_floor": {repr(k): v for k, v in res.above_floor.items()},
               "min_rate": {repr(e): res.min_rate(e) for e in spec.epsilons}}
    return csv, summary, EXIT_OK


def _run_blocks(m: RunManifest, threads: int):
    p = m.params
    d, prob = p["d"], p["p"]
    rows, summary, code = [], {"delta": []}, EXIT_OK
    for K in p["K"]:
        row = {"K": K}
        if p.get("replicates"):
            est = estimate_delta_K(K, prob, p["replicates"], m.seed, d, threads)
            row.update(replicates=est.replicates, bad=est.bad, delta=est.estimate,
                       ci_lo=est.ci[0], ci_hi=est.ci[1])
        if p.get("exact"):
            box = block_box((0,) * d, K)
            ex = exact_event_probabilities(box, Fraction(str(prob)), threshold(K))
            row.update(P_U=str(ex["U"]), P_W=str(ex["W"]))
        rows.append(row)
    summary["delta"] = rows
    cols = ["K", "replicates", "bad", "delta", "ci_lo", "ci_hi", "P_U", "P_W"]
    csv = _csv(m, ",".join(cols), [[r.get(c) for c in cols] for r in rows])
    if "sample" in p:
        s = p["sample"]
        cyl = RescaledCylinder.build(d, s["n"], s["h"], s["K"])
        f = sample_capacities(cyl.field_graph(), Bernoulli(prob), SeedSpec(m.seed, 0))
        bp = block_process(f, s["K"], cyl.domain)
        csv += "# block process sample\n" + bp.to_csv()
        path = find_good_block_path(bp, cyl)
        summary["sample_crossing"] = None
        if path is not None:
            try:
                summary["sample_crossing"] = construct_crossing_path(f, path, s["K"], 0, s["h"])
            except CounterexampleError as exc:
                summary["counterexample"] = exc.instance
                code = EXIT_COUNTEREXAMPLE
    return csv, summary, code


def _run_bounds(m: RunManifest, threads: int):
    p = m.params
    d = p["d"]
    summary = {}
    if p.get("animals", True):
        table = growth_table(d, "diamond")
        summary["diamond_counts"] = [[a.size, a.count, a.growth] for a in table]
        summary["vertex_counts"] = [[a.size, a.count, a.growth] for a in growth_table(d, "vertex")]
        c_est = max(a.growth for a in table)
    else:
        c_est = None
    cs = p.get("c") or ([c_est] if c_est else [math.e])
    rows = []
    rho = p.get("rho", 0.0)
    for eps in p.get("epsilon", [0.0, 0.1, 0.2]):
        for c in cs:
            lam, p0 = choose_lambda_p0(eps, c)
            for prob in p.get("p", []) + [p0, 1.0]:
                e = chebyshev_exponent(BoundParams(prob, eps, d, lam, c, rho))
                rows.append((eps, c, lam, p0, prob, e, math.log(c) - rho))
    csv = _csv(m, "eps,c,lambda,p0,p,exponent,ln_c_minus_rho", rows)
    summary["epsilon0"] = {str(K): epsilon0_renorm(K, d, p.get("eta")) for K in p.get("K", [])}
    if "zero_flow" in p:
        z = p["zero_flow"]
        ln = log_zero_flow_bound(z["n"], z["h"], z["p"], d)
        summary["zero_flow"] = {"ln_bound": ln, "log10_bound": ln / math.log(10)}
    summary["p_c_defaults"] = P_C_DEFAULT
    return csv, summary, EXIT_OK


def _run_oracle(m: RunManifest, threads: int):
    p = m.params
    g = build_cylinder(CylinderSpec(p["d"], tuple(p["k"]), p["m"]))
    if g.n_edges > 25:
        raise OracleSizeError(f"{g.n_edges} edges exceeds the oracle limit of 25")
    dist = parse_distribution(p["dist"])
    rows, code = [], EXIT_OK
    for r in range(p.get("replicates", 1)):
        f = sample_capacities(g, dist, SeedSpec(m.seed, r))
        res = max_flow(g, f)
        brute = brute_force_min_cut(g, f)
        packed = brute_force_packing(g, f) if f.is_binary and g.n_edges <= 24 else None
        menger = count_disjoint_open_paths(g, f)[0] if f.is_binary else None
        ok = res.value == brute and (packed is None or packed == menger == res.value)
        if not f.exact:
            ok = abs(res.value - brute) <= 1e-6 * max(1.0, abs(brute)) and packed is None
        code = code if ok else EXIT_MISMATCH
        rows.append((r, str(res.value), str(brute), menger, packed, int(ok)))
    csv = _csv(m, "replicate,max_flow,brute_min_cut,disjoint_paths,brute_packing,agree", rows)
    return csv, {"all_agree": code == EXIT_OK}, code


_RUNNERS = {"flow": _run_flow, "sweep": _run_sweep, "blocks": _run_blocks,
            "bounds": _run_bounds, "oracle": _run_oracle}


def run(manifest: RunManifest, out_dir: str | Path, threads: int = 1) -> int:
    """Execute a manifest, write its result files and a copy of the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        csv, summary, code = _RUNNERS[manifest.kind](manifest, threads)
    except OracleSizeError as exc:
        log.error("refused: %s", exc)
        return EXIT_REFUSED
    csv_name, json_name = manifest.outputs
    (out / csv_name).write_text(csv)
    summary = {"manifest_sha256": manifest.sha256, **summary}
    (out / json_name).write_text(json.dumps(summary, indent=2, sort_keys=True, default=str) + "\n")
    (out / "manifest.json").write_text(manifest.to_json() + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fppflow",
        description="Maximal flows through cylinders in first-passage percolation.",
        epilog="exit codes: 0 ok, 2 config error, 3 oracle size refusal, "
               "4 counterexample found, 5 oracle disagreement",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment from a JSON config")
        sp.add_argument("config", help="JSON config file ('-' for stdin)")
        sp.add_argument("--out", default=f"results-{kind}", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--replicates", type=int, help="override the replicate count")
        sp.add_argument("--exact", action="store_true", help="exhaustive enumeration where available")
        sp.add_argument("--threads", type=int, default=1, help="worker processes (results do not depend on it)")
    sc = sub.add_parser("schema", help="print the JSON schema of a config kind")
    sc.add_argument("kind", choices=KINDS)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(SCHEMAS[args.kind], indent=2))
        return EXIT_OK
    text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text()
    try:
        cfg = json.loads(text)
        if isinstance(cfg, dict):
            if args.seed is not None:
                cfg["seed"] = args.seed
            if args.replicates is not None and args.command in ("sweep", "blocks", "oracle"):
                cfg["replicates"] = args.replicates
            if args.exact and args.command == "blocks":
                cfg["exact"] = True
            text = json.dumps(cfg)
        manifest = parse_config(text, args.command)
    except (ConfigError, json.JSONDecodeError) as exc:
        for v in getattr(exc, "violations", [str(exc)]):
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    return run(manifest, args.out, args.threads)
