"""Command line entry point.  Exit codes: 0 ok, 1 operational error, 2 theorem violation."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import __version__
from .arithmetic_oracles import plunnecke_suite, ruzsa_suite
from .errors import LabError, TheoremViolation
from .exact import fraction_str, to_fraction
from .expansion_analysis import theoretical_constants
from .families import KINDS, FamilySpec, generate_family
from .grid_set import dumps, read, write
from .quotient_gap import DENSE_BUDGET, MAX_PAIRS, build_quotient_set, classify, dyadic_density_check
from .sweep import SweepConfig, analyze_set, load_config, run_sweep

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_constants(args) -> int:
    c = theoretical_constants(args.sigma, args.gamma)
    if args.json:
        _emit(c.to_json())
        return EXIT_OK
    rows = [
        ("sigma", c.sigma), ("gamma", c.gamma), ("c_max", c.c_max), ("gamma_star", c.gamma_star),
        ("dense exponent (2γ+σ-1)/12", c.dense_far), ("dense exponent -γσ/12", c.dense_near),
        ("gap exponent -γσ/14", c.gap), ("guaranteed exponent", c.guaranteed),
        ("measure exponent", c.measure_exponent), ("cardinality exponent", c.cardinality_exponent),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {fraction_str(v)}")
    print(f"{'measure form':<{width}}  |A|^(1 - {fraction_str(1 - c.measure_exponent)})")
    return EXIT_OK


def _params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"parameter {item!r} is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def cmd_generate(args) -> int:
    spec = FamilySpec(args.kind, args.L, args.sigma, args.seed, _params(args.param))
    X = generate_family(spec)
    if args.out:
        write(X, args.out)
        print(f"wrote {len(X)} points at L = {X.L} to {args.out}")
    else:
        sys.stdout.write(dumps(X))
    return EXIT_OK


def cmd_analyze(args) -> int:
    A = read(args.input)
    cfg = SweepConfig(gamma=args.gamma, j=args.j, max_pairs=args.max_pairs)
    spec = FamilySpec("custom-file", A.L, args.sigma, 0, {"path": args.input}, args.name)
    row = analyze_set(A, spec, cfg)
    _emit(row.to_json())
    return EXIT_ERROR if row.error else EXIT_OK


def cmd_classify(args) -> int:
    A = read(args.input)
    B = build_quotient_set(A, args.gamma, max_pairs=args.max_pairs)
    cls = classify(B, dense_budget=args.dense_budget)
    out = {"quotient": B.summary(), "classification": cls.to_json()}
    if not cls.is_gap:
        out["dyadic_density"] = dyadic_density_check(B, cls).to_json()
    _emit(out)
    return EXIT_OK


def cmd_verify_oracles(args) -> int:
    suites = [
        plunnecke_suite(args.universe, args.k, True),
        plunnecke_suite(args.universe, args.k, False),
        ruzsa_suite(args.ruzsa_universe),
    ]
    out = {s.name: s.to_json() for s in suites}
    _emit(out)
    return EXIT_OK if all(s.ok for s in suites) else EXIT_VIOLATION


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.csv:
        cfg.csv_path = args.csv
    if args.json_out:
        cfg.json_path = args.json_out
    if args.workers:
        cfg.workers = args.workers
    result = run_sweep(cfg)
    result.write()
    if cfg.csv_path is None:
        sys.stdout.write(result.csv_text())
    for row in result.rows:
        if row.error:
            print(f"row {row.family} L={row.L} failed: {row.error}", file=sys.stderr)
    if result.theorem_violations:
        return EXIT_VIOLATION
    return EXIT_ERROR if result.failed_rows else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sumproduct-lab", allow_abbrev=False,
                                description="Exact experiments on discretized sum-product expansion.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", allow_abbrev=False, help="exact exponent table for a given sigma")
    c.add_argument("--sigma", type=to_fraction, required=True)
    c.add_argument("--gamma", type=to_fraction)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_constants)

    g = sub.add_parser("generate", allow_abbrev=False, help="write a family member to a grid-set file")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--L", type=int, required=True)
    g.add_argument("--sigma", type=to_fraction, default=Fraction(1, 2))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="kind-specific parameter, e.g. keep=0,3 or step=4; repeatable")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", allow_abbrev=False, help="full pipeline on one grid-set file")
    a.add_argument("--input", required=True)
    a.add_argument("--sigma", type=to_fraction, required=True)
    a.add_argument("--gamma", type=to_fraction)
    a.add_argument("--j", type=int, default=2)
    a.add_argument("--max-pairs", type=int, default=MAX_PAIRS)
    a.add_argument("--name", default="input")
    a.set_defaults(func=cmd_analyze)

    q = sub.add_parser("classify", allow_abbrev=False, help="dense-versus-gap verdict for the quotient set of a file")
    q.add_argument("--input", required=True)
    q.add_argument("--gamma", type=to_fraction, required=True)
    q.add_argument("--max-pairs", type=int, default=MAX_PAIRS)
    q.add_argument("--dense-budget", type=to_fraction, default=DENSE_BUDGET)
    q.set_defaults(func=cmd_classify)

    v = sub.add_parser("verify-oracles", allow_abbrev=False, help="exhaustive refinement and triangle suites")
    v.add_argument("--universe", type=int, default=8)
    v.add_argument("--k", type=int, default=2)
    v.add_argument("--ruzsa-universe", type=int, default=6)
    v.set_defaults(func=cmd_verify_oracles)

    s = sub.add_parser("sweep", allow_abbrev=False, help="run a sweep described by an INI file")
    s.add_argument("--config", required=True)
    s.add_argument("--csv")
    s.add_argument("--json-out")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TheoremViolation as exc:
        print(f"theorem violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (LabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
