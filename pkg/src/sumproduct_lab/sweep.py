"""Sweep harness: one report row per (family, L), CSV and JSON output."""

from __future__ import annotations

import configparser
import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .arithmetic_oracles import plunnecke_suite, ruzsa_suite
from .errors import LabError, TheoremViolation
from .exact import fraction_str, to_fraction
from .expansion_analysis import (
    CSV_COLUMNS, ExpansionReport, dense_case_select, energy_lower_bound, gap_case_vectors,
    lemma_upper_bounds, quadruple_count, select_popular_pair, theoretical_constants,
)
from .families import FamilySpec, generate_family
from .grid_set import covering_number, non_concentration_constant, product_cover, sumset
from .quotient_gap import DENSE_BUDGET, MAX_PAIRS, build_quotient_set, classify, dyadic_density_check
from .regularizer import TreeParams, uniformize

FAMILY_KEYS = {"kind", "sigma", "seed", "l"}


@dataclass
class SweepConfig:
    families: list = field(default_factory=list)     # FamilySpec, one per (family, L)
    gamma: Optional[Fraction] = None
    j: int = 2
    max_pairs: int = MAX_PAIRS
    dense_budget: Fraction = DENSE_BUDGET
    csv_path: Optional[Path] = None
    json_path: Optional[Path] = None
    workers: int = 1
    oracle_universe: int = 0                         # 0 skips the bundled oracle run

    def validate(self) -> None:
        for spec in self.families:
            if spec.L % self.j:
                raise ValueError(f"family {spec.name}: L = {spec.L} is not divisible by j = {self.j}")
        for p in (self.csv_path, self.json_path):
            if p is not None:
                parent = Path(p).parent
                parent.mkdir(parents=True, exist_ok=True)
                if not os.access(parent, os.W_OK):
                    raise PermissionError(f"cannot write to {parent}")

    def to_json(self) -> dict:
        return {
            "families": [f.to_json() for f in self.families],
            "gamma": fraction_str(self.gamma) if self.gamma is not None else None,
            "j": self.j,
            "max_pairs": self.max_pairs,
            "dense_budget": fraction_str(self.dense_budget),
            "oracle_universe": self.oracle_universe,
        }


def _int_values(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def load_config(path) -> SweepConfig:
    """Read an INI file with a ``[sweep]`` section and one ``[family NAME]`` section per family."""
    parser = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        parser.read_file(fh)
    return config_from_parser(parser, base=Path(path).parent)


def config_from_parser(parser: configparser.ConfigParser, base: Path = Path(".")) -> SweepConfig:
    sw = parser["sweep"] if parser.has_section("sweep") else {}
    L_default = _int_values(sw.get("L", ""))
    cfg = SweepConfig(
        gamma=to_fraction(sw["gamma"]) if sw.get("gamma") else None,
        j=int(sw.get("j", 2)),
        max_pairs=int(sw.get("max_pairs", MAX_PAIRS)),
        dense_budget=to_fraction(sw.get("dense_budget", str(DENSE_BUDGET))),
        csv_path=base / sw["csv"] if sw.get("csv") else None,
        json_path=base / sw["json"] if sw.get("json") else None,
        workers=int(sw.get("workers", 1)),
        oracle_universe=int(sw.get("oracle_universe", 0)),
    )
    for section in parser.sections():
        if not section.startswith("family"):
            continue
        name = section[len("family"):].strip(" :") or f"family{len(cfg.families)}"
        body = parser[section]
        Ls = _int_values(body["L"]) if "L" in body else L_default
        if not Ls:
            raise ValueError(f"family {name} has no L values")
        params = {k: v for k, v in body.items() if k not in FAMILY_KEYS}
        if "path" in params:
            params["path"] = str(base / params["path"])
        for L in Ls:
            cfg.families.append(FamilySpec(body["kind"], L, to_fraction(body.get("sigma", "1/2")),
                                           int(body.get("seed", 0)), params, name))
    cfg.validate()
    return cfg


def analyze_set(A, spec: FamilySpec, cfg: SweepConfig) -> ExpansionReport:
    """Full pipeline on one set; stage results go into ``details``."""
    sigma = spec.sigma_target
    consts = theoretical_constants(sigma, cfg.gamma)
    gamma = consts.gamma
    profile = non_concentration_constant(A, sigma)
    cover_sum = covering_number(sumset(A, A), A.scale)
    cover_prod = covering_number(product_cover(A, A, A.scale), A.scale)
    row = ExpansionReport(spec.name, spec.L, sigma, len(A), float(profile.c_observed),
                          cover_sum, cover_prod, c_theory=consts.c_max)
    row.details["concentration"] = profile.to_json()
    row.details["constants"] = consts.to_json()
    try:
        pair = select_popular_pair(A, row.K)
        row.details["popular_pair"] = pair.to_json()
        A1, cert = uniformize(pair.abar, TreeParams(cfg.j, A.L // cfg.j))
        row.details["tree"] = cert.to_json()
        B = build_quotient_set(A1, gamma, max_pairs=cfg.max_pairs)
        row.details["quotient"] = B.summary()
        cls = classify(B, dense_budget=cfg.dense_budget)
        row.verdict = cls.verdict
        row.details["classification"] = cls.to_json()
        delta = A.delta
        if cls.is_gap:
            vec = gap_case_vectors(cls, delta)
            row.gap_b, row.e1, row.e2 = cls.gap.b, vec.e1, vec.e2
            q = quadruple_count(A1, vec.e1, vec.e2, delta, gamma)
            if q.far:
                raise TheoremViolation(f"{q.far} quadruples with a far denominator in the gap case")
            row.details["gap_vectors"] = vec.to_json()
            d1, d2, k = vec.d1, vec.d2, vec.k
        else:
            row.details["dyadic_density"] = dyadic_density_check(B, cls).to_json()
            sel = dense_case_select(A1, gamma, B)
            row.details["dense_selection"] = sel.to_json()
            d1, d2, k = (sel.b1 - sel.b2) * delta, (sel.b3 - sel.b4) * delta, 2
            q = quadruple_count(A1, d1, d2, delta, gamma)
        row.q_total, row.q_far, row.q_near = q.total, q.far, q.near
        lhs, rhs = energy_lower_bound(A1, q.d1, q.d2)
        row.details["energy"] = {"lhs": lhs, "rhs": fraction_str(rhs)}
        row.details["upper_bounds"] = lemma_upper_bounds(A, A1, d1, d2, k, sigma).to_json()
    except TheoremViolation:
        raise
    except (LabError, ValueError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_row(spec: FamilySpec, cfg: SweepConfig) -> ExpansionReport:
    try:
        A = generate_family(spec)
    except (LabError, ValueError, OSError) as exc:
        return ExpansionReport(spec.name, spec.L, spec.sigma_target, 0, None, 0, 0,
                               error=f"{type(exc).__name__}: {exc}")
    try:
        return analyze_set(A, spec, cfg)
    except TheoremViolation as exc:
        row = ExpansionReport(spec.name, spec.L, spec.sigma_target, len(A), None, 0, 0,
                              error=f"TheoremViolation: {exc}")
        row.details["theorem_violation"] = True
        return row


def _run_row_args(args):
    return run_row(*args)


@dataclass
class SweepResult:
    rows: list
    oracle_findings: dict
    config: SweepConfig

    @property
    def theorem_violations(self) -> int:
        n = sum(1 for r in self.rows if r.details.get("theorem_violation"))
        return n + sum(v.get("failure_count", 0) for v in self.oracle_findings.values())

    @property
    def failed_rows(self) -> int:
        return sum(1 for r in self.rows if r.error)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def bundle(self) -> dict:
        return {
            "version": __version__,
            "config": self.config.to_json(),
            "rows": [r.to_json() for r in self.rows],
            "oracle_findings": self.oracle_findings,
        }

    def write(self) -> None:
        if self.config.csv_path is not None:
            Path(self.config.csv_path).write_text(self.csv_text())
        if self.config.json_path is not None:
            Path(self.config.json_path).write_text(json.dumps(self.bundle(), indent=2, sort_keys=True) + "\n")


def run_sweep(cfg: SweepConfig) -> SweepResult:
    cfg.validate()
    specs = sorted(cfg.families, key=lambda s: (s.name, s.L))
    if cfg.workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_run_row_args, [(s, cfg) for s in specs]))
    else:
        rows = [run_row(s, cfg) for s in specs]
    findings = {}
    if cfg.oracle_universe:
        for label, f in (("plunnecke", plunnecke_suite(cfg.oracle_universe, 2, True)),
                         ("ruzsa", ruzsa_suite(cfg.oracle_universe))):
            findings[label] = f.to_json()
    return SweepResult(rows, findings, cfg)
