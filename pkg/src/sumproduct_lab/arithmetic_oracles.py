"""Plünnecke and Ruzsa inequalities as executable checks.

Finite sets live either in Z_n or in the integers and are held as bitmasks, so
a sumset is a handful of shift-or operations.  The exact statements (Plünnecke
with constant 1, the Ruzsa triangle inequality) raise
:class:`TheoremViolation` when an instance fails, which never happens; the
``≲`` versions report whether a configurable budget was met instead.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import prod
from typing import Iterable, Sequence

from .errors import EmptySetError, HypothesisViolation, TheoremViolation
from .exact import RationalLike, to_fraction
from .grid_set import (
    GridSet, Scale, _as_scale, _require_same_scale, cells, covering_number,
    difference_set, integer_sumset, sumset,
)

EXHAUSTIVE_LIMIT = 20
HALF_BUDGET = 4
DISCRETE_BUDGET_PER_SUMMAND = 8
TRIANGLE_BUDGET = 8


@dataclass(frozen=True)
class FiniteGroupSet:
    """Subset of Z_n (``modulus`` set) or of the integers (``modulus`` None)."""

    modulus: int | None
    elements: tuple

    def __post_init__(self):
        els = (x % self.modulus for x in self.elements) if self.modulus else self.elements
        object.__setattr__(self, "elements", tuple(sorted(set(int(x) for x in els))))
        if self.modulus is not None and self.modulus < 1:
            raise ValueError("modulus must be a positive integer")

    @classmethod
    def of(cls, elements: Iterable[int], modulus: int | None = None) -> "FiniteGroupSet":
        return cls(modulus, tuple(elements))

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def _check(self, other: "FiniteGroupSet"):
        if self.modulus != other.modulus:
            raise ValueError(f"sets live in different groups ({self.modulus} vs {other.modulus})")

    @property
    def mask(self) -> int:
        if self.modulus is None:
            raise TypeError("integer sets have no fixed-width mask")
        m = 0
        for x in self.elements:
            m |= 1 << x
        return m

    def __add__(self, other: "FiniteGroupSet") -> "FiniteGroupSet":
        self._check(other)
        if not self.elements or not other.elements:
            return FiniteGroupSet(self.modulus, ())
        if self.modulus is None:
            return FiniteGroupSet(None, tuple(integer_sumset(list(self.elements), list(other.elements))))
        n, full = self.modulus, (1 << self.modulus) - 1
        src, acc = other.mask, 0
        for x in self.elements:
            acc |= ((src << x) | (src >> (n - x))) & full
        return FiniteGroupSet(n, tuple(i for i in range(n) if acc >> i & 1))

    def __neg__(self) -> "FiniteGroupSet":
        return FiniteGroupSet(self.modulus, tuple(-x for x in self.elements))

    def __sub__(self, other: "FiniteGroupSet") -> "FiniteGroupSet":
        return self + (-other)

    def restrict(self, keep: Iterable[int]) -> "FiniteGroupSet":
        return FiniteGroupSet(self.modulus, tuple(keep))


def _total_sum(Ys: Sequence[FiniteGroupSet]) -> FiniteGroupSet:
    out = Ys[0]
    for Y in Ys[1:]:
        out = out + Y
    return out


@dataclass(frozen=True)
class RefinementResult:
    subset: object
    ratio: Fraction
    method: str
    half_size: bool
    bound: Fraction
    within_bound: bool
    stages: tuple = field(default=(), repr=False)

    def to_json(self) -> dict:
        size = len(self.subset)
        return {
            "size": size,
            "ratio": str(self.ratio),
            "method": self.method,
            "half_size": self.half_size,
            "bound": str(self.bound),
            "within_bound": self.within_bound,
            "stages": [list(s) for s in self.stages],
        }


def _check_hypothesis(X, Ys, Ks):
    if len(X) == 0:
        raise EmptySetError("Plünnecke needs a non-empty X")
    if len(Ys) != len(Ks) or not Ys:
        raise ValueError("need one doubling constant per summand, and at least one summand")
    for i, (Y, K) in enumerate(zip(Ys, Ks)):
        if len(X + Y) > K * len(X):
            raise HypothesisViolation(
                f"#(X+Y_{i + 1}) = {len(X + Y)} exceeds K_{i + 1}·#X = {K * len(X)}")


def _exhaustive_search(X: FiniteGroupSet, T: FiniteGroupSet, bound: Fraction, min_size: int):
    """First subset, by decreasing size then lexicographic order, meeting the bound."""
    els = X.elements
    for size in range(len(els), min_size - 1, -1):
        for combo in itertools.combinations(els, size):
            S = X.restrict(combo)
            if len(S + T) <= bound * size:
                return S
    return None


def _ratio(S: FiniteGroupSet, T: FiniteGroupSet) -> Fraction:
    return Fraction(len(S + T), len(S))


def _greedy_candidate(X: FiniteGroupSet, Y: FiniteGroupSet, rng: random.Random, samples: int):
    """Subset of ``X`` with the smallest ``#(S+Y)/#S`` among windows and random samples."""
    els = X.elements
    n = len(els)
    cands = [els]
    width = n // 2
    while width >= 1:
        step = max(1, width // 2)
        cands.extend(els[i:i + width] for i in range(0, n - width + 1, step))
        width //= 2
    for _ in range(samples):
        size = rng.randint(1, n)
        cands.append(tuple(sorted(rng.sample(els, size))))
    best, best_ratio = None, None
    for c in cands:
        S = X.restrict(c)
        r = _ratio(S, Y)
        if best is None or r < best_ratio or (r == best_ratio and len(S) > len(best)):
            best, best_ratio = S, r
    return best


def plunnecke_refinement(
    X: FiniteGroupSet,
    Ys: Sequence[FiniteGroupSet],
    Ks: Sequence[RationalLike],
    require_half: bool = False,
    *,
    half_budget: RationalLike | None = None,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    seed: int = 0,
) -> RefinementResult:
    """Find ``X' ⊆ X`` with ``#(X'+Y_1+...+Y_k) <= c·prod(K_i)·#X'``.

    ``c`` is 1 without the half-size requirement.  With it, ``c`` defaults to
    ``max(4, 2**k)``; peeling guarantees ``2**k``.
    """
    Ks = [to_fraction(K) for K in Ks]
    _check_hypothesis(X, Ys, Ks)
    k = len(Ys)
    T = _total_sum(list(Ys))
    if require_half:
        c = to_fraction(half_budget) if half_budget is not None else Fraction(max(HALF_BUDGET, 2 ** k))
    else:
        c = Fraction(1)
    bound = c * prod(Ks)
    n = len(X)
    exhaustive = n <= exhaustive_limit

    if not require_half:
        if exhaustive:
            S = _exhaustive_search(X, T, bound, 1)
            if S is None:
                raise TheoremViolation(f"no subset of X meets the Plünnecke bound {bound} (X={X.elements})")
            return RefinementResult(S, _ratio(S, T), "exhaustive", False, bound, True)
        S = _greedy_candidate(X, Ys[0], random.Random(seed), samples=4 * n)
        r = _ratio(S, T)
        return RefinementResult(S, r, "ratio-greedy", False, bound, r <= bound)

    stages = peel_refinements(X, Ys, exhaustive_limit=exhaustive_limit, seed=seed)
    union = X.restrict(itertools.chain.from_iterable(st.piece.elements for st in stages))
    r = _ratio(union, T)
    method = "exhaustive" if exhaustive else "ratio-greedy"
    if exhaustive and r > Fraction(2 ** k) * prod(Ks):
        raise TheoremViolation(f"peeled union ratio {r} exceeds 2^k·prod(K) for X={X.elements}")
    summary = tuple((len(st.piece), st.union_size, str(st.ratio)) for st in stages)
    if r > bound and exhaustive:
        S = _exhaustive_search(X, T, bound, (n + 1) // 2)
        if S is not None:
            return RefinementResult(S, _ratio(S, T), method, True, bound, True, summary)
    return RefinementResult(union, r, method, True, bound, r <= bound, summary)


@dataclass(frozen=True)
class PeelStage:
    piece: FiniteGroupSet
    leftover_constants: tuple
    ratio: Fraction
    union_size: int


def peel_refinements(
    X: FiniteGroupSet,
    Ys: Sequence[FiniteGroupSet],
    *,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    seed: int = 0,
) -> list[PeelStage]:
    """Repeatedly refine the leftover of ``X`` until the pieces cover half of it.

    Each stage applies the constant-1 refinement to the leftover with its own
    measured doubling constants, which are at most twice the original ones
    while the leftover keeps at least half of ``X``.
    """
    if len(X) == 0:
        raise EmptySetError("cannot peel an empty set")
    T = _total_sum(list(Ys))
    leftover = X
    taken: list[int] = []
    stages = []
    rng = random.Random(seed)
    while 2 * len(taken) < len(X):
        Ks = tuple(Fraction(len(leftover + Y), len(leftover)) for Y in Ys)
        if len(leftover) <= exhaustive_limit:
            piece = _exhaustive_search(leftover, T, prod(Ks), 1)
            if piece is None:
                raise TheoremViolation(f"Plünnecke failed on leftover {leftover.elements}")
        else:
            piece = _greedy_candidate(leftover, Ys[0], rng, samples=4 * len(leftover))
        taken.extend(piece.elements)
        gone = set(piece.elements)
        leftover = leftover.restrict(x for x in leftover.elements if x not in gone)
        stages.append(PeelStage(piece, Ks, _ratio(piece, T), len(taken)))
    return stages


def ruzsa_triangle_check(X: FiniteGroupSet, Y: FiniteGroupSet, Z: FiniteGroupSet) -> tuple[int, Fraction]:
    """Return ``(#(X-Z), #(X-Y)·#(Y-Z)/#Y)``; the first never exceeds the second."""
    if len(Y) == 0:
        raise EmptySetError("the Ruzsa triangle inequality needs a non-empty Y")
    lhs = len(X - Z)
    rhs = Fraction(len(X - Y) * len(Y - Z), len(Y))
    if lhs > rhs:
        raise TheoremViolation(f"Ruzsa triangle fails: {lhs} > {rhs} for {X}, {Y}, {Z}")
    return lhs, rhs


# ---------------------------------------------------------------------------
# delta-covering versions

def _cells_set(X: GridSet, delta: Scale) -> FiniteGroupSet:
    return FiniteGroupSet(None, tuple(int(c) for c in cells(X, delta)))


def discretized_plunnecke(
    X: GridSet,
    Ys: Sequence[GridSet],
    Ks: Sequence[RationalLike],
    delta,
    *,
    budget_per_summand: RationalLike = DISCRETE_BUDGET_PER_SUMMAND,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    seed: int = 0,
) -> RefinementResult:
    """δ-refinement ``X'`` of ``X`` with small ``E_δ(X'+Y_1+...+Y_k)``.

    The sets are replaced by their δ-cells, the half-size refinement runs on
    those integer sets, and ``X'`` is the part of ``X`` lying in the kept
    cells.  The outcome is compared against ``8k·prod(K_i)`` and reported.
    """
    delta = _as_scale(delta)
    Ks = [to_fraction(K) for K in Ks]
    if len(Ys) != len(Ks) or not Ys:
        raise ValueError("need one doubling constant per summand, and at least one summand")
    if len(X) == 0:
        raise EmptySetError("discretized Plünnecke needs a non-empty X")
    for Y in Ys:
        _require_same_scale(X, Y)
    e_x = covering_number(X, delta)
    for i, (Y, K) in enumerate(zip(Ys, Ks)):
        e = covering_number(sumset(X, Y), delta)
        if e > K * e_x:
            raise HypothesisViolation(f"E_δ(X+Y_{i + 1}) = {e} exceeds K_{i + 1}·E_δ(X) = {K * e_x}")
    Xd = _cells_set(X, delta)
    Yds = [_cells_set(Y, delta) for Y in Ys]
    Kd = [Fraction(len(Xd + Yd), len(Xd)) for Yd in Yds]
    comb = plunnecke_refinement(Xd, Yds, Kd, require_half=True, exhaustive_limit=exhaustive_limit, seed=seed)
    keep = set(comb.subset.elements)
    sh = X.L - delta.log_inv
    Xp = X.subset(k for k in X.indices if (k >> sh) in keep)
    total = Ys[0]
    for Y in Ys[1:]:
        total = sumset(total, Y)
    ratio = Fraction(covering_number(sumset(Xp, total), delta), covering_number(Xp, delta))
    bound = to_fraction(budget_per_summand) * len(Ys) * prod(Ks)
    return RefinementResult(Xp, ratio, comb.method, True, bound, ratio <= bound, comb.stages)


def discretized_triangle(X: GridSet, Y: GridSet, Z: GridSet, delta) -> tuple[int, Fraction]:
    """``(E_δ(X-Z), E_δ(X-Y)·E_δ(Y-Z)/E_δ(Y))`` under the cell proxy.

    Cell arithmetic loses at most a factor 2 three times, so ``lhs <= 8·rhs``
    is a theorem for the proxy and is enforced.
    """
    delta = _as_scale(delta)
    if len(Y) == 0:
        raise EmptySetError("the triangle inequality needs a non-empty Y")
    lhs = covering_number(difference_set(X, Z), delta)
    rhs = Fraction(covering_number(difference_set(X, Y), delta) * covering_number(difference_set(Y, Z), delta),
                   covering_number(Y, delta))
    if lhs > TRIANGLE_BUDGET * rhs:
        raise TheoremViolation(f"discretized triangle fails: {lhs} > 8·{rhs}")
    return lhs, rhs


# ---------------------------------------------------------------------------
# exhaustive suites

def _nonempty_subsets(universe: int) -> list[FiniteGroupSet]:
    return [FiniteGroupSet(None, tuple(i for i in range(universe) if m >> i & 1))
            for m in range(1, 1 << universe)]


@dataclass
class SuiteFindings:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"name": self.name, "cases": self.cases, "failures": self.failures[:20],
                "failure_count": len(self.failures), "ok": self.ok}


def plunnecke_suite(universe: int = 8, k: int = 2, require_half: bool = False) -> SuiteFindings:
    """Every pair of non-empty ``X, Y ⊆ {0..universe-1}`` with ``Y_i = Y`` repeated ``k`` times."""
    label = "half" if require_half else "plain"
    findings = SuiteFindings(f"plunnecke-{label}-k{k}-U{universe}")
    subsets = _nonempty_subsets(universe)
    for X in subsets:
        for Y in subsets:
            K = Fraction(len(X + Y), len(X))
            findings.cases += 1
            try:
                res = plunnecke_refinement(X, [Y] * k, [K] * k, require_half=require_half)
                if not res.within_bound or (require_half and 2 * len(res.subset) < len(X)):
                    findings.failures.append([list(X), list(Y), str(res.ratio)])
            except TheoremViolation as exc:
                findings.failures.append([list(X), list(Y), str(exc)])
    return findings


def ruzsa_suite(universe: int = 6) -> SuiteFindings:
    findings = SuiteFindings(f"ruzsa-U{universe}")
    subsets = _nonempty_subsets(universe)
    for X in subsets:
        for Y in subsets:
            for Z in subsets:
                findings.cases += 1
                try:
                    ruzsa_triangle_check(X, Y, Z)
                except TheoremViolation as exc:
                    findings.failures.append(str(exc))
    return findings
