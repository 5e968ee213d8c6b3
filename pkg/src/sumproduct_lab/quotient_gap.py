"""Difference quotients and the dense-versus-gap dichotomy.

For ``A1`` on a grid of step ``δ = 2**-L`` the quotient set is

    B = {(a1 - a2) / (a3 - a4) : a_i in A1, |a3 - a4| > δ**γ}.

Differences are deduplicated exactly first: with ``D = A1 - A1`` (grid
units) and ``Q = {q in D : q > δ**γ}``, and because ``D = -D``,
``B = {p / q : p in D, q in Q}``.  Members are therefore never materialized;
``D`` and ``Q`` answer exact membership, nearest-member and range queries.

The resolution is ``s = 2**-m`` with ``m = ceil(L(1 - 2γ))``, the unique power
of two in ``(δ**(1-2γ)/2, δ**(1-2γ)]``.  Each ``s``-cell records its smallest and
largest member exactly.  Since two points of one half-open cell are closer
than ``s``, an occupied cell is entirely within distance ``< s`` of ``B``, and
the neighbours' extreme members settle every ``dist(x, B) >= s`` question.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .errors import BudgetExceeded, PreconditionError, TheoremViolation
from .exact import RationalLike, ceil_fraction, floor_fraction, fraction_str, pow2, to_fraction
from .grid_set import GridSet

DENSE_BUDGET = Fraction(1, 4)
MAX_PAIRS = 12_500_000
_SAFE = 1 << 62


def admissibility_threshold(L: int, gamma: Fraction) -> int:
    """Largest integer ``T`` such that ``q > δ**γ`` (in grid units) iff ``q > T``."""
    return pow2(L * (1 - gamma)).floor()


def resolution_exponent(L: int, gamma: Fraction) -> int:
    """``m`` with ``2**-m`` in ``(δ**(1-2γ)/2, δ**(1-2γ)]``."""
    return ceil_fraction(L * (1 - 2 * gamma))


def _floor_div(num: np.ndarray, den) -> np.ndarray:
    return num // den


@dataclass(frozen=True, eq=False)
class QuotientSet:
    gamma: Optional[Fraction]
    L: Optional[int]
    m: int
    numerators: np.ndarray = field(repr=False)
    denominators: np.ndarray = field(repr=False)
    cell_lo: int = field(repr=False)
    mask: np.ndarray = field(repr=False)
    min_num: np.ndarray = field(repr=False)
    min_den: np.ndarray = field(repr=False)
    max_num: np.ndarray = field(repr=False)
    max_den: np.ndarray = field(repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)
    witnesses: Optional[dict] = field(default=None, repr=False)
    source: Optional[GridSet] = field(default=None, repr=False)

    @property
    def s(self) -> Fraction:
        return Fraction(1, 1 << self.m)

    @property
    def pair_count(self) -> int:
        return len(self.numerators) * len(self.denominators)

    # -- cells -------------------------------------------------------------
    def cell_of(self, x: Fraction) -> int:
        return floor_fraction(x * (1 << self.m))

    def occupied(self, c: int) -> bool:
        i = c - self.cell_lo
        return 0 <= i < len(self.mask) and bool(self.mask[i])

    def cell_min(self, c: int) -> Fraction:
        i = c - self.cell_lo
        return Fraction(int(self.min_num[i]), int(self.min_den[i]))

    def cell_max(self, c: int) -> Fraction:
        i = c - self.cell_lo
        return Fraction(int(self.max_num[i]), int(self.max_den[i]))

    def occupied_unit_cells(self) -> int:
        """Occupied cells among the ``s**-1`` cells tiling ``[0, 1)``."""
        lo = -self.cell_lo
        return int(self.mask[max(lo, 0):max(lo + (1 << self.m), 0)].sum())

    # -- exact queries -----------------------------------------------------
    def contains(self, x: RationalLike) -> bool:
        x = to_fraction(x)
        u, v = x.numerator, x.denominator
        for q in self.denominators.tolist():
            if (u * q) % v == 0:
                p = u * q // v
                i = np.searchsorted(self.numerators, p)
                if i < len(self.numerators) and int(self.numerators[i]) == p:
                    return True
        return False

    def distance(self, x: RationalLike) -> Fraction:
        """Exact ``dist(x, B)`` by a nearest-numerator search per denominator."""
        x = to_fraction(x)
        nums = self.numerators.tolist()
        best = None
        from bisect import bisect_left
        for q in self.denominators.tolist():
            t = x * q
            i = bisect_left(nums, t)
            for j in (i - 1, i):
                if 0 <= j < len(nums):
                    d = abs(Fraction(nums[j], q) - x)
                    if best is None or d < best:
                        best = d
        return best

    def smallest_member_in(self, lo: Fraction, hi: Fraction) -> Optional[tuple[int, int]]:
        """Smallest member ``p/q`` in the closed range ``[lo, hi]``, as ``(p, q)``."""
        if lo > hi:
            return None
        Q = self.denominators
        bound = max(abs(lo.numerator), abs(hi.numerator)) * int(Q[-1])
        if bound < _SAFE and max(lo.denominator, hi.denominator) < _SAFE:
            need = -((-lo.numerator * Q) // lo.denominator)
            cap = (hi.numerator * Q) // hi.denominator
        else:
            qs = [int(q) for q in Q]
            need = np.array([ceil_fraction(lo * q) for q in qs], dtype=object)
            cap = np.array([floor_fraction(hi * q) for q in qs], dtype=object)
        pos = np.searchsorted(self.numerators, need.astype(self.numerators.dtype) if need.dtype != object else need)
        best = None
        for qi in np.flatnonzero(pos < len(self.numerators)).tolist():
            p = int(self.numerators[pos[qi]])
            if p <= cap[qi]:
                q = int(Q[qi])
                if best is None or Fraction(p, q) < Fraction(*best):
                    best = (p, q)
        return best

    def generators(self, p: int, q: int) -> Optional[tuple[int, int, int, int]]:
        """Grid indices ``(a1, a2, a3, a4)`` with ``a1 - a2 = p`` and ``a3 - a4 = q``."""
        if self.witnesses is None:
            return None
        return self.witnesses[p] + self.witnesses[q]

    def summary(self) -> dict:
        return {
            "gamma": fraction_str(self.gamma) if self.gamma is not None else None,
            "L": self.L,
            "m": self.m,
            "numerators": len(self.numerators),
            "denominators": len(self.denominators),
            "pair_count": self.pair_count,
            "cells": len(self.mask),
            "occupied_cells": int(self.mask.sum()),
            "occupied_unit_cells": self.occupied_unit_cells(),
        }


def _build(numerators: np.ndarray, denominators: np.ndarray, m: int, counts: Optional[dict] = None):
    nums = numerators
    scale = 1 << m
    q_min = int(denominators[0])
    lo_val, hi_val = int(nums[0]), int(nums[-1])
    cell_lo = min((lo_val * scale) // q_min, (lo_val * scale) // int(denominators[-1]))
    cell_hi = max((hi_val * scale) // q_min, (hi_val * scale) // int(denominators[-1]))
    size = cell_hi - cell_lo + 1
    mask = np.zeros(size, dtype=bool)
    min_num = np.zeros(size, dtype=np.int64)
    min_den = np.ones(size, dtype=np.int64)
    max_num = np.zeros(size, dtype=np.int64)
    max_den = np.ones(size, dtype=np.int64)
    weights = np.zeros(size, dtype=np.int64) if counts is not None else None
    scaled = nums * scale
    r_num = np.array([counts[int(p)] for p in nums], dtype=np.int64) if counts is not None else None
    for q in denominators.tolist():
        cells = scaled // q - cell_lo
        uniq, first = np.unique(cells, return_index=True)
        last = np.r_[first[1:] - 1, len(cells) - 1]
        pf, pl = nums[first], nums[last]
        fresh = ~mask[uniq]
        # p/q < cur_num/cur_den  <=>  p*cur_den < cur_num*q   (denominators positive)
        take_min = fresh | (pf * min_den[uniq] < min_num[uniq] * q)
        take_max = fresh | (pl * max_den[uniq] > max_num[uniq] * q)
        min_num[uniq[take_min]] = pf[take_min]
        min_den[uniq[take_min]] = q
        max_num[uniq[take_max]] = pl[take_max]
        max_den[uniq[take_max]] = q
        mask[uniq] = True
        if weights is not None:
            np.add.at(weights, cells, r_num * counts[q])
    if weights is not None:
        weights *= 2  # the negative denominators -q contribute the mirror image
    return cell_lo, mask, min_num, min_den, max_num, max_den, weights


def build_quotient_set(A1: GridSet, gamma: RationalLike, *, max_pairs: int = MAX_PAIRS) -> QuotientSet:
    gamma = to_fraction(gamma)
    if not 0 < gamma < Fraction(1, 2):
        raise ValueError(f"gamma must lie in (0, 1/2), got {gamma}")
    if len(A1) == 0:
        raise PreconditionError("quotient set of an empty set")
    L = A1.L
    if L > 20:
        raise BudgetExceeded("scales finer than 2^-20 exceed the exact int64 kernels; use a coarser delta")
    idx = A1.array.astype(np.int64)
    n = len(idx)
    diffs = np.subtract.outer(idx, idx).ravel()
    D, first, counts = np.unique(diffs, return_index=True, return_counts=True)
    T = admissibility_threshold(L, gamma)
    Q = D[D > T]
    if len(Q) == 0:
        raise PreconditionError(
            f"no admissible denominator: every difference is at most δ^γ ({T} grid steps)")
    if len(D) * len(Q) > max_pairs:
        raise BudgetExceeded(
            f"{len(D)} x {len(Q)} quotient pairs exceed the budget of {max_pairs}; use a coarser delta")
    m = resolution_exponent(L, gamma)
    rep = {int(d): int(c) for d, c in zip(D, counts)}
    witnesses = {int(d): (int(idx[f // n]), int(idx[f % n])) for d, f in zip(D, first)}
    cell_lo, mask, mn, md, xn, xd, w = _build(D, Q, m, rep)
    return QuotientSet(gamma, L, m, D, Q, cell_lo, mask, mn, md, xn, xd, w, witnesses, A1)


def quotient_set_from_members(members: Iterable[RationalLike], m: int) -> QuotientSet:
    """Explicit finite set of rationals at resolution ``2**-m`` (synthetic instances)."""
    fr = sorted({to_fraction(x) for x in members})
    if not fr:
        raise PreconditionError("empty member list")
    den = 1
    for x in fr:
        den = den * x.denominator // np.gcd(den, x.denominator)
    nums = np.array([int(x * den) for x in fr], dtype=np.int64)
    Q = np.array([den], dtype=np.int64)
    cell_lo, mask, mn, md, xn, xd, _ = _build(nums, Q, m)
    return QuotientSet(None, None, m, nums, Q, cell_lo, mask, mn, md, xn, xd)


# ---------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class GapCertificate:
    b: Fraction
    numerator: int
    denominator: int
    generators: Optional[tuple]
    case: str               # "A.1": b/2 isolated, "A.2": (b+1)/2 isolated
    target: Fraction
    distance: Fraction

    def to_json(self) -> dict:
        return {
            "b": fraction_str(self.b),
            "numerator": self.numerator,
            "denominator": self.denominator,
            "generators": list(self.generators) if self.generators else None,
            "case": self.case,
            "target": fraction_str(self.target),
            "distance": fraction_str(self.distance),
        }


@dataclass(frozen=True)
class DenseCertificate:
    occupied_cells: int
    ratio: Fraction         # occupied_cells * s

    def to_json(self) -> dict:
        return {"occupied_cells": self.occupied_cells, "ratio": fraction_str(self.ratio)}


@dataclass(frozen=True)
class Classification:
    verdict: str            # "dense" | "gap"
    s: Fraction
    gap: Optional[GapCertificate]
    dense: DenseCertificate

    @property
    def is_gap(self) -> bool:
        return self.verdict == "gap"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "s": fraction_str(self.s),
            "gap": self.gap.to_json() if self.gap else None,
            "dense": self.dense.to_json(),
        }


def uncovered_intervals(B: QuotientSet) -> list[tuple[Fraction, Fraction]]:
    """Closed pieces of ``[0, 1]`` at distance ``>= s`` from ``B``, ascending."""
    s = B.s
    out = []
    for c in range(0, (1 << B.m) + 1):
        if B.occupied(c):
            continue
        lo = c * s
        if B.occupied(c - 1):
            lo = max(lo, B.cell_max(c - 1) + s)
        hi = (c + 1) * s
        if B.occupied(c + 1):
            hi = min(hi, B.cell_min(c + 1) - s)
        lo, hi = max(lo, Fraction(0)), min(hi, Fraction(1))
        if lo <= hi:
            out.append((lo, hi))
    return out


def classify(B: QuotientSet, *, dense_budget: RationalLike = DENSE_BUDGET) -> Classification:
    """Gap if some ``b`` in ``B ∩ [0,1]`` has ``b/2`` or ``(b+1)/2`` at distance ``>= s``.

    Every member of ``B ∩ [0, 1]`` is considered, through range queries over
    the uncovered pieces of ``[0, 1]``.
    """
    s = B.s
    count = B.occupied_unit_cells()
    dense = DenseCertificate(count, count * s)
    one, zero = Fraction(1), Fraction(0)
    for lo, hi in uncovered_intervals(B):
        for case, (a, b) in (("A.1", (2 * lo, 2 * hi)), ("A.2", (2 * lo - 1, 2 * hi - 1))):
            a, b = max(a, zero), min(b, one)
            hit = B.smallest_member_in(a, b)
            if hit is None:
                continue
            p, q = hit
            bval = Fraction(p, q)
            target = bval / 2 if case == "A.1" else (bval + 1) / 2
            dist = B.distance(target)
            if dist < s:
                raise TheoremViolation(f"mask prefilter disagrees with exact distance at {target}")
            gap = GapCertificate(bval, p, q, B.generators(p, q), case, target, dist)
            return Classification("gap", s, gap, dense)
    if dense.ratio < to_fraction(dense_budget):
        raise TheoremViolation(
            f"no gap point, yet only {count} of {1 << B.m} unit cells are occupied")
    return Classification("dense", s, None, dense)


def verify_classification(B: QuotientSet, cls: Classification,
                          dense_budget: RationalLike = DENSE_BUDGET) -> bool:
    """Independent exact re-check of a certificate (no mask shortcuts)."""
    s = B.s
    if cls.is_gap:
        g = cls.gap
        b = Fraction(g.numerator, g.denominator)
        if g.generators is not None:
            a1, a2, a3, a4 = g.generators
            if Fraction(a1 - a2, a3 - a4) != b:
                return False
            if B.L is not None and not a3 - a4 > admissibility_threshold(B.L, B.gamma):
                return False
        if not (0 <= b <= 1 and B.contains(b)):
            return False
        target = b / 2 if g.case == "A.1" else (b + 1) / 2
        return target == g.target and B.distance(target) >= s
    occupied = set()
    scale = 1 << B.m
    for q in B.denominators.tolist():
        for p in B.numerators.tolist():
            if 0 <= p < q:
                occupied.add((p * scale) // q)
    return len(occupied) == cls.dense.occupied_cells and len(occupied) * s >= to_fraction(dense_budget)


@dataclass(frozen=True)
class DyadicDensityResult:
    ok: bool
    checked: int
    failing_point: Optional[Fraction] = None
    chain: tuple = ()

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checked": self.checked,
            "failing_point": fraction_str(self.failing_point) if self.failing_point is not None else None,
            "chain": [[fraction_str(x), fraction_str(d)] for x, d in self.chain],
        }


def _within(B: QuotientSet, x: Fraction, radius_cells: int) -> bool:
    """``dist(x, B) <= radius_cells * s``, decided from cell extremes."""
    c = B.cell_of(x)
    if B.occupied(c):
        return True
    r = radius_cells * B.s
    for k in range(1, radius_cells + 1):
        if B.occupied(c - k) and x - B.cell_max(c - k) <= r:
            return True
        if B.occupied(c + k) and B.cell_min(c + k) - x <= r:
            return True
    return False


def dyadic_density_check(B: QuotientSet, classification: Optional[Classification] = None) -> DyadicDensityResult:
    """Every ``p/2**n`` in ``[0, 1]`` with ``n <= m-1`` lies within ``2s`` of ``B``."""
    cls = classification or classify(B)
    if cls.is_gap:
        raise PreconditionError("dyadic density only follows in the dense case")
    top = B.m - 1
    checked = 0
    for p in range((1 << top) + 1):
        x = Fraction(p, 1 << top)
        checked += 1
        if not _within(B, x, 2):
            chain = []
            y = x
            while True:
                chain.append((y, B.distance(y)))
                if y.denominator == 1:
                    break
                y = 2 * y if y < Fraction(1, 2) else 2 * y - 1
            return DyadicDensityResult(False, checked, x, tuple(chain))
    return DyadicDensityResult(True, checked)
