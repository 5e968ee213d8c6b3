"""Expansion measurements: popular dilates, quadruple energies, K and exponents.

Grid indices stand for points ``k·δ``.  Every count here is exact: real
coefficients are rescaled to a common integer lattice before comparison, and
thresholds such as ``δ**γ`` go through :func:`admissibility_threshold`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .arithmetic_oracles import discretized_plunnecke
from .errors import EmptySetError, PreconditionError, TheoremViolation
from .exact import Monomial, RationalLike, fraction_str, pow2, to_fraction
from .grid_set import (
    GridSet, covering_number, linear_combination_cover, product_cover, sumset,
)
from .quotient_gap import (
    Classification, QuotientSet, admissibility_threshold, build_quotient_set,
)

_SAFE = 1 << 62


def _lcm(a: int, b: int) -> int:
    return a * b // np.gcd(a, b)


def _require_d2(d2: Fraction):
    if d2 == 0:
        raise ValueError("the coefficient d2 must be non-zero")


# ---------------------------------------------------------------------------
# popular dilate

@dataclass(frozen=True)
class PopularPair:
    b: int                  # grid index of the selected element
    abar: GridSet
    rho: Fraction
    level: int              # common-cell counts of Ā lie in [2**level, 2**(level+1))
    K: Fraction
    popularity: int         # sum over x of common_cells(xA', bA')
    class_sizes: dict = field(default_factory=dict, repr=False)

    @property
    def level_value(self) -> int:
        return 1 << self.level

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "abar_size": len(self.abar),
            "rho": fraction_str(self.rho),
            "level": self.level,
            "K": fraction_str(self.K),
            "popularity": self.popularity,
            "class_sizes": {str(k): v for k, v in sorted(self.class_sizes.items())},
        }


def doubling_constant(A: GridSet) -> Fraction:
    """``K = (E_δ(A+A) + E_δ(A·A)) / #A`` with the aligned-cell covering proxy."""
    if len(A) == 0:
        raise EmptySetError("doubling constant of an empty set")
    return Fraction(covering_number(sumset(A, A), A.scale)
                    + covering_number(product_cover(A, A, A.scale), A.scale), len(A))


def dilate_cells(A: GridSet) -> np.ndarray:
    """Boolean matrix: row ``i`` marks the δ-cells of ``a_i · A``."""
    k = A.array.astype(np.int64)
    if int(k[-1]) ** 2 >= _SAFE:
        raise PreconditionError("grid too fine for the dilate kernel")
    cells = np.multiply.outer(k, k) >> A.L
    lo = int(cells.min())
    rows = np.zeros((len(k), int(cells.max()) - lo + 1), dtype=np.float32)
    rows[np.arange(len(k))[:, None], cells - lo] = 1
    return rows


def _dyadic_clamp(x: Fraction, lo: Fraction) -> Fraction:
    """Largest power of two ``<= x``, pushed into ``[lo, 1]``."""
    e = x.numerator.bit_length() - x.denominator.bit_length()
    p = Fraction(2) ** e
    if p > x:
        p /= 2
    p = min(p, Fraction(1))
    while p < lo:
        p *= 2
    return min(p, Fraction(1))


def select_popular_pair(Aprime: GridSet, K: Optional[RationalLike] = None) -> PopularPair:
    """Most popular dilate ``b`` and the dyadic class ``Ā`` of its partners."""
    if len(Aprime) == 0:
        raise EmptySetError("popular pair of an empty set")
    K = doubling_constant(Aprime) if K is None else to_fraction(K)
    rows = dilate_cells(Aprime)
    common = (rows @ rows.T).astype(np.int64)
    totals = common.sum(axis=0)
    bi = int(np.argmax(totals))
    values = common[:, bi].copy()
    if len(Aprime) > 1:
        # the self-overlap is maximal for every b and says nothing about ratios
        values[bi] = 0
    levels = {}
    for i, v in enumerate(values.tolist()):
        if v:
            levels.setdefault(v.bit_length() - 1, []).append(i)
    if not levels:
        levels = {int(common[bi, bi]).bit_length() - 1: [bi]}
        values[bi] = common[bi, bi]
    level = min(levels, key=lambda l: (-len(levels[l]) << l, l))
    members = levels[level]
    total = int(values.sum())
    spread = max(levels) - min(levels) + 1
    if (len(members) << (level + 1)) * spread < total:
        raise TheoremViolation("dyadic pigeonhole bound failed for the selected class")
    abar = Aprime.subset(Aprime.indices[i] for i in members)
    rho = _dyadic_clamp(Fraction(len(Aprime)) / (K * (1 << level)), 1 / K)
    return PopularPair(Aprime.indices[bi], abar, rho, level, K, int(totals[bi]),
                       {l: len(v) for l, v in levels.items()})


# ---------------------------------------------------------------------------
# quadruple energy

@dataclass(frozen=True)
class QuadrupleCount:
    d1: Fraction
    d2: Fraction
    window: Fraction
    total: int
    far: Optional[int] = None    # |a3 - a4| > δ**γ
    near: Optional[int] = None   # |a3 - a4| <= δ**γ
    gamma: Optional[Fraction] = None

    def to_json(self) -> dict:
        return {
            "d1": fraction_str(self.d1), "d2": fraction_str(self.d2),
            "window": fraction_str(self.window), "total": self.total,
            "far": self.far, "near": self.near,
            "gamma": fraction_str(self.gamma) if self.gamma is not None else None,
        }


def _integer_lattice(A: GridSet, d1: Fraction, d2: Fraction, window: Fraction):
    """Integers ``D1, D2, W`` with ``|d2 t - d1 u| <= w`` iff ``|D2 t - D1 u| <= W`` (t, u in grid steps)."""
    w = window / A.delta
    den = 1
    for x in (d1, d2, w):
        den = _lcm(den, x.denominator)
    return int(d1 * den), int(d2 * den), int(w * den)


def _pair_count_sorted(V: list[int], W: int) -> int:
    """Ordered pairs ``(i, j)`` with ``|V[i] - V[j]| <= W`` in a sorted list."""
    lo = hi = 0
    n = len(V)
    count = 0
    for v in V:
        while V[lo] < v - W:
            lo += 1
        while hi < n and V[hi] <= v + W:
            hi += 1
        count += hi - lo
    return count


def difference_representation(A: GridSet) -> tuple[np.ndarray, np.ndarray]:
    """Sorted differences ``t = a - a'`` (grid steps) and their multiplicities."""
    k = A.array.astype(np.int64)
    return np.unique(np.subtract.outer(k, k).ravel(), return_counts=True)


def _window_mass(D: np.ndarray, r: np.ndarray, lo, hi) -> np.ndarray:
    """For each pair of bounds, total multiplicity of ``t in D`` with ``lo <= t <= hi``."""
    prefix = np.concatenate(([0], np.cumsum(r)))
    i = np.searchsorted(D, lo, side="left")
    j = np.searchsorted(D, hi, side="right")
    return np.where(j > i, prefix[j] - prefix[i], 0)


def quadruple_count(A: GridSet, d1: RationalLike, d2: RationalLike,
                    window: Optional[RationalLike] = None,
                    gamma: Optional[RationalLike] = None) -> QuadrupleCount:
    """Quadruples with ``|d2(a1 - a2) + d1(a4 - a3)| <= window`` (default ``δ``).

    The total comes from a sorted sweep over ``V = {d2 a + d1 a'}``.  The same
    total is recounted through difference multiplicities, which also yields
    the split by ``|a3 - a4|``; the two counts must agree.
    """
    d1, d2 = to_fraction(d1), to_fraction(d2)
    _require_d2(d2)
    if len(A) == 0:
        raise EmptySetError("quadruple count of an empty set")
    window = A.delta if window is None else to_fraction(window)
    if window < 0:
        raise ValueError("window must be non-negative")
    D1, D2, W = _integer_lattice(A, d1, d2, window)
    ks = A.indices
    V = sorted(D2 * a + D1 * b for a in ks for b in ks)
    total = _pair_count_sorted(V, W)

    if D2 < 0:
        D1, D2 = -D1, -D2
    D, r = difference_representation(A)
    big = (abs(D1) * int(np.abs(D).max()) + W) >= _SAFE
    Du = D.astype(object) if big else D
    lo = -((-(D1 * Du - W)) // D2)
    hi = (D1 * Du + W) // D2
    if big:
        per_u = np.array([int(x) for x in _window_mass(D.astype(object), r, lo, hi)], dtype=np.int64)
    else:
        per_u = _window_mass(D, r, lo, hi)
    weighted = r * per_u
    if int(weighted.sum()) != total:
        raise TheoremViolation("quadruple sweep and difference recount disagree")
    if total < len(A) ** 2:
        raise TheoremViolation("quadruple count below the diagonal count")
    far = near = None
    if gamma is not None:
        gamma = to_fraction(gamma)
        T = admissibility_threshold(A.L, gamma)
        far = int(weighted[np.abs(D) > T].sum())
        near = total - far
    return QuadrupleCount(d1, d2, window, total, far, near, gamma)


def energy_lower_bound(A: GridSet, d1: RationalLike, d2: RationalLike,
                       window: Optional[RationalLike] = None) -> tuple[int, Fraction]:
    """``(E_δ(d1 A + d2 A), #A**4 / #Q)`` with ``lhs >= rhs/4`` asserted."""
    d1, d2 = to_fraction(d1), to_fraction(d2)
    _require_d2(d2)
    Q = quadruple_count(A, d1, d2, window)
    lhs = len(linear_combination_cover([(d1, A), (d2, A)], A.scale))
    rhs = Fraction(len(A) ** 4, Q.total)
    if 4 * lhs < rhs:
        raise TheoremViolation(f"energy bound failed: {lhs} < ({rhs})/4")
    return lhs, rhs


# ---------------------------------------------------------------------------
# dense case

@dataclass(frozen=True)
class DenseSelection:
    b1: int
    b2: int
    b3: int
    b4: int
    quotient: Fraction
    popularity: int         # admissible quadruples with quotient within s of the selection
    admissible: int         # all admissible quadruples
    mean: Monomial          # admissible · δ**(1-2γ)
    s: Fraction

    def to_json(self) -> dict:
        return {
            "b": [self.b1, self.b2, self.b3, self.b4],
            "quotient": fraction_str(self.quotient),
            "popularity": self.popularity,
            "admissible": self.admissible,
            "mean": float(self.mean),
            "s": fraction_str(self.s),
        }


def _neighbour_count(A1: GridSet, B: QuotientSet, p: int, q: int) -> int:
    """Admissible quadruples whose quotient lies strictly within ``s`` of ``p/q``."""
    D, r = difference_representation(A1)
    T = admissibility_threshold(A1.L, B.gamma)
    adm = np.abs(D) > T
    u, ru = D[adm].astype(object), r[adm]
    scale = 1 << B.m
    au = np.abs(u)
    # t/u within s of p/q  <=>  |t q 2^m - p u 2^m| < |u| q
    lo_num = p * u * scale - au * q
    hi_num = p * u * scale + au * q
    den = q * scale
    lo = lo_num // den + 1
    hi = -((-hi_num) // den) - 1
    mass = _window_mass(D.astype(object), r, lo, hi)
    return int(sum(int(a) * int(b) for a, b in zip(ru, mass)))


def dense_case_select(A1: GridSet, gamma: RationalLike, B: Optional[QuotientSet] = None) -> DenseSelection:
    """Least crowded quotient in ``[-1, 1]``, chosen from the weighted cell mask."""
    gamma = to_fraction(gamma)
    B = build_quotient_set(A1, gamma) if B is None else B
    w = B.weights
    if w is None:
        raise PreconditionError("quotient set carries no quadruple weights")
    padded = np.concatenate(([0], w, [0]))
    window = padded[:-2] + padded[1:-1] + padded[2:]
    top = 1 << B.m
    lo_c = max(-top - B.cell_lo, 0)
    hi_c = min(top - B.cell_lo, len(w) - 1)
    cand = np.flatnonzero(B.mask[lo_c:hi_c + 1]) + lo_c
    best = int(cand[np.argmin(window[cand])])
    c = best + B.cell_lo
    i = best
    p, q = int(B.min_num[i]), int(B.min_den[i])
    if c < 0:
        p, q = int(B.max_num[i]), int(B.max_den[i])
    g = B.generators(p, q)
    D, r = difference_representation(A1)
    T = admissibility_threshold(A1.L, gamma)
    admissible = int(r[np.abs(D) > T].sum()) * len(A1) ** 2
    mean = Monomial(admissible) * pow2(-A1.L * (1 - 2 * gamma))
    return DenseSelection(*g, Fraction(p, q), _neighbour_count(A1, B, p, q), admissible, mean, B.s)


# ---------------------------------------------------------------------------
# gap case

@dataclass(frozen=True)
class GapVectors:
    d1: Fraction
    d2: Fraction
    e1: Fraction
    e2: Fraction
    case: str
    k: int

    def to_json(self) -> dict:
        return {"d1": fraction_str(self.d1), "d2": fraction_str(self.d2),
                "e1": fraction_str(self.e1), "e2": fraction_str(self.e2),
                "case": self.case, "k": self.k}


def gap_case_vectors(classification: Classification, delta: RationalLike = 1) -> GapVectors:
    """``(e1, e2)`` with ``e1/e2`` equal to the isolated point; ``d`` values scaled by ``delta``."""
    if not classification.is_gap:
        raise PreconditionError("gap vectors need a gap certificate")
    g = classification.gap
    delta = to_fraction(delta)
    d1, d2 = g.numerator * delta, g.denominator * delta
    if g.case == "A.1":
        e1, e2, k = d1, 2 * d2, 2
    else:
        e1, e2, k = d1 + d2, 2 * d2, 3
    if Fraction(e1) / e2 != g.target:
        raise TheoremViolation("gap vectors do not reproduce the isolated point")
    return GapVectors(d1, d2, e1, e2, g.case, k)


# ---------------------------------------------------------------------------
# upper-bound measurements

@dataclass(frozen=True)
class UpperBoundMeasurement:
    cover_pair: int                 # E_δ(d1 A' + d2 A')
    cover_iterated: int             # E_δ(d1 A2 + k-fold d2 A2)
    comparison: Monomial            # max(|d1|, |d2|)**σ · #A'
    a1_size: int
    a2_size: int
    k: int

    @property
    def ratio_pair(self) -> float:
        return self.cover_pair / float(self.comparison)

    @property
    def ratio_iterated(self) -> float:
        return self.cover_iterated / float(self.comparison)

    def to_json(self) -> dict:
        return {
            "cover_pair": self.cover_pair, "cover_iterated": self.cover_iterated,
            "comparison": float(self.comparison),
            "ratio_pair": self.ratio_pair, "ratio_iterated": self.ratio_iterated,
            "a1_size": self.a1_size, "a2_size": self.a2_size, "k": self.k,
        }


def _two_round_refinement(A1: GridSet, k: int, seed: int = 0) -> GridSet:
    """Two half-size refinement rounds, so the result keeps ``>= #A1/4`` points."""
    def measured(X, Ys):
        e = covering_number(X, X.scale)
        return [Fraction(covering_number(sumset(X, Y), X.scale), e) for Y in Ys]

    Ys = [A1] * max(k - 1, 1)
    first = discretized_plunnecke(A1, Ys, measured(A1, Ys), A1.scale, seed=seed).subset
    Ys = [first, A1]
    second = discretized_plunnecke(first, Ys, measured(first, Ys), A1.scale, seed=seed).subset
    if 4 * len(second) < len(A1):
        raise TheoremViolation("refinement lost more than three quarters of the set")
    return second


def lemma_upper_bounds(Aprime: GridSet, A1: GridSet, d1: RationalLike, d2: RationalLike,
                       k: int, sigma: RationalLike, *, seed: int = 0) -> UpperBoundMeasurement:
    d1, d2, sigma = to_fraction(d1), to_fraction(d2), to_fraction(sigma)
    if d2 == 0:
        raise ValueError("degenerate coefficients: d2 = 0")
    if k < 2:
        raise ValueError("k must be at least 2")
    pair = len(linear_combination_cover([(d1, Aprime), (d2, Aprime)], Aprime.scale))
    A2 = _two_round_refinement(A1, k, seed) if len(A1) > 1 else A1
    iterated = len(linear_combination_cover([(d1, A2)] + [(d2, A2)] * k, A1.scale))
    comparison = Monomial.power(max(abs(d1), abs(d2)), sigma) * len(Aprime)
    return UpperBoundMeasurement(pair, iterated, comparison, len(A1), len(A2), k)


# ---------------------------------------------------------------------------
# exponents

@dataclass(frozen=True)
class TheoreticalConstants:
    sigma: Fraction
    gamma: Fraction
    c_max: Fraction
    gamma_star: Fraction
    dense_far: Fraction        # (2γ + σ - 1)/12
    dense_near: Fraction       # -γσ/12
    gap: Fraction              # -γσ/14
    guaranteed: Fraction       # min over the three magnitudes
    measure_exponent: Fraction     # δ**-c |A| = |A|**(this) when |A| = δ**(1-σ)
    cardinality_exponent: Fraction  # δ**-c #A = (#A)**(this) when #A = δ**-σ

    def to_json(self) -> dict:
        return {k: fraction_str(v) for k, v in self.__dict__.items()}


def theoretical_constants(sigma: RationalLike, gamma: Optional[RationalLike] = None) -> TheoreticalConstants:
    sigma = to_fraction(sigma)
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    c_max = sigma * (1 - sigma) / (4 * (7 + 3 * sigma))
    gamma_star = 7 * (1 - sigma) / (2 * (7 + 3 * sigma))
    gamma = gamma_star if gamma is None else to_fraction(gamma)
    if not 0 < gamma < Fraction(1, 2):
        raise ValueError(f"gamma must lie in (0, 1/2), got {gamma}")
    dense_far = (2 * gamma + sigma - 1) / 12
    dense_near = -gamma * sigma / 12
    gap = -gamma * sigma / 14
    guaranteed = min(abs(dense_far), abs(dense_near), abs(gap))
    return TheoreticalConstants(
        sigma, gamma, c_max, gamma_star, dense_far, dense_near, gap, guaranteed,
        1 - c_max / (1 - sigma), 1 + c_max / sigma,
    )


# ---------------------------------------------------------------------------
# report rows

CSV_COLUMNS = (
    "family", "L", "sigma_target", "n", "c_observed_concentration", "cover_sum",
    "cover_prod", "K", "verdict", "gap_b", "e1", "e2", "q_total", "q_far", "q_near", "c_theory",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return fraction_str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExpansionReport:
    family: str
    L: int
    sigma_target: Fraction
    n: int
    c_observed: Optional[float]
    cover_sum: int
    cover_prod: int
    verdict: Optional[str] = None
    gap_b: Optional[Fraction] = None
    e1: Optional[Fraction] = None
    e2: Optional[Fraction] = None
    q_total: Optional[int] = None
    q_far: Optional[int] = None
    q_near: Optional[int] = None
    c_theory: Optional[Fraction] = None
    error: Optional[str] = None
    details: dict = field(default_factory=dict)

    @property
    def K(self) -> Optional[Fraction]:
        if self.n == 0:
            return None
        return Fraction(self.cover_sum + self.cover_prod, self.n)

    def csv_row(self) -> list[str]:
        values = (self.family, self.L, self.sigma_target, self.n, self.c_observed,
                  self.cover_sum, self.cover_prod, float(self.K) if self.n else None, self.verdict if not self.error else "failed",
                  self.gap_b, self.e1, self.e2, self.q_total, self.q_far, self.q_near, self.c_theory)
        return [_cell(v) for v in values]

    def to_json(self) -> dict:
        out = dict(zip(CSV_COLUMNS, self.csv_row()))
        out["K_exact"] = fraction_str(self.K) if self.n else None
        out["error"] = self.error
        out["details"] = self.details
        return out
