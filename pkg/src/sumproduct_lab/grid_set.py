"""Exact delta-discretized sets on dyadic grids.

A :class:`GridSet` at scale ``L`` stores integer indices ``k``; index ``k``
stands for the point ``k * 2**-L``.  Integrality makes every set automatically
``2**-L``-separated, and sums of grid points stay on the grid, so sumsets are
exact.  Products and dilates leave the grid and are snapped back explicitly.

Covering numbers use aligned-cell counts: at scale ``t = 2**-L'`` the cell of
``k`` is ``floor(k / 2**(L - L'))``.  The cells form a valid cover, and any
length-``t`` interval meets at most two cells, so the count ``c`` and the true
covering number ``E_t`` satisfy ``E_t <= c <= 2 E_t``.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySetError, LabError, OutOfAmbientError, ScaleMismatch
from .exact import Monomial, RationalLike, floor_fraction, round_half_up, to_fraction

_INT64_SAFE = 1 << 62


@dataclass(frozen=True, order=True)
class Scale:
    """Dyadic scale ``2**-log_inv``; a smaller ``log_inv`` is coarser."""

    log_inv: int

    def __post_init__(self):
        if not isinstance(self.log_inv, (int, np.integer)) or self.log_inv < 0:
            raise ValueError(f"scale exponent must be a non-negative integer, got {self.log_inv!r}")
        object.__setattr__(self, "log_inv", int(self.log_inv))

    @property
    def delta(self) -> Fraction:
        return Fraction(1, 1 << self.log_inv)

    @property
    def steps(self) -> int:
        return 1 << self.log_inv

    def __str__(self):
        return f"2^-{self.log_inv}"


def _as_scale(s) -> Scale:
    return s if isinstance(s, Scale) else Scale(int(s))


@dataclass(frozen=True)
class GridSet:
    scale: Scale
    ambient_lo: int
    ambient_hi: int
    indices: tuple = field(repr=False)

    def __post_init__(self):
        idx = tuple(int(k) for k in self.indices)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scale", _as_scale(self.scale))
        if self.ambient_lo > self.ambient_hi:
            raise ValueError("ambient interval is reversed")
        for a, b in zip(idx, idx[1:]):
            if a >= b:
                raise ValueError("grid indices must be strictly increasing")
        if idx and (idx[0] < self.ambient_lo or idx[-1] > self.ambient_hi):
            bad = idx[0] if idx[0] < self.ambient_lo else idx[-1]
            raise OutOfAmbientError(bad, self.ambient_lo, self.ambient_hi)

    @classmethod
    def from_indices(cls, indices: Iterable[int], L: int, ambient: tuple[int, int] | None = None) -> "GridSet":
        """Build from unsorted indices; the default ambient is ``[1, 2]``."""
        idx = sorted(set(int(k) for k in indices))
        if ambient is None:
            ambient = (1 << L, 2 << L)
        return cls(Scale(L), ambient[0], ambient[1], tuple(idx))

    @property
    def L(self) -> int:
        return self.scale.log_inv

    @property
    def delta(self) -> Fraction:
        return self.scale.delta

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k):
        i = bisect_left(self.indices, k)
        return i < len(self.indices) and self.indices[i] == k

    def __repr__(self):
        head = ", ".join(map(str, self.indices[:6]))
        more = ", ..." if len(self.indices) > 6 else ""
        return (f"GridSet(L={self.L}, ambient=[{self.ambient_lo}, {self.ambient_hi}], "
                f"n={len(self)}, indices=[{head}{more}])")

    @cached_property
    def array(self) -> np.ndarray:
        return _int_array(self.indices)

    def points(self) -> list[Fraction]:
        d = 1 << self.L
        return [Fraction(k, d) for k in self.indices]

    def point(self, k: int) -> Fraction:
        return Fraction(k, 1 << self.L)

    def subset(self, indices: Iterable[int]) -> "GridSet":
        keep = sorted(set(int(k) for k in indices))
        for k in keep:
            if k not in self:
                raise ValueError(f"index {k} is not an element of the set")
        return GridSet(self.scale, self.ambient_lo, self.ambient_hi, tuple(keep))

    def with_ambient(self, lo: int, hi: int) -> "GridSet":
        return GridSet(self.scale, lo, hi, self.indices)

    def count_in(self, lo: int, hi: int) -> int:
        """Number of indices in the closed range ``[lo, hi]``."""
        return bisect_right(self.indices, hi) - bisect_left(self.indices, lo)


def _int_array(values) -> np.ndarray:
    values = list(values)
    if values and max(abs(min(values)), abs(max(values))) >= _INT64_SAFE:
        return np.array(values, dtype=object)
    return np.array(values, dtype=np.int64)


def _require_nonempty(X: GridSet):
    if len(X) == 0:
        raise EmptySetError("operation needs a non-empty set")


def _require_same_scale(X: GridSet, Y: GridSet):
    if X.scale != Y.scale:
        raise ScaleMismatch(f"scales differ: {X.scale} vs {Y.scale}")


# ---------------------------------------------------------------------------
# construction

def discretize(points: Iterable[RationalLike], scale, ambient: tuple = (1, 2)) -> GridSet:
    """Snap exact rationals to the grid by round-half-up; duplicates collapse."""
    scale = _as_scale(scale)
    lo, hi = (to_fraction(a) for a in ambient)
    n = scale.steps
    idx = set()
    for p in points:
        x = to_fraction(p)
        if not lo <= x <= hi:
            raise OutOfAmbientError(x, lo, hi)
        idx.add(round_half_up(x * n))
    return GridSet(scale, round_half_up(lo * n), round_half_up(hi * n), tuple(sorted(idx)))


# ---------------------------------------------------------------------------
# covering numbers

def _shift(X: GridSet, t_scale: Scale) -> int:
    t_scale = _as_scale(t_scale)
    if t_scale.log_inv > X.L:
        raise ScaleMismatch(f"covering scale {t_scale} is finer than the set's scale {X.scale}")
    return X.L - t_scale.log_inv


def cells(X: GridSet, t_scale) -> np.ndarray:
    """Sorted distinct cell indices of ``X`` at scale ``t``."""
    sh = _shift(X, t_scale)
    if len(X) == 0:
        return np.array([], dtype=np.int64)
    return np.unique(X.array >> sh) if X.array.dtype != object else np.array(
        sorted({k >> sh for k in X.indices}), dtype=object)


def covering_number(X: GridSet, t_scale) -> int:
    _require_nonempty(X)
    t_scale = _as_scale(t_scale)
    sh = _shift(X, t_scale)
    if (X.ambient_hi - X.ambient_lo) <= (1 << sh):
        return 1
    return len(cells(X, t_scale))


def greedy_cover_count(X: GridSet, t_scale) -> int:
    """Exact minimal number of closed length-``t`` intervals covering ``X``.

    Left-to-right greedy is optimal on the line.
    """
    _require_nonempty(X)
    w = 1 << _shift(X, t_scale)
    count, reach = 0, None
    for k in X.indices:
        if reach is None or k > reach:
            count += 1
            reach = k + w
    return count


def common_cells(X: GridSet, Y: GridSet, t_scale) -> int:
    _require_same_scale(X, Y)
    if len(X) == 0 or len(Y) == 0:
        return 0
    return len(np.intersect1d(cells(X, t_scale), cells(Y, t_scale), assume_unique=True))


# ---------------------------------------------------------------------------
# bitset kernel for exact integer sumsets

def _to_mask(values: Sequence[int], offset: int) -> int:
    mask = 0
    for v in values:
        mask |= 1 << (v - offset)
    return mask


def _from_mask(mask: int, offset: int) -> list[int]:
    if mask == 0:
        return []
    nbytes = (mask.bit_length() + 7) // 8
    bits = np.unpackbits(np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8), bitorder="little")
    return [int(i) + offset for i in np.flatnonzero(bits)]


def integer_sumset(xs: Sequence[int], ys: Sequence[int]) -> list[int]:
    """Sorted ``{x + y}`` by shift-or convolution of bitmasks."""
    if not xs or not ys:
        return []
    if len(xs) > len(ys):
        xs, ys = ys, xs
    base = ys[0]
    ymask = _to_mask(ys, base)
    acc = 0
    x0 = xs[0]
    for x in xs:
        acc |= ymask << (x - x0)
    return _from_mask(acc, base + x0)


def sumset(X: GridSet, Y: GridSet) -> GridSet:
    _require_same_scale(X, Y)
    return GridSet(X.scale, X.ambient_lo + Y.ambient_lo, X.ambient_hi + Y.ambient_hi,
                   tuple(integer_sumset(list(X.indices), list(Y.indices))))


def negate(X: GridSet) -> GridSet:
    return GridSet(X.scale, -X.ambient_hi, -X.ambient_lo, tuple(-k for k in reversed(X.indices)))


def difference_set(X: GridSet, Y: GridSet) -> GridSet:
    return sumset(X, negate(Y))


def iterated_sumset(X: GridSet, k: int) -> GridSet:
    if k < 1:
        raise ValueError("k-fold sums need k >= 1")
    out = X
    for _ in range(k - 1):
        out = sumset(out, X)
    return out


# ---------------------------------------------------------------------------
# products, dilates, general linear combinations

def product_cover(X: GridSet, Y: GridSet, out_scale) -> GridSet:
    """Cells at ``out_scale`` hit by the exact products ``x * y``."""
    _require_same_scale(X, Y)
    out_scale = _as_scale(out_scale)
    if out_scale.log_inv > 2 * X.L:
        raise ScaleMismatch("product output scale finer than 2L is not exact")
    sh = 2 * X.L - out_scale.log_inv
    corners = [a * b for a in (X.ambient_lo, X.ambient_hi) for b in (Y.ambient_lo, Y.ambient_hi)]
    if len(X) == 0 or len(Y) == 0:
        vals: list[int] = []
    else:
        xa, ya = X.array, Y.array
        if xa.dtype != object and ya.dtype != object and \
                max(abs(int(xa[0])), abs(int(xa[-1]))) * max(abs(int(ya[0])), abs(int(ya[-1]))) < _INT64_SAFE:
            vals = np.unique(np.multiply.outer(xa, ya).ravel() >> sh).tolist()
        else:
            vals = sorted({(a * b) >> sh for a in X.indices for b in Y.indices})
    return GridSet(out_scale, min(corners) >> sh, max(corners) >> sh, tuple(vals))


def affine_image(X: GridSet, lam: RationalLike, shift: RationalLike, out_scale) -> GridSet:
    """``{lam * x + shift}`` computed exactly, then snapped by round-half-up."""
    lam, shift = to_fraction(lam), to_fraction(shift)
    if lam == 0:
        raise ValueError("degenerate dilate: lambda = 0")
    out_scale = _as_scale(out_scale)
    n_out, n_in = out_scale.steps, 1 << X.L

    def snap(k):
        return round_half_up((lam * Fraction(k, n_in) + shift) * n_out)

    ends = sorted((snap(X.ambient_lo), snap(X.ambient_hi)))
    return GridSet(out_scale, ends[0], ends[1], tuple(sorted({snap(k) for k in X.indices})))


def linear_combination_cover(terms: Sequence[tuple], out_scale) -> GridSet:
    """Cells at ``out_scale`` of the exact set ``sum_i c_i X_i``.

    ``terms`` is a sequence of ``(coefficient, GridSet)``; repeated entries give
    k-fold sums.  All arithmetic is integer after clearing denominators, and
    flooring happens once, after the full sum is formed.
    """
    if not terms:
        raise ValueError("empty linear combination")
    out_scale = _as_scale(out_scale)
    coeffs = [to_fraction(c) for c, _ in terms]
    denom = 1
    for c, (_, X) in zip(coeffs, terms):
        _require_nonempty(X)
        d = c.denominator << X.L
        denom = denom * d // math.gcd(denom, d)
    acc = np.zeros(1, dtype=np.int64)
    lo = hi = 0
    for c, (_, X) in zip(coeffs, terms):
        mult = c.numerator * (denom // (c.denominator << X.L))
        vals = [k * mult for k in X.indices]
        ends = (X.ambient_lo * mult, X.ambient_hi * mult)
        lo, hi = lo + min(ends), hi + max(ends)
        acc = _unique_outer_sum(acc, vals, max(abs(lo), abs(hi)))
    scale_num = out_scale.steps

    def cell(v):
        return floor_fraction(Fraction(v * scale_num, denom))

    if acc.dtype != object and max(abs(lo), abs(hi)) * scale_num < _INT64_SAFE and denom < _INT64_SAFE:
        out = np.unique((acc * scale_num) // denom).tolist()
    else:
        out = sorted({cell(int(v)) for v in acc})
    return GridSet(out_scale, cell(lo), cell(hi), tuple(out))


def _unique_outer_sum(acc: np.ndarray, vals: list[int], bound: int) -> np.ndarray:
    if bound < _INT64_SAFE and acc.dtype != object:
        return np.unique(np.add.outer(acc, np.array(vals, dtype=np.int64)).ravel())
    return np.array(sorted({int(a) + v for a in acc for v in vals}), dtype=object)


# ---------------------------------------------------------------------------
# non-concentration

@dataclass(frozen=True)
class ConcentrationProfile:
    """Largest observed ``#(X cap I) / (|I|**sigma * #X)`` over scanned intervals.

    ``witness`` is the closed grid-index interval ``[lo, hi]`` attaining it.
    """

    sigma: Fraction
    c_observed: Monomial
    witness: tuple[int, int]
    count: int
    n: int
    L: int

    def reevaluate(self, X: GridSet) -> Monomial:
        return concentration_ratio(X, self.witness[0], self.witness[1], self.sigma)

    def to_json(self) -> dict:
        return {
            "sigma": str(self.sigma),
            "c_observed": self.c_observed.to_json(),
            "witness": list(self.witness),
            "count": self.count,
        }


def concentration_ratio(X: GridSet, lo: int, hi: int, sigma: RationalLike) -> Monomial:
    """``#(X cap [lo, hi]) / (|I|**sigma * #X)`` for a closed grid interval."""
    _require_nonempty(X)
    if hi <= lo:
        raise ValueError("interval must have positive length")
    sigma = to_fraction(sigma)
    length = Fraction(hi - lo, 1 << X.L)
    return Monomial(Fraction(X.count_in(lo, hi), len(X))) / Monomial.power(length, sigma)


def non_concentration_constant(X: GridSet, sigma: RationalLike) -> ConcentrationProfile:
    """Scan aligned and half-shifted closed dyadic intervals of every length.

    Every closed interval of length ``2**-l`` lies inside one scanned interval
    of length ``2**-(l-1)``, so the reported value is within ``2**sigma`` of
    the supremum over dyadic lengths.
    """
    _require_nonempty(X)
    sigma = to_fraction(sigma)
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    arr = X.array
    n = len(X)
    # candidate per level: (count, lo, hi); compared across levels exactly
    best_value = concentration_ratio(X, X.ambient_lo, X.ambient_hi, sigma) \
        if X.ambient_hi > X.ambient_lo else None
    best = (X.count_in(X.ambient_lo, X.ambient_hi), X.ambient_lo, X.ambient_hi)
    for l in range(0, X.L + 1):
        w = 1 << (X.L - l)
        starts = [np.unique((arr // w) * w)]
        if w >= 2:
            h = w // 2
            starts.append(np.unique(((arr - h) // w) * w + h))
        level_best = None
        for st in starts:
            counts = np.searchsorted(arr, st + w, side="right") - np.searchsorted(arr, st, side="left")
            i = int(np.argmax(counts))
            cand = (int(counts[i]), int(st[i]), int(st[i]) + w)
            if level_best is None or cand[0] > level_best[0] or (cand[0] == level_best[0] and cand[1] < level_best[1]):
                level_best = cand
        value = Monomial(Fraction(level_best[0], n)) * Monomial.power(2, Fraction(l) * sigma)
        if best_value is None or value > best_value:
            best_value, best = value, level_best
    return ConcentrationProfile(sigma, best_value, (best[1], best[2]), best[0], n, X.L)


# ---------------------------------------------------------------------------
# text serialization: header "L ambient_lo ambient_hi n", then n indices

def dumps(X: GridSet) -> str:
    lines = [f"{X.L} {X.ambient_lo} {X.ambient_hi} {len(X)}"]
    lines.extend(str(k) for k in X.indices)
    return "\n".join(lines) + "\n"


def loads(text: str) -> GridSet:
    rows = [r.strip() for r in text.strip().splitlines() if r.strip()]
    if not rows:
        raise LabError("empty grid-set file")
    head = rows[0].split()
    if len(head) != 4:
        raise LabError(f"malformed header {rows[0]!r}; expected 'L ambient_lo ambient_hi n'")
    L, lo, hi, n = (int(h) for h in head)
    body = [int(r) for r in rows[1:]]
    if len(body) != n:
        raise LabError(f"header announces {n} indices, file holds {len(body)}")
    return GridSet(Scale(L), lo, hi, tuple(body))


def write(X: GridSet, path) -> None:
    Path(path).write_text(dumps(X), encoding="ascii")


def read(path) -> GridSet:
    return loads(Path(path).read_text(encoding="ascii"))
