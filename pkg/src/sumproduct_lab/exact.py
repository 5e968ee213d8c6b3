"""Exact arithmetic for quantities of the form ``c * b1**e1 * b2**e2 ...``.

Covering thresholds such as ``delta**gamma`` or ``|I|**sigma`` are irrational
for most rational exponents.  They are kept symbolic as :class:`Monomial` and
compared by raising both sides to the least common denominator of all
exponents, which turns every comparison into one between rationals.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from numbers import Rational
from typing import Iterable, Union

RationalLike = Union[int, Fraction, str]


def to_fraction(value: RationalLike) -> Fraction:
    """Parse ints, Fractions and strings such as ``"7/34"`` or ``"0.25"``."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as an exact rational (floats are not accepted)")


def fraction_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def floor_fraction(x: Fraction) -> int:
    return x.numerator // x.denominator


def round_half_up(x: Fraction) -> int:
    """Nearest integer, ties resolved towards +infinity."""
    return floor_fraction(x + Fraction(1, 2))


def _lcm(values: Iterable[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


class Monomial:
    """Positive-base power product ``coeff * prod(base ** exp)`` with exact order."""

    __slots__ = ("coeff", "factors")

    def __init__(self, coeff: RationalLike = 1, factors: Iterable[tuple] = ()):
        coeff = to_fraction(coeff)
        merged: dict[Fraction, Fraction] = {}
        for base, exp in factors:
            base, exp = to_fraction(base), to_fraction(exp)
            if base <= 0:
                raise ValueError("monomial bases must be positive")
            if base == 1 or exp == 0:
                continue
            merged[base] = merged.get(base, Fraction(0)) + exp
        kept = []
        for base, exp in sorted(merged.items()):
            if exp == 0:
                continue
            if exp.denominator == 1:
                coeff *= base ** exp.numerator
            else:
                whole = floor_fraction(exp)
                if whole:
                    coeff *= base ** whole
                kept.append((base, exp - whole))
        self.coeff = coeff
        self.factors = tuple(kept)

    @classmethod
    def power(cls, base: RationalLike, exp: RationalLike) -> "Monomial":
        return cls(1, ((base, exp),))

    @classmethod
    def lift(cls, value) -> "Monomial":
        if isinstance(value, Monomial):
            return value
        return cls(value)

    def is_rational(self) -> bool:
        return not self.factors

    def __mul__(self, other) -> "Monomial":
        other = Monomial.lift(other)
        return Monomial(self.coeff * other.coeff, self.factors + other.factors)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Monomial":
        other = Monomial.lift(other)
        if other.coeff == 0:
            raise ZeroDivisionError("division by a zero monomial")
        inv = tuple((b, -e) for b, e in other.factors)
        return Monomial(self.coeff / other.coeff, self.factors + inv)

    def __rtruediv__(self, other) -> "Monomial":
        return Monomial.lift(other) / self

    def __pow__(self, exp: RationalLike) -> "Monomial":
        exp = to_fraction(exp)
        if self.coeff <= 0 and exp.denominator != 1:
            raise ValueError("fractional power of a non-positive monomial")
        if exp.denominator == 1:
            coeff_part = Monomial(self.coeff ** exp.numerator)
        else:
            coeff_part = Monomial(1, ((self.coeff, exp),))
        return coeff_part * Monomial(1, tuple((b, e * exp) for b, e in self.factors))

    def _sign(self) -> int:
        return (self.coeff > 0) - (self.coeff < 0)

    def _cmp(self, other) -> int:
        other = Monomial.lift(other)
        sa, sb = self._sign(), other._sign()
        if sa != sb or sa == 0:
            return (sa > sb) - (sa < sb)
        if sa < 0:
            return -((-1 * self)._cmp(-1 * other))
        ratio = self / other
        if not ratio.factors:
            r = ratio.coeff
        else:
            d = _lcm(e.denominator for _, e in ratio.factors)
            r = ratio.coeff ** d
            for base, exp in ratio.factors:
                r *= base ** int(exp * d)
        return (r > 1) - (r < 1)

    def __eq__(self, other):
        try:
            return self._cmp(other) == 0
        except TypeError:
            return NotImplemented

    # Equal values may carry different factorizations (4^(1/2) vs 2).
    __hash__ = None

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __float__(self) -> float:
        log2 = math.log2(abs(self.coeff)) if self.coeff else -math.inf
        for base, exp in self.factors:
            log2 += float(exp) * math.log2(base)
        if log2 == -math.inf:
            return 0.0
        return math.copysign(2.0 ** log2, self._sign())

    def floor(self) -> int:
        guess = math.floor(float(self))
        while Monomial(guess) > self:
            guess -= 1
        while Monomial(guess + 1) <= self:
            guess += 1
        return guess

    def ceil(self) -> int:
        f = self.floor()
        return f if Monomial(f) == self else f + 1

    def round_half_up(self) -> int:
        f = self.floor()
        return f + 1 if self >= Monomial(Fraction(2 * f + 1, 2)) else f

    def __add__(self, other):
        other = Monomial.lift(other)
        if self.factors or other.factors:
            raise TypeError("only rational monomials can be added")
        return Monomial(self.coeff + other.coeff)

    def __repr__(self):
        return f"Monomial({self})"

    def __str__(self):
        parts = [fraction_str(self.coeff)] if self.coeff != 1 or not self.factors else []
        for base, exp in self.factors:
            parts.append(f"{fraction_str(base)}^({fraction_str(exp)})")
        return "*".join(parts)

    def to_json(self):
        return {
            "coeff": fraction_str(self.coeff),
            "factors": [[fraction_str(b), fraction_str(e)] for b, e in self.factors],
            "approx": float(self),
        }


def pow2(exp: RationalLike) -> Monomial:
    return Monomial.power(2, exp)
