"""Uniform 2^j-adic tree extraction.

The ambient interval (length ``2**(j*m)`` grid steps) is cut into ``2**j``-adic
intervals, giving a tree with levels ``0..m``.  Going up from the leaves, every
occupied interval is bucketed by the dyadic class of its number of surviving
children, and only the class carrying the most children survives.  The points
whose every ancestor survived form the regularized subset.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptySetError, PreconditionError, TheoremViolation
from .exact import RationalLike, to_fraction
from .grid_set import GridSet, Scale, covering_number, sumset


@dataclass(frozen=True)
class TreeParams:
    j: int
    m: int

    def __post_init__(self):
        if self.j < 1 or self.m < 1:
            raise ValueError("j and m must be positive")

    @property
    def L(self) -> int:
        return self.j * self.m


@dataclass(frozen=True)
class UniformTreeCertificate:
    j: int
    m: int
    k_per_level: tuple          # k_l for l = 0..m-1
    survivors_per_level: tuple  # #Z_l for l = 0..m
    initial_size: int
    final_size: int

    @property
    def size_bound_met(self) -> bool:
        """``#X~ >= (2j)**-m · #X``, checked in integers."""
        return self.final_size * (2 * self.j) ** self.m >= self.initial_size

    def to_json(self) -> dict:
        return {
            "j": self.j, "m": self.m,
            "k_per_level": list(self.k_per_level),
            "survivors_per_level": list(self.survivors_per_level),
            "initial_size": self.initial_size,
            "final_size": self.final_size,
            "size_bound_met": self.size_bound_met,
        }


def _leaf_offsets(X: GridSet, params: TreeParams) -> list[int]:
    width = 1 << params.L
    if X.ambient_hi - X.ambient_lo != width:
        raise PreconditionError(
            f"ambient length {X.ambient_hi - X.ambient_lo} grid steps is not 2^(jm) = {width}")
    # the right endpoint belongs to the last interval
    return [min(k - X.ambient_lo, width - 1) for k in X.indices]


def _child_counts(nodes, j: int) -> dict[int, int]:
    counts: dict[int, int] = defaultdict(int)
    for node in nodes:
        counts[node >> j] += 1
    return counts


def uniformize(X: GridSet, params: TreeParams) -> tuple[GridSet, UniformTreeCertificate]:
    if len(X) == 0:
        raise EmptySetError("cannot regularize an empty set")
    j, m = params.j, params.m
    if X.L % j:
        raise PreconditionError(f"scale exponent L = {X.L} is not divisible by j = {j}")
    if X.L != params.L:
        raise PreconditionError(f"tree parameters give L = {params.L}, set has L = {X.L}")
    leaves = _leaf_offsets(X, params)

    Z = [set() for _ in range(m + 1)]
    Z[m] = set(leaves)
    ks = [0] * m
    for l in range(m - 1, -1, -1):
        counts = _child_counts(Z[l + 1], j)
        mass: dict[int, int] = defaultdict(int)
        for c in counts.values():
            mass[c.bit_length()] += c
        k = min(mass, key=lambda cls: (-mass[cls], cls))
        ks[l] = k
        Z[l] = {node for node, c in counts.items() if c.bit_length() == k}

    def survives(leaf: int) -> bool:
        return all((leaf >> (j * (m - l))) in Z[l] for l in range(m))

    kept = [k for k, leaf in zip(X.indices, leaves) if survives(leaf)]
    Xt = X.subset(kept)
    cert = UniformTreeCertificate(j, m, tuple(ks), tuple(len(z) for z in Z), len(X), len(Xt))
    validate_certificate(Xt, cert)
    return Xt, cert


def validate_certificate(Xt: GridSet, cert: UniformTreeCertificate) -> None:
    """Re-walk the tree of ``Xt`` and check every surviving child count."""
    if cert.final_size != len(Xt):
        raise TheoremViolation("certificate size does not match the regularized set")
    if len(Xt) == 0:
        raise TheoremViolation("regularization produced an empty set")
    j, m = cert.j, cert.m
    nodes = set(_leaf_offsets(Xt, TreeParams(j, m)))
    for l in range(m - 1, -1, -1):
        counts = _child_counts(nodes, j)
        lo, hi = 1 << (cert.k_per_level[l] - 1), 1 << cert.k_per_level[l]
        for node, c in counts.items():
            if not lo <= c < hi:
                raise TheoremViolation(
                    f"level {l} interval {node} has {c} children, outside [{lo}, {hi})")
        nodes = set(counts)


def doubling_profile(X: GridSet) -> dict[int, Fraction]:
    """``E_t(X+X)/E_t(X)`` for every dyadic ``t = 2**-l``, ``l = L..0``."""
    if len(X) == 0:
        raise EmptySetError("doubling profile of an empty set")
    XX = sumset(X, X)
    return {l: Fraction(covering_number(XX, Scale(l)), covering_number(X, Scale(l)))
            for l in range(X.L, -1, -1)}


def doubling_budget(X: GridSet, Xt: GridSet) -> dict:
    """Measured ``max_t E_t(X~+X~)/E_t(X~)`` against the δ-doubling ``K`` of ``X``."""
    K = Fraction(covering_number(sumset(X, X), X.scale), len(X))
    profile = doubling_profile(Xt)
    worst = max(profile.values())
    return {"K": K, "max_ratio": worst, "budget": worst / K, "profile": profile}


def suggest_branching(epsilon: RationalLike, max_j: int = 4096) -> int:
    """Smallest ``j`` with ``(2j)**m <= 2**(j*m*epsilon)``, i.e. ``2j <= 2**(j*epsilon)``."""
    eps = to_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    p, q = eps.numerator, eps.denominator
    for j in range(1, max_j + 1):
        if (2 * j) ** q <= 2 ** (j * p):
            return j
    raise ValueError(f"no branching exponent up to {max_j} works for epsilon = {eps}")
