"""Deterministic generators for test families inside ``[1, 2]``."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded, EmptySetError, PreconditionError
from .exact import Monomial, RationalLike, fraction_str, pow2, to_fraction
from .grid_set import GridSet, non_concentration_constant, read

KINDS = ("cantor", "random_nc", "ap", "gp", "custom-file")


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    L: int
    sigma_target: Fraction = Fraction(1, 2)
    seed: int = 0
    params: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.L < 1:
            raise ValueError("L must be positive")
        object.__setattr__(self, "sigma_target", to_fraction(self.sigma_target))
        if not 0 < self.sigma_target < 1:
            raise ValueError("sigma_target must lie in (0, 1)")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind, "L": self.L,
                "sigma_target": fraction_str(self.sigma_target), "seed": self.seed,
                "params": {k: str(v) for k, v in sorted(self.params.items())}}


def _int_list(value) -> list[int]:
    if isinstance(value, str):
        return [int(v) for v in value.replace(",", " ").split()]
    return [int(v) for v in value]


def cantor(L: int, keep, base_exp: int = 2) -> GridSet:
    """Keep the children listed in ``keep`` of every ``2**base_exp``-adic interval."""
    keep = sorted(set(_int_list(keep)))
    if L % base_exp:
        raise PreconditionError(f"L = {L} is not a multiple of the digit width {base_exp}")
    if not keep or keep[0] < 0 or keep[-1] >= 1 << base_exp:
        raise ValueError(f"keep digits must lie in [0, {(1 << base_exp) - 1}]")
    offsets = np.zeros(1, dtype=np.int64)
    for _ in range(L // base_exp):
        offsets = np.add.outer(offsets << base_exp, np.array(keep, dtype=np.int64)).ravel()
    return GridSet.from_indices(np.sort(offsets) + (1 << L), L)


def arithmetic_progression(L: int, step: int = 1, start: int = 0) -> GridSet:
    """``1 + start·δ, 1 + (start+step)·δ, ...`` below 2."""
    if step < 1:
        raise ValueError("step must be positive")
    return GridSet.from_indices(range((1 << L) + start, 2 << L, step), L)


def geometric_progression(L: int, n: int | None = None, ratio: RationalLike | None = None) -> GridSet:
    """Either ``2**(i/n)`` for ``i < n`` or ``ratio**i <= 2``, snapped half-up to the grid."""
    if (n is None) == (ratio is None):
        raise ValueError("give exactly one of n and ratio")
    if ratio is not None:
        r = to_fraction(ratio)
        if r <= 1:
            raise ValueError("ratio must exceed 1")
        pts, x = [], Fraction(1)
        while x <= 2:
            pts.append(Monomial(x))
            x *= r
    else:
        if n < 1:
            raise ValueError("n must be positive")
        pts = [pow2(Fraction(i, n)) for i in range(n)]
    idx = sorted({(p * (1 << L)).round_half_up() for p in pts})
    return GridSet.from_indices(idx, L)


def random_non_concentrated(L: int, sigma: RationalLike, threshold: RationalLike,
                            seed: int, attempts: int = 64, n: int | None = None) -> GridSet:
    """Uniform samples of size ``δ**-σ``, redrawn until the concentration constant is small."""
    sigma, threshold = to_fraction(sigma), to_fraction(threshold)
    n = pow2(L * sigma).floor() if n is None else n
    if not 1 <= n <= (1 << L) + 1:
        raise ValueError(f"cannot draw {n} distinct grid points at L = {L}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(attempts):
        idx = np.sort(rng.choice((1 << L) + 1, size=n, replace=False)) + (1 << L)
        X = GridSet.from_indices(idx.tolist(), L)
        c = non_concentration_constant(X, sigma).c_observed
        if c <= Monomial(threshold):
            return X
        if best is None or c < best:
            best = c
    raise BudgetExceeded(
        f"no sample with concentration <= {fraction_str(threshold)} in {attempts} attempts; "
        f"best observed {float(best):.4f}")


def load_custom(path, L: int | None = None, expected_size: int | None = None) -> GridSet:
    X = read(Path(path))
    verify_family(X, L, expected_size)
    return X


def verify_family(X: GridSet, L: int | None = None, expected_size: int | None = None) -> None:
    """Re-check the family postconditions: non-empty, on the grid, inside ``[1, 2]``."""
    if len(X) == 0:
        raise EmptySetError("family is empty")
    if L is not None and X.L != L:
        raise PreconditionError(f"family is at L = {X.L}, expected {L}")
    lo, hi = 1 << X.L, 2 << X.L
    if X.indices[0] < lo or X.indices[-1] > hi:
        raise PreconditionError("family leaves [1, 2]")
    if any(b <= a for a, b in zip(X.indices, X.indices[1:])):
        raise PreconditionError("family is not δ-separated")
    if expected_size is not None and len(X) != expected_size:
        raise PreconditionError(f"family has {len(X)} points, expected {expected_size}")


def generate_family(spec: FamilySpec) -> GridSet:
    p = spec.params
    if spec.kind == "cantor":
        X = cantor(spec.L, p.get("keep", "0 3"), int(p.get("base_exp", 2)))
    elif spec.kind == "ap":
        X = arithmetic_progression(spec.L, int(p.get("step", 1)), int(p.get("start", 0)))
    elif spec.kind == "gp":
        ratio = p.get("ratio")
        n = None if ratio is not None else int(p.get("n", pow2(spec.L * spec.sigma_target).floor()))
        X = geometric_progression(spec.L, n, ratio)
    elif spec.kind == "random_nc":
        X = random_non_concentrated(spec.L, spec.sigma_target, p.get("threshold", 4), spec.seed,
                                    int(p.get("attempts", 64)),
                                    int(p["n"]) if "n" in p else None)
    else:
        if "path" not in p:
            raise ValueError("custom-file families need a path parameter")
        X = load_custom(p["path"], spec.L, int(p["size"]) if "size" in p else None)
    verify_family(X, spec.L)
    return X.with_ambient(1 << spec.L, 2 << spec.L)
