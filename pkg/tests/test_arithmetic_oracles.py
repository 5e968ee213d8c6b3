from fractions import Fraction
from itertools import combinations

import pytest

from sumproduct_lab.arithmetic_oracles import (
    FiniteGroupSet, discretized_plunnecke, discretized_triangle, peel_refinements,
    plunnecke_refinement, plunnecke_suite, ruzsa_suite, ruzsa_triangle_check,
)
from sumproduct_lab.errors import EmptySetError, HypothesisViolation
from sumproduct_lab.grid_set import GridSet, Scale, covering_number, sumset

from conftest import random_gridset


def S(elements, modulus=None):
    return FiniteGroupSet.of(elements, modulus)


class TestPlunnecke:
    def test_cyclic_pair(self):
        X = S([0, 1], 5)
        res = plunnecke_refinement(X, [X, X], [Fraction(3, 2)] * 2)
        assert res.subset == X and res.ratio == 2 and res.bound == Fraction(9, 4)
        assert res.method == "exhaustive" and res.within_bound

    def test_singleton_translates(self):
        Y = S([3, 5, 11])
        res = plunnecke_refinement(S([7]), [Y], [3])
        assert res.subset == S([7]) and res.ratio == len(Y)

    def test_whole_group(self):
        Z = S(range(5), 5)
        res = plunnecke_refinement(Z, [Z, Z], [1, 1])
        assert res.subset == Z and res.ratio == 1

    def test_hypothesis_checked(self):
        with pytest.raises(HypothesisViolation):
            plunnecke_refinement(S([0, 1], 5), [S(range(5), 5)], [1])

    def test_exhaustive_returns_largest_admissible_subset(self):
        X, Y = S([0, 1, 3, 7]), S([0, 2, 3])
        K = Fraction(len(X + Y), len(X))
        res = plunnecke_refinement(X, [Y, Y], [K, K])
        T = Y + Y
        sizes = [r for r in range(1, len(X) + 1) for c in combinations(X.elements, r)
                 if len(S(c) + T) <= K * K * r]
        assert len(res.subset) == max(sizes)
        assert res.ratio == Fraction(len(res.subset + T), len(res.subset)) <= K * K

    def test_half_size_refinement(self):
        X, Y = S([0, 1, 2, 3, 10, 20, 40]), S([0, 1])
        K = Fraction(len(X + Y), len(X))
        res = plunnecke_refinement(X, [Y, Y], [K, K], require_half=True)
        assert 2 * len(res.subset) >= len(X) and res.within_bound

    def test_peeling_covers_half(self):
        X, Y = S(range(0, 30, 3)), S([0, 1, 5])
        stages = peel_refinements(X, [Y, Y])
        assert 2 * stages[-1].union_size >= len(X)
        union = set()
        for st in stages:
            assert set(st.piece.elements) <= set(X.elements)
            assert not union & set(st.piece.elements)
            union |= set(st.piece.elements)

    def test_greedy_beyond_exhaustive_limit(self):
        X = S(range(0, 50, 2))
        Y = S([0, 1])
        res = plunnecke_refinement(X, [Y], [Fraction(len(X + Y), len(X))], require_half=True)
        assert res.method == "ratio-greedy"
        assert 2 * len(res.subset) >= len(X)

    def test_small_exhaustive_suite(self):
        assert plunnecke_suite(5, 2, True).ok
        assert plunnecke_suite(5, 3, False).ok


class TestRuzsa:
    def test_examples(self):
        assert ruzsa_triangle_check(S([0, 2]), S([0, 1]), S([0, 2])) == (3, 8)
        assert ruzsa_triangle_check(S([0]), S(range(5)), S([5])) == (1, 5)

    def test_self_case(self):
        X = S([0, 1, 4, 9])
        lhs, rhs = ruzsa_triangle_check(X, X, X)
        assert lhs == len(X - X) and rhs == Fraction(len(X - X) ** 2, len(X))

    def test_empty_middle(self):
        with pytest.raises(EmptySetError):
            ruzsa_triangle_check(S([0]), S([]), S([1]))

    def test_cyclic_suite(self):
        assert ruzsa_suite(4).ok


class TestDiscretized:
    def test_singleton_summands(self):
        full = GridSet.from_indices(range(64, 129), 6)
        s = GridSet.from_indices([70], 6)
        res = discretized_plunnecke(full, [s, s], [1, 1], Scale(6))
        assert res.ratio == 1

    def test_full_grid(self):
        full = GridSet.from_indices(range(64, 129), 6)
        res = discretized_plunnecke(full, [full], [2], Scale(6))
        assert res.ratio <= 8
        assert 2 * covering_number(res.subset, Scale(6)) >= covering_number(full, Scale(6))

    def test_ap(self):
        ap = GridSet.from_indices(range(64, 100, 3), 6)
        res = discretized_plunnecke(ap, [ap], [2], Scale(6))
        assert res.within_bound and set(res.subset.indices) <= set(ap.indices)

    def test_hypothesis(self):
        X = GridSet.from_indices([64], 6)
        Y = GridSet.from_indices([64, 80, 100], 6)
        with pytest.raises(HypothesisViolation):
            discretized_plunnecke(X, [Y], [1], Scale(6))

    def test_coarse_scale_refinement_is_union_of_cells(self, rng):
        X = random_gridset(rng, 8, 30)
        res = discretized_plunnecke(X, [X], [Fraction(covering_number(sumset(X, X), Scale(5)),
                                                      covering_number(X, Scale(5)))], Scale(5))
        kept = {k >> 3 for k in res.subset.indices}
        assert set(res.subset.indices) == {k for k in X.indices if k >> 3 in kept}

    def test_triangle(self, rng):
        full = GridSet.from_indices(range(64, 129), 6)
        assert discretized_triangle(full, full, full, Scale(6)) == (129, Fraction(129 ** 2, 65))
        s = GridSet.from_indices([64], 6)
        assert discretized_triangle(s, s, s, Scale(6))[0] == 1
        for _ in range(100):
            X, Y, Z = (random_gridset(rng, 8, 20) for _ in range(3))
            lhs, rhs = discretized_triangle(X, Y, Z, Scale(rng.randint(3, 8)))
            assert lhs <= 8 * rhs
