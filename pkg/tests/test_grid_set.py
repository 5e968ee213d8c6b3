from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sumproduct_lab.errors import EmptySetError, OutOfAmbientError, ScaleMismatch
from sumproduct_lab.exact import Monomial, pow2
from sumproduct_lab.families import cantor
from sumproduct_lab.grid_set import (
    GridSet, Scale, affine_image, cells, common_cells, covering_number, difference_set,
    discretize, dumps, greedy_cover_count, iterated_sumset, linear_combination_cover, loads,
    non_concentration_constant, product_cover, read, sumset, write,
)

from conftest import random_gridset


def G(idx, L):
    return GridSet.from_indices(idx, L)


@st.composite
def gridsets(draw, max_L=8, max_n=24):
    L = draw(st.integers(1, max_L))
    lo = 1 << L
    idx = draw(st.sets(st.integers(lo, 2 * lo), min_size=1, max_size=max_n))
    return G(sorted(idx), L)


class TestDiscretize:
    def test_points_on_grid(self):
        assert discretize([1, Fraction(3, 2), 2], Scale(1)).indices == (2, 3, 4)

    def test_rounding(self):
        X = discretize([Fraction(11, 10)], Scale(2))
        assert X.indices == (4,) and X.points() == [Fraction(1)]

    def test_collision(self):
        assert discretize([1, 1 + Fraction(1, 32)], Scale(2)).indices == (4,)

    def test_tie_rounds_up(self):
        assert discretize([Fraction(9, 8)], Scale(2)).indices == (5,)

    def test_outside_ambient(self):
        with pytest.raises(OutOfAmbientError) as err:
            discretize([3], Scale(2))
        assert err.value.value == 3


class TestCovering:
    def test_full_grid(self):
        X = G(range(4, 9), 2)
        assert covering_number(X, Scale(2)) == 5
        assert covering_number(X, Scale(1)) == 3
        assert cells(X, Scale(1)).tolist() == [2, 3, 4]

    def test_singleton(self):
        for l in (0, 1, 2):
            assert covering_number(G([4], 2), Scale(l)) == 1

    def test_empty(self):
        with pytest.raises(EmptySetError):
            covering_number(G([], 2), Scale(1))

    @given(gridsets())
    def test_monotone_and_bounded(self, X):
        counts = [covering_number(X, Scale(l)) for l in range(X.L + 1)]
        assert counts == sorted(counts)
        assert counts[-1] == len(X)

    @given(gridsets(), st.data())
    def test_factor_two_contract(self, X, data):
        t = Scale(data.draw(st.integers(0, X.L)))
        g = greedy_cover_count(X, t)
        assert g <= covering_number(X, t) <= 2 * g

    def test_greedy_is_minimal_on_small_sets(self, rng):
        from itertools import combinations
        for _ in range(30):
            X = random_gridset(rng, 4, rng.randint(1, 8))
            t = Scale(rng.randint(0, 4))
            w = 1 << (X.L - t.log_inv)
            g = greedy_cover_count(X, t)
            # brute force: intervals [s, s+w] with s at a point; smallest family covering X
            starts = list(X.indices)
            best = next(r for r in range(1, len(starts) + 1)
                        if any(all(any(s <= k <= s + w for s in combo) for k in X.indices)
                               for combo in combinations(starts, r)))
            assert g == best


class TestSumsets:
    def test_small_sumset(self):
        assert sumset(G([4, 5, 6], 2), G([4, 5, 6], 2)).indices == (8, 9, 10, 11, 12)
        assert sumset(G([4], 2), G([4], 2)).indices == (8,)

    def test_ap(self):
        X = G(range(256, 300, 3), 8)
        assert len(sumset(X, X)) == 2 * len(X) - 1

    def test_scale_mismatch(self):
        with pytest.raises(ScaleMismatch):
            sumset(G([4], 2), G([8], 3))

    def test_iterated(self):
        X = G([4, 6], 2)
        assert iterated_sumset(X, 1) == X
        assert iterated_sumset(X, 3).indices == (12, 14, 16, 18)

    @given(gridsets(max_n=12), gridsets(max_n=12))
    def test_sumset_bounds_and_brute_force(self, X, Y):
        Y = G([k - (1 << Y.L) + (1 << X.L) for k in Y.indices if k - (1 << Y.L) <= (1 << X.L)] or [1 << X.L], X.L)
        S = sumset(X, Y)
        assert set(S.indices) == {a + b for a in X.indices for b in Y.indices}
        assert len(X) + len(Y) - 1 <= len(S) <= len(X) * len(Y)

    def test_difference_set(self):
        X = G([4, 5, 7], 2)
        assert difference_set(X, X).indices == (-3, -2, -1, 0, 1, 2, 3)


class TestProductsAndDilates:
    def test_identity_product(self):
        assert product_cover(G([4], 2), G([4], 2), Scale(2)).indices == (4,)

    def test_two_point_product(self):
        P = product_cover(G([4, 8], 2), G([4, 8], 2), Scale(2))
        assert P.points() == [1, 2, 4] and len(P) == 3

    def test_geometric_progression_products(self):
        # 1, 5/4, 25/16, 125/64 at L=6: products r^(i+j) give 7 exact values
        X = G([64, 80, 100, 125], 6)
        assert len(product_cover(X, X, Scale(12))) == 7

    def test_affine(self):
        X = G([4, 6], 2)
        assert affine_image(X, 1, 0, Scale(2)).indices == X.indices
        assert affine_image(X, 2, 0, Scale(2)).indices == (8, 12)
        assert len(affine_image(G([4, 5], 2), Fraction(1, 4), 0, Scale(2))) == 1
        with pytest.raises(ValueError):
            affine_image(X, 0, 0, Scale(2))

    @given(gridsets(max_L=6), st.integers(-3, 3))
    def test_affine_inverse(self, X, e):
        lam = Fraction(2) ** e
        fine = Scale(X.L + max(e, 0) + 3)
        Y = affine_image(X, lam, 0, fine)
        back = affine_image(Y, 1 / lam, 0, X.scale)
        assert back.indices == X.indices

    def test_linear_combination_matches_brute_force(self, rng):
        for _ in range(20):
            X = random_gridset(rng, 5, rng.randint(1, 6))
            c1, c2 = Fraction(rng.randint(-9, 9), rng.randint(1, 5)), Fraction(rng.randint(1, 9), rng.randint(1, 5))
            out = Scale(rng.randint(0, 7))
            got = linear_combination_cover([(c1, X), (c2, X), (c2, X)], out).indices
            want = sorted({(c1 * a + c2 * b + c2 * c) * X.delta // out.delta
                           for a in X.indices for b in X.indices for c in X.indices})
            assert list(got) == want


class TestConcentration:
    def test_full_grid(self):
        X = G(range(1024, 2049), 10)
        p = non_concentration_constant(X, Fraction(9, 10))
        assert 1 <= p.c_observed <= 2

    def test_single_interval(self):
        X = G(range(1024, 1040), 10)
        p = non_concentration_constant(X, Fraction(1, 2))
        assert p.c_observed == pow2(3)
        assert p.witness == (1024, 1040)

    def test_cantor(self):
        p = non_concentration_constant(cantor(10, [0, 3]), Fraction(1, 2))
        assert p.c_observed <= 4

    @given(gridsets(), st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(7, 10)]))
    @settings(max_examples=50)
    def test_witness_reevaluates(self, X, sigma):
        p = non_concentration_constant(X, sigma)
        assert p.reevaluate(X) == p.c_observed
        assert p.c_observed >= Monomial(Fraction(1, len(X)))

    def test_within_factor_of_dyadic_supremum(self, rng):
        sigma = Fraction(1, 2)
        for _ in range(10):
            X = random_gridset(rng, 6, rng.randint(2, 20))
            p = non_concentration_constant(X, sigma)
            for l in range(7):
                w = 1 << (6 - l)
                for lo in range(X.ambient_lo, X.ambient_hi - w + 1):
                    c = Monomial(Fraction(X.count_in(lo, lo + w), len(X))) * pow2(l * sigma)
                    assert c <= p.c_observed * pow2(sigma)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            non_concentration_constant(G([4], 2), 1)


class TestCommonCells:
    def test_examples(self):
        X = G([4, 5], 2)
        assert common_cells(X, G([5, 7], 2), Scale(2)) == 1
        assert common_cells(X, X, Scale(1)) == covering_number(X, Scale(1))
        assert common_cells(X, G([7, 8], 2), Scale(2)) == 0


def test_serialization_round_trip(tmp_path, rng):
    X = random_gridset(rng, 9, 40)
    assert loads(dumps(X)) == X
    assert dumps(X).splitlines()[0] == f"9 512 1024 40"
    write(X, tmp_path / "x.txt")
    assert read(tmp_path / "x.txt") == X
