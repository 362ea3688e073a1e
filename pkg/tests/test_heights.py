import math
from fractions import Fraction

import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from arithmetic.field import FqPoly, GlobalField
from arithmetic.heights import (
    BoundedBox, BoxKind, HeightValue, canonical_projective, count_bounded, counting_bound,
    enumerate_bounded, height_affine, height_projective, height_scalar, scalar_elements,
)
from arithmetic.polynomials import Polynomial, evaluation_height_bound, monomial_count, monomials
from exceptions import BoxTooLarge, ZeroPoint

Q = GlobalField.rational()
F2 = GlobalField.function_field(2)

nonzero_rationals = st.fractions(max_denominator=10**4).filter(lambda f: f != 0 and abs(f) < 10**6)


class TestHeights:
    """Test cases for exact heights."""

    def test_projective_height_clears_common_factors(self):
        """Test H(4 : 6) = 3."""
        assert height_projective(Q, (4, 6)) == 3

    def test_affine_height_of_fraction(self):
        """Test H(1 : 1/2) = 2."""
        assert height_affine(Q, (Fraction(1, 2),)) == 2

    def test_scalar_height(self):
        """Test H(-3/7) = 7."""
        assert height_scalar(Q, Fraction(-3, 7)) == 7

    def test_function_field_height(self):
        """Test H(T^3 + 1) = 2^3 over F_2(T)."""
        a = FqPoly.from_low([1, 0, 0, 1], 2)
        assert height_scalar(F2, a) == HeightValue.power(2, 3)

    def test_zero_point(self):
        """Test that the zero tuple has no height."""
        with pytest.raises(ZeroPoint):
            height_projective(Q, (0, 0))

    def test_canonical_projective(self):
        """Test the positive primitive representative."""
        assert canonical_projective(Q, (-4, 6)) == (2, -3)
        assert canonical_projective(Q, (Fraction(1, 2), Fraction(1, 3))) == (3, 2)

    def test_canonical_projective_function_field(self):
        """Test the monic representative over F_3(T)."""
        F3 = GlobalField.function_field(3)
        x = canonical_projective(F3, (FqPoly.constant(2, 3), FqPoly.from_low([0, 2], 3)))
        assert x == (FqPoly.constant(1, 3), FqPoly.from_low([0, 1], 3))

    @hyp_settings(max_examples=500, deadline=None)
    @given(nonzero_rationals, nonzero_rationals)
    def test_height_algebra(self, x, y):
        """Test the product, sum and inverse inequalities over Q."""
        H = lambda a: height_scalar(Q, a).as_fraction()
        assert H(x * y) <= H(x) * H(y)
        assert H(x + y) <= 2 * H(x) * H(y)
        assert H(x) == H(1 / x)
        assert abs(x.numerator) <= H(x)

    @hyp_settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=10).filter(any),
           st.lists(st.integers(0, 1), min_size=1, max_size=10).filter(any))
    def test_height_algebra_function_field(self, a, b):
        """Test the product and sum inequalities over F_2(T)."""
        x, y = FqPoly.from_low(a, 2), FqPoly.from_low(b, 2)
        H = lambda c: height_scalar(F2, c).as_fraction()
        assert H(x * y) <= H(x) * H(y)
        assert H(x + y) <= 2 * H(x) * H(y)


class TestBoxes:
    """Test cases for counting and enumerating bounded boxes."""

    @pytest.mark.parametrize("N", [100, 1000, 10_000])
    def test_rational_box_count(self, N):
        """Test |[N]_Z| = 2N + 1 and the counting bound."""
        count = count_bounded(BoundedBox(Q, N))
        assert count == 2 * N + 1
        assert count <= counting_bound(Q, N)

    @pytest.mark.parametrize("N", [100, 1000, 10_000])
    def test_function_field_box_count(self, N):
        """Test |[N]_{F_2[T]}| = 2^(floor(log2 N) + 1)."""
        count = count_bounded(BoundedBox(F2, N))
        assert count == 2 ** (math.floor(math.log2(N)) + 1)
        assert count <= counting_bound(F2, N)

    def test_scalar_elements_order(self):
        """Test the ascending order of [2]_Z."""
        assert scalar_elements(Q, 2) == [-2, -1, 0, 1, 2]

    def test_scalar_elements_function_field(self):
        """Test [2]_{F_2[T]} lists 0, 1, T, T + 1."""
        elements = scalar_elements(F2, 2)
        assert len(elements) == 4
        assert elements[0] == F2.zero()
        assert all(height_scalar(F2, a) <= 2 for a in elements)

    def test_projective_box(self):
        """Test the four points of P^1 with height 1."""
        box = BoundedBox(Q, 1, 1, BoxKind.PROJECTIVE)
        stream, count = enumerate_bounded(box)
        points = list(stream)
        assert count == len(points) == 4
        assert (1, -1) in points and (-1, 1) not in points

    def test_budget(self):
        """Test that oversized boxes are refused."""
        with pytest.raises(BoxTooLarge):
            enumerate_bounded(BoundedBox(Q, 10, 2, BoxKind.AFFINE), budget=100)

    def test_affine_enumeration_is_lexicographic(self):
        """Test the affine stream order."""
        stream, count = enumerate_bounded(BoundedBox(Q, 1, 2, BoxKind.AFFINE))
        points = list(stream)
        assert count == 9
        assert points[0] == (-1, -1) and points[-1] == (1, 1)


class TestPolynomials:
    """Test cases for the monomial basis and polynomial evaluation."""

    def test_monomial_order(self):
        """Test the graded order 1, x, y, x^2, xy, y^2."""
        assert monomials(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    def test_monomial_counts(self):
        """Test C(r + d, d) affine and C(r + d - 1, d - 1) homogeneous counts."""
        assert monomial_count(2, 2) == 6
        assert monomial_count(3, 2, homogeneous=True) == 6
        assert len(monomials(3, 4, homogeneous=True)) == 15

    def test_evaluate(self):
        """Test y - x^2 at points on and off the parabola."""
        x = Polynomial.variable(Q, 2, 0)
        y = Polynomial.variable(Q, 2, 1)
        f = y - x * x
        assert f((3, 9)) == 0
        assert f((3, 8)) == -1
        assert f.degree == 2 and not f.is_homogeneous()

    def test_evaluation_height_bound(self):
        """Test H(f(x)) <= R H(1:c) H(1:x)^deg."""
        x = Polynomial.variable(Q, 2, 0)
        y = Polynomial.variable(Q, 2, 1)
        f = y * 3 - x * x
        point = (5, 7)
        assert height_scalar(Q, f(point)) <= evaluation_height_bound(f, point)

    def test_dict_round_trip(self):
        """Test the JSON form of a polynomial."""
        x = Polynomial.variable(F2, 2, 0)
        f = x * x + Polynomial.constant(F2, 2, F2.T())
        assert Polynomial.from_dict(F2, f.to_dict()) == f
