import json
import random
from unittest.mock import patch

import pytest

from arithmetic.field import GlobalField
from config import settings
from exceptions import DegreeTooSmall, HypothesisViolated
from pipeline.reconstruct import (
    OutcomeKind, canonical_order, paper_degree, reconstruct, reconstruct_partitioned, smallness, vanish_fraction,
    vanishing_polynomial,
)
from sieve.point_set import PointSet
from sieve.structure import SieveParams

Q = GlobalField.rational()


@pytest.fixture(scope="module")
def parabola():
    return PointSet(Q, 1003001, [(x, x * x + 3 * x + 1) for x in range(-1000, 1001)])


@pytest.fixture(scope="module")
def line_and_parabola():
    points = dict.fromkeys([(x, 2 * x) for x in range(1, 501)] + [(x, x * x) for x in range(1, 501)])
    return PointSet(Q, 250000, list(points))


def _params(S, **kwargs):
    kwargs.setdefault("eta", 0.1)
    kwargs.setdefault("mode", "pragmatic")
    return SieveParams.create(2, 1, S.N, **kwargs)


class TestVanishingPolynomial:
    """Test cases for interpolation through a constraint set."""

    def test_through_two_points(self):
        """Test a conic through two points."""
        A = PointSet(Q, 10, [(1, 2), (3, 4)])
        rpoly = vanishing_polynomial(A, 2)
        assert rpoly.vanishes_at((1, 2)) and rpoly.vanishes_at((3, 4))
        assert rpoly.margin_ratio == 3.0

    def test_degree_too_small(self):
        """Test that three monomials cannot be forced past three points."""
        A = PointSet(Q, 10, [(1, 2), (3, 4), (5, 7)])
        with pytest.raises(DegreeTooSmall):
            vanishing_polynomial(A, 1)

    def test_homogeneous(self):
        """Test that the homogeneous basis gives a form."""
        A = PointSet(Q, 10, [(1, 1, 1)])
        rpoly = vanishing_polynomial(A, 2, homogeneous=True)
        assert rpoly.poly.is_homogeneous() and rpoly.vanishes_at((1, 1, 1))

    def test_vanish_fraction_of_empty_set(self):
        """Test that the empty set is covered by anything."""
        rpoly = vanishing_polynomial(PointSet(Q, 10, [(1, 2)]), 1)
        assert vanish_fraction(PointSet(Q, 10, [], dim=2), rpoly.poly) == (1.0, True)

    def test_paper_degree(self):
        """Test the certified starting degree for d = 2, h = 1."""
        assert paper_degree(1.0, 2, 1, False) == 36


class TestReconstruct:
    """Test cases for the small-or-structured dichotomy."""

    @pytest.mark.parametrize("seed", range(20))
    def test_random_set_is_small(self, seed):
        """Test 30 uniform points of [10^6]^2 against N = 10^6."""
        rng = random.Random(seed)
        points = {(rng.randint(1, 10 ** 6), rng.randint(1, 10 ** 6)) for _ in range(30)}
        S = PointSet(Q, 10 ** 6, list(points))
        outcome = reconstruct(S, _params(S))
        assert outcome.kind in (OutcomeKind.SMALL, OutcomeKind.NO_STRUCTURE)
        assert outcome.threshold == pytest.approx(1000)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_set_is_never_structured(self, seed):
        """Test that interpolating 60 random points of [100]^2 is not reported as structure."""
        rng = random.Random(seed)
        points = rng.sample([(x, y) for x in range(1, 101) for y in range(1, 101)], 60)
        S = PointSet(Q, 100, points)
        with patch.object(settings, "r_escalation_cap", 4):
            outcome = reconstruct(S, _params(S))
        assert outcome.kind == OutcomeKind.NO_STRUCTURE
        assert all(r.get("held_out_fraction", 0.0) < 0.9 for r in outcome.rounds)
        assert all(r["constraints"] <= 30 for r in outcome.rounds if "stopped" not in r)

    def test_parabola(self, parabola):
        """Test recovery of y = x^2 + 3x + 1."""
        outcome = reconstruct(parabola, _params(parabola))
        assert outcome.kind == OutcomeKind.STRUCTURED
        assert outcome.fraction == 1.0 and outcome.fraction_exact
        assert outcome.polynomial.degree == 2
        assert all(outcome.polynomial.vanishes_at(x) for x in parabola)
        assert not outcome.polynomial.vanishes_at((0, 0))

    def test_line_and_parabola(self, line_and_parabola):
        """Test a union of a line and a parabola."""
        S = line_and_parabola
        outcome = reconstruct(S, _params(S))
        assert outcome.kind == OutcomeKind.STRUCTURED
        assert outcome.fraction >= 0.9
        assert outcome.polynomial.degree <= 3
        assert sum(outcome.polynomial.vanishes_at(x) for x in S) >= 0.9 * len(S)

    def test_report_is_json(self, parabola):
        """Test that the outcome serializes."""
        data = json.loads(json.dumps(reconstruct(parabola, _params(parabola)).to_dict(), default=str))
        assert data["kind"] == "Structured"
        assert data["poly"]["degree"] == 2
        assert data["witness"]["A_size"] >= 1

    def test_smallness_ratio(self, parabola):
        """Test |S| / N^(k - 1 + eps)."""
        ratio, threshold = smallness(parabola, _params(parabola))
        assert threshold == pytest.approx(1003001 ** 0.5)
        assert ratio == pytest.approx(2001 / 1003001 ** 0.5)

    def test_homogeneous_paper_mode_needs_codimension(self, parabola):
        """Test that h = 1 is refused on the homogeneous path in paper mode."""
        with pytest.raises(HypothesisViolated):
            reconstruct(parabola, _params(parabola, mode="paper"), homogeneous=True)

    def test_partitioned(self, line_and_parabola):
        """Test a cover of the union by zero sets."""
        S = line_and_parabola
        outcome = reconstruct_partitioned(S, _params(S))
        assert outcome.kind == OutcomeKind.STRUCTURED
        assert outcome.fraction >= 0.9
        assert outcome.polynomials
        assert sum(outcome.polynomial.vanishes_at(x) for x in S) >= 0.9 * len(S)

    def test_canonical_order(self):
        """Test the canonical point order: |x| first, positive before negative."""
        S = PointSet(Q, 10, [(-1, 0), (2, 1), (1, 5), (0, 3), (1, -5)])
        assert canonical_order(S) == [3, 2, 4, 0, 1]

    def test_closure_rounds(self, line_and_parabola):
        """Test that accepted rounds vanish on the held-out points and record the trimmed degree."""
        outcome = reconstruct(line_and_parabola, _params(line_and_parabola))
        final = outcome.rounds[-1]
        assert final["held_out_fraction"] >= 0.9
        assert final["trimmed_to"] == outcome.polynomial.degree == 3
