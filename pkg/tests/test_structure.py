import math
import random
from collections import Counter

import pytest

from arithmetic.field import GlobalField, PrimeSet, field_constants, primes_up_to
from exceptions import EmptySet, HypothesisFailed
from sieve.point_set import PointSet
from sieve.structure import (
    SieveParams, StructureConstants, build_characteristic_set, build_generic_family, concentrated_lines,
    exceptional_classes, genericity_check, psi_weight, section,
    spread_coordinate_prune,
)

Q = GlobalField.rational()


@pytest.fixture(scope="module")
def parabola():
    points = [(x, x * x + 3 * x + 1) for x in range(-1000, 1001)]
    return PointSet(Q, 1003001, points)


@pytest.fixture
def digits():
    return PointSet(Q, 10, [(i,) for i in range(10)])


class TestSieveParams:
    """Test cases for parameter validation and descent."""

    def test_q_rule(self):
        """Test Q = floor(N^(eps / 2d))."""
        assert SieveParams.create(2, 1, 10_000).Q == 3
        assert SieveParams.create(2, 1, 1003001).Q == 5

    @pytest.mark.parametrize("kwargs", [
        {"d": 2, "k": 2, "N": 100},
        {"d": 2, "k": 1, "N": 100, "eta": 1.0},
        {"d": 2, "k": 1, "N": 100, "eps": 0},
        {"d": 2, "k": 1, "N": 100, "mode": "loose"},
    ])
    def test_rejects_bad_parameters(self, kwargs):
        """Test the parameter ranges."""
        with pytest.raises(ValueError):
            SieveParams.create(**kwargs)

    def test_descend(self):
        """Test one dimension less with nu eps, kappa / 2 and the same Q."""
        params = SieveParams.create(3, 2, 10 ** 6, eps=0.6, kappa=0.5)
        child = params.descend(alpha=4.0, c=0.25)
        assert (child.d, child.k, child.h) == (2, 1, 1)
        assert child.eps == pytest.approx(0.4)
        assert child.kappa == 0.25
        assert child.Q == params.Q
        assert (child.alpha, child.c) == (4.0, 0.25)

    def test_to_dict(self):
        """Test that N is serialized exactly."""
        data = SieveParams.create(2, 1, "1/2").to_dict()
        assert data["N"] == "1/2" and data["h"] == 1


class TestElementaryOperations:
    """Test cases for sections, genericity and coordinate pruning."""

    def test_section(self):
        """Test the points with a given first coordinate."""
        S = PointSet(Q, 10, [(0, 1), (0, 2), (1, 5)])
        assert section(S, 0).points == [(0, 1), (0, 2)]

    def test_genericity(self, digits):
        """Test the worst class density of {0, ..., 9} modulo 2."""
        p = primes_up_to(Q, 2).primes[0]
        generic, _, density = genericity_check(digits, p, 2, 1)
        assert density == 0.5 and generic
        assert not genericity_check(digits, p, 1, 1)[0]

    def test_genericity_of_empty_set(self):
        """Test that genericity needs points."""
        p = primes_up_to(Q, 2).primes[0]
        with pytest.raises(EmptySet):
            genericity_check(PointSet(Q, 10, [], dim=1), p, 2, 1)

    def test_prune_keeps_spread_first_coordinate(self):
        """Test a set already spread along the first coordinate."""
        S = PointSet(Q, 10, [(x, 0) for x in range(10)])
        position, kept, attempts = spread_coordinate_prune(S, 3)
        assert position == 0 and len(kept) == 10
        assert attempts[0]["min_projection"] == 5

    def test_prune_moves_to_next_coordinate(self):
        """Test that a vertical line is spread along the second coordinate."""
        S = PointSet(Q, 10, [(0, y) for y in range(10)])
        position, kept, attempts = spread_coordinate_prune(S, 3)
        assert position == 1 and len(kept) == 10
        assert [a["min_projection"] for a in attempts] == [1, 5]

    def test_prune_fails_on_tiny_set(self):
        """Test that two points cannot spread over three values."""
        with pytest.raises(HypothesisFailed):
            spread_coordinate_prune(PointSet(Q, 10, [(0, 0), (0, 1)]), 3)

    def test_prune_survives_subset_rechecks(self):
        """Test that random and greedy half-size subsets of the kept points still spread."""
        S = PointSet(Q, 100, [(0, y) for y in range(50)] + [(x, 0) for x in range(1, 31)])
        position, kept, _ = spread_coordinate_prune(S, 3)
        assert position == 1
        need = math.ceil(0.5 * len(kept))
        rng = random.Random(5)
        for _ in range(20):
            A = rng.sample(kept, need)
            assert len({S.points[i][position] for i in A}) >= 3
        # heaviest fibres first
        fibres = Counter(S.points[i][position] for i in kept)
        greedy, covered = [], 0
        for value, size in fibres.most_common():
            if covered >= need:
                break
            greedy.append(value)
            covered += size
        assert len(greedy) >= 3

    def test_psi_weight(self):
        """Test psi((0, 0)) = log 2 + log 3 when L = {(6, 6)} and Q = 10."""
        assert psi_weight(Q, (0, 0), [(6, 6)], 10) == pytest.approx(math.log(2) + math.log(3))
        assert psi_weight(Q, (0, 0), [], 10) == 0


class TestExceptionalClasses:
    """Test cases for exceptional residue classes and concentrated lines."""

    @pytest.fixture
    def column(self):
        return PointSet(Q, 10, [(0, y) for y in range(6)] + [(1, 0)])

    def test_exceptional_classes(self, column):
        """Test E1 by occupied classes and E2 by class size modulo 3."""
        p = primes_up_to(Q, 3).primes[1]
        assert exceptional_classes(column, p, 2, 1) == ({0}, {0})
        assert exceptional_classes(column, p, 100, 1) == (set(), set())

    def test_exceptional_classes_match_tabulation(self):
        """Test the parabola over [-50, 50] modulo 5 against a direct count."""
        S = PointSet(Q, 2500, [(x, x * x) for x in range(-50, 51)])
        p = primes_up_to(Q, 5).primes[2]
        by_first = {}
        for x, y in S.points:
            by_first.setdefault(x % 5, []).append((x % 5, y % 5))
        E1 = {a for a, members in by_first.items() if len(set(members)) >= 1}
        E2 = {a for a, members in by_first.items() if len(members) >= len(S) / 5}
        assert exceptional_classes(S, p, 1, 1) == (E1, E2)
        assert E2 == {0}

    def test_concentrated_lines(self, column):
        """Test that only multiples of 3 carry half the prime weight."""
        X = concentrated_lines(column, primes_up_to(Q, 3), 2, 1)
        assert X == frozenset({-9, -6, -3, 0, 3, 6, 9})

    def test_no_exceptional_classes(self, column):
        """Test that X is empty when no class is exceptional."""
        assert concentrated_lines(column, primes_up_to(Q, 3), 100, 1) == frozenset()

    def test_concentrated_set_is_below_q(self):
        """Test |X| < Q on the parabola over [400] with P(20) and the full-strength B1."""
        S = PointSet(Q, 160000, [(x, x * x) for x in range(1, 401)])
        params = SieveParams.create(2, 1, S.N, mode="paper")
        B1 = StructureConstants(params, field_constants(Q)).b1_generic()
        X = concentrated_lines(S, primes_up_to(Q, 20), B1, params.h, params.alpha)
        assert len(X) < params.Q


class TestGenericFamily:
    """Test cases for generic families of subsets."""

    def test_witnesses_are_generic(self, parabola):
        """Test that every kept prime carries a generic subset."""
        params = SieveParams.create(2, 1, parabola.N)
        P = primes_up_to(Q, params.Q)
        family = build_generic_family(parabola, P, params)
        assert set(family.primes) <= set(P)
        for p, witness in family.witnesses.items():
            assert witness.members
            assert witness.worst_density < witness.B / p.norm ** witness.l
        assert family.to_dict()["transcript"]["kind"] == "generic"

    def test_gluing_identity(self, parabola):
        """Test that G_p(S) on each first-coordinate line equals the section's own subset."""
        params = SieveParams.create(2, 1, parabola.N)
        family = build_generic_family(parabola, primes_up_to(Q, 20), params)
        assert family.witnesses
        coord = family.first_coordinate
        for p, witness in family.witnesses.items():
            for x, per_prime in family.sections.items():
                on_line = {i for i in witness.members if parabola.points[i][coord] == x}
                assert on_line == set(per_prime.get(p, []))

    def test_dimension_mismatch(self, digits):
        """Test that the parameters must match the set dimension."""
        with pytest.raises(ValueError):
            build_generic_family(digits, primes_up_to(Q, 5), SieveParams.create(2, 1, 10))


class TestCharacteristicSet:
    """Test cases for characteristic sets."""

    def test_base_case_keeps_everything(self, digits):
        """Test that A = L = S when d equals h."""
        params = SieveParams.create(1, 0, 10)
        witness = build_characteristic_set(digits, PrimeSet(Q, ()), 1, params)
        assert witness.A == witness.L == list(range(10))
        assert witness.delta == 1.0

    def test_parabola(self, parabola):
        """Test that A sits inside a dense L on the parabola."""
        params = SieveParams.create(2, 1, parabola.N)
        witness = build_characteristic_set(parabola, primes_up_to(Q, params.Q), 2, params)
        assert witness.A
        assert set(witness.A) <= set(witness.L)
        assert 0 < witness.delta <= 1
        assert witness.to_dict()["A_size"] == len(witness.A)

    def test_rejects_nonpositive_r(self, digits):
        """Test that r must be positive."""
        with pytest.raises(ValueError):
            build_characteristic_set(digits, PrimeSet(Q, ()), 0, SieveParams.create(1, 0, 10))
