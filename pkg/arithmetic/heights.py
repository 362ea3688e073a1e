import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from arithmetic.field import (
    FieldConstants, FieldElement, FqFraction, FqPoly, GlobalField, RingElement,
    field_constants, primitive,
)
from config import settings
from exceptions import BoxTooLarge, ZeroPoint

logger = logging.getLogger(__name__)


@total_ordering
class HeightValue:
    """Exact multiplicative height: a rational for Q, q^k for F_q(T)."""

    __slots__ = ("value", "q", "k")

    def __init__(self, value: Optional[Fraction] = None, q: Optional[int] = None, k: Optional[int] = None):
        if q is None:
            self.value, self.q, self.k = Fraction(value), None, None
        else:
            self.value, self.q, self.k = None, q, int(k)

    @classmethod
    def rational(cls, value) -> "HeightValue":
        return cls(value=Fraction(value))

    @classmethod
    def power(cls, q: int, k: int) -> "HeightValue":
        return cls(q=q, k=k)

    @property
    def is_power(self) -> bool:
        return self.q is not None

    def as_fraction(self) -> Fraction:
        if self.is_power:
            return Fraction(self.q) ** self.k
        return self.value

    def log(self) -> float:
        if self.is_power:
            return self.k * math.log(self.q)
        return math.log(self.value.numerator) - math.log(self.value.denominator)

    def __float__(self) -> float:
        return float(self.as_fraction())

    def __mul__(self, other):
        if isinstance(other, HeightValue):
            if self.is_power and other.is_power and self.q == other.q:
                return HeightValue.power(self.q, self.k + other.k)
            return HeightValue.rational(self.as_fraction() * other.as_fraction())
        if isinstance(other, (int, Fraction)):
            return HeightValue.rational(self.as_fraction() * other)
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "HeightValue":
        if self.is_power:
            return HeightValue.power(self.q, self.k * n)
        return HeightValue.rational(self.value ** n)

    @staticmethod
    def _key(other) -> Fraction:
        if isinstance(other, HeightValue):
            return other.as_fraction()
        # floats convert exactly
        return Fraction(other)

    def __eq__(self, other):
        try:
            return self.as_fraction() == self._key(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other):
        return self.as_fraction() < self._key(other)

    def __hash__(self):
        return hash(self.as_fraction())

    def __repr__(self) -> str:
        if self.is_power:
            return f"HeightValue({self.q}^{self.k})"
        return f"HeightValue({self.value})"

    def to_dict(self) -> Dict:
        if self.is_power:
            return {"q": self.q, "k": self.k}
        return {"value": str(self.value)}


def _one(field: GlobalField) -> HeightValue:
    return HeightValue.rational(1) if field.is_rational else HeightValue.power(field.q, 0)


def _ring_size(field: GlobalField, values: Sequence[RingElement]) -> HeightValue:
    """Max coordinate size of a primitive tuple: max |a| or q^(max deg a)."""
    if field.is_rational:
        return HeightValue.rational(max(abs(a) for a in values))
    return HeightValue.power(field.q, max(a.degree for a in values))


def _lcm(field: GlobalField, a: RingElement, b: RingElement) -> RingElement:
    return (a * b) // field.gcd(a, b)


def clear_denominators(field: GlobalField, x: Sequence[FieldElement]) -> Tuple[RingElement, ...]:
    """Scale a tuple of field elements to ring elements by the lcm of denominators."""
    if field.is_rational:
        fracs = [Fraction(a) for a in x]
        den = 1
        for f in fracs:
            den = _lcm(field, den, f.denominator)
        return tuple(f.numerator * (den // f.denominator) for f in fracs)

    fracs = [a if isinstance(a, FqFraction) else FqFraction(field.element(a)) for a in x]
    den = field.one()
    for f in fracs:
        den = _lcm(field, den, f.den)
    return tuple(f.num * (den // f.den) for f in fracs)


def height_scalar(field: GlobalField, x: FieldElement) -> HeightValue:
    """H_K(x) = H_K(1:x)."""
    if field.is_rational:
        f = Fraction(x)
        return HeightValue.rational(max(abs(f.numerator), f.denominator))
    f = x if isinstance(x, FqFraction) else FqFraction(field.element(x))
    return HeightValue.power(field.q, max(f.num.degree, f.den.degree, 0))


def height_projective(field: GlobalField, x: Sequence[FieldElement]) -> HeightValue:
    """H_K(x_0 : ... : x_n) for a nonzero tuple."""
    ring_x = clear_denominators(field, x)
    if not any(ring_x):
        raise ZeroPoint("The zero tuple is not a projective point")
    return _ring_size(field, primitive(field, ring_x))


def height_affine(field: GlobalField, x: Sequence[FieldElement]) -> HeightValue:
    """H_K(1 : x_1 : ... : x_n)."""
    return height_projective(field, (field.one(), *x))


def canonical_projective(field: GlobalField, x: Sequence[FieldElement]) -> Tuple[RingElement, ...]:
    """gcd-cleared representative with first nonzero coordinate positive (Q) or monic (F_q(T))."""
    ring_x = clear_denominators(field, x)
    if not any(ring_x):
        raise ZeroPoint("The zero tuple is not a projective point")
    ring_x = primitive(field, ring_x)
    lead = next(a for a in ring_x if a)
    if field.is_rational:
        return tuple(-a for a in ring_x) if lead < 0 else ring_x
    inv = pow(lead.leading, -1, field.q)
    return tuple(a * inv for a in ring_x)


# Boxes

class BoxKind(str, Enum):
    SCALAR = "scalar"
    AFFINE = "affine"
    PROJECTIVE = "projective"


@dataclass(frozen=True)
class BoundedBox:
    field: GlobalField
    N: Fraction
    dim: int = 1
    kind: BoxKind = BoxKind.SCALAR

    def __post_init__(self):
        object.__setattr__(self, "N", Fraction(self.N))
        if self.N <= 0:
            raise ValueError(f"Height bound must be positive, got {self.N}")

    def max_degree(self) -> int:
        """Largest k with q^k <= N (F_q(T)); -1 when the box is empty."""
        k, size = -1, 1
        while size <= self.N:
            k, size = k + 1, size * self.field.q
        return k

    def contains(self, x) -> bool:
        if self.kind == BoxKind.SCALAR:
            return height_scalar(self.field, x) <= self.N
        if self.kind == BoxKind.AFFINE:
            return len(x) == self.dim and all(height_scalar(self.field, a) <= self.N for a in x)
        return len(x) == self.dim + 1 and height_projective(self.field, x) <= self.N

    def to_dict(self) -> Dict:
        return {"field": self.field.to_dict(), "N": str(self.N), "dim": self.dim, "kind": self.kind.value}


def scalar_elements(field: GlobalField, N) -> List[RingElement]:
    """[N]_{O_K} in canonical order: ascending for Q, degree-then-lex for F_q(T)."""
    N = Fraction(N)
    if N < 1:
        return []
    if field.is_rational:
        n = math.floor(N)
        return list(range(-n, n + 1))

    k = BoundedBox(field, N).max_degree()
    q = field.q
    elements = [field.zero()]
    for length in range(1, k + 2):
        for lead in range(1, q):
            for tail in itertools.product(range(q), repeat=length - 1):
                elements.append(FqPoly([lead, *tail], q))
    return elements


def count_bounded(box: BoundedBox) -> int:
    """Exact size of the box, without enumeration for scalar and affine boxes."""
    if box.N < 1:
        return 0
    if box.field.is_rational:
        scalar = 2 * math.floor(box.N) + 1
    else:
        scalar = box.field.q ** (box.max_degree() + 1)

    if box.kind == BoxKind.SCALAR:
        return scalar
    if box.kind == BoxKind.AFFINE:
        return scalar ** box.dim
    return sum(1 for _ in _projective_points(box))


def _projective_points(box: BoundedBox) -> Iterator[Tuple[RingElement, ...]]:
    elements = scalar_elements(box.field, box.N)
    for x in itertools.product(elements, repeat=box.dim + 1):
        if any(x) and canonical_projective(box.field, x) == x:
            yield x


def enumerate_bounded(box: BoundedBox, budget: Optional[int] = None) -> Tuple[Iterator, int]:
    """Lexicographic stream of the box members together with their exact count."""
    budget = settings.box_budget if budget is None else budget

    if box.kind == BoxKind.PROJECTIVE:
        ambient = count_bounded(BoundedBox(box.field, box.N, box.dim + 1, BoxKind.AFFINE))
        if ambient > budget:
            raise BoxTooLarge(f"Projective box scan of {ambient} tuples exceeds budget {budget}")
        count = count_bounded(box)
        return _projective_points(box), count

    count = count_bounded(box)
    if count > budget:
        raise BoxTooLarge(f"Box with {count} members exceeds budget {budget}")

    elements = scalar_elements(box.field, box.N)
    if box.kind == BoxKind.SCALAR:
        return iter(elements), count
    return itertools.product(elements, repeat=box.dim), count


def counting_bound(field: GlobalField, N, constants: Optional[FieldConstants] = None) -> float:
    """c''(K) * N * log N, the single-place counting bound."""
    constants = constants or field_constants(field)
    return constants.c_count * float(N) * math.log(float(N))
