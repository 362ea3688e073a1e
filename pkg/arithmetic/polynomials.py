import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

from arithmetic.field import GlobalField, RingElement
from arithmetic.heights import HeightValue, height_affine

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]


def monomials(nvars: int, degree: int, homogeneous: bool = False) -> List[Exponent]:
    """Exponent vectors of degree exactly r (homogeneous) or at most r, graded order.

    Within one total degree the first variable carries the highest power first,
    so for (x, y): 1, x, y, x^2, xy, y^2, ...
    """
    degrees = [degree] if homogeneous else range(degree + 1)
    result = []
    for total in degrees:
        block = [e for e in itertools.product(range(total + 1), repeat=nvars) if sum(e) == total]
        block.sort(reverse=True)
        result.extend(block)
    return result


def monomial_count(nvars: int, degree: int, homogeneous: bool = False) -> int:
    if homogeneous:
        return math.comb(degree + nvars - 1, nvars - 1)
    return math.comb(degree + nvars, nvars)


def _power(field: GlobalField, a: RingElement, e: int) -> RingElement:
    return a ** e if e else field.one()


class Polynomial:
    """Sparse polynomial over O_K: exponent tuple -> nonzero ring coefficient."""

    def __init__(self, field: GlobalField, nvars: int, terms: Optional[Dict[Exponent, RingElement]] = None):
        self.field = field
        self.nvars = nvars
        self.terms: Dict[Exponent, RingElement] = {}
        for exponent, coeff in (terms or {}).items():
            if len(exponent) != nvars:
                raise ValueError(f"Exponent {exponent} does not match {nvars} variables")
            if coeff:
                self.terms[tuple(exponent)] = coeff

    @classmethod
    def from_coefficients(cls, field: GlobalField, basis: Sequence[Exponent], coeffs: Sequence[RingElement]) -> "Polynomial":
        nvars = len(basis[0]) if basis else 0
        return cls(field, nvars, dict(zip(basis, coeffs)))

    @classmethod
    def variable(cls, field: GlobalField, nvars: int, index: int) -> "Polynomial":
        exponent = tuple(1 if i == index else 0 for i in range(nvars))
        return cls(field, nvars, {exponent: field.one()})

    @classmethod
    def constant(cls, field: GlobalField, nvars: int, value: RingElement) -> "Polynomial":
        return cls(field, nvars, {(0,) * nvars: value})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def partial_degree(self, index: int) -> int:
        return max((e[index] for e in self.terms), default=-1)

    def sorted_terms(self) -> List[Tuple[Exponent, RingElement]]:
        return sorted(self.terms.items(), key=lambda item: (sum(item[0]), tuple(-x for x in item[0])))

    def evaluate(self, point: Sequence[RingElement]) -> RingElement:
        if len(point) != self.nvars:
            raise ValueError(f"Point of length {len(point)} for {self.nvars} variables")
        total = self.field.zero()
        for exponent, coeff in self.terms.items():
            value = coeff
            for a, e in zip(point, exponent):
                if e:
                    value = value * _power(self.field, a, e)
            total = total + value
        return total

    __call__ = evaluate

    def coefficient_height(self) -> HeightValue:
        """H_K(1 : c) over the nonzero coefficients."""
        return height_affine(self.field, list(self.terms.values()))

    def _combine(self, other: "Polynomial", sign: int) -> "Polynomial":
        terms = dict(self.terms)
        for exponent, coeff in other.terms.items():
            current = terms.get(exponent, self.field.zero())
            terms[exponent] = current + coeff if sign > 0 else current - coeff
        return Polynomial(self.field, self.nvars, terms)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return self._combine(other, 1)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self._combine(other, -1)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.field, self.nvars, {e: -c for e, c in self.terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial(self.field, self.nvars, {e: c * other for e, c in self.terms.items()})
        terms: Dict[Exponent, RingElement] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exponent = tuple(a + b for a, b in zip(e1, e2))
                terms[exponent] = terms.get(exponent, self.field.zero()) + c1 * c2
        return Polynomial(self.field, self.nvars, terms)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def restrict_to_line(self, base: Sequence[RingElement], direction: Sequence[RingElement]) -> List[RingElement]:
        """Coefficients (low-to-high in t) of f(base + t * direction)."""
        result: List[RingElement] = [self.field.zero()]
        for exponent, coeff in self.terms.items():
            term = [coeff]
            for b, v, e in zip(base, direction, exponent):
                for _ in range(e):
                    term = _poly_mul(self.field, term, [b, v])
            result = _poly_add(self.field, result, term)
        while len(result) > 1 and not result[-1]:
            result.pop()
        return result

    def to_dict(self) -> Dict:
        return {
            "nvars": self.nvars,
            "terms": [[list(e), self.field.encode(c)] for e, c in self.sorted_terms()],
        }

    @classmethod
    def from_dict(cls, field: GlobalField, data: Dict) -> "Polynomial":
        terms = {tuple(e): field.decode(c) for e, c in data["terms"]}
        return cls(field, int(data["nvars"]), terms)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        names = ["x", "y", "z"] if self.nvars <= 3 else [f"X{i}" for i in range(self.nvars)]
        parts = []
        for exponent, coeff in self.sorted_terms():
            mono = "*".join(
                name if e == 1 else f"{name}^{e}"
                for name, e in zip(names, exponent) if e
            )
            text = f"({coeff})" if not self.field.is_rational else str(coeff)
            parts.append(f"{text}*{mono}" if mono else text)
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self})"


def _poly_mul(field: GlobalField, a: List[RingElement], b: List[RingElement]) -> List[RingElement]:
    out = [field.zero() for _ in range(len(a) + len(b) - 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = out[i + j] + x * y
    return out


def _poly_add(field: GlobalField, a: List[RingElement], b: List[RingElement]) -> List[RingElement]:
    n = max(len(a), len(b))
    a = a + [field.zero()] * (n - len(a))
    b = b + [field.zero()] * (n - len(b))
    return [x + y for x, y in zip(a, b)]


def evaluation_height_bound(poly: Polynomial, point: Sequence[RingElement]) -> HeightValue:
    """R * H(1:c) * H(1:x)^deg P, the bound on H(P(x))."""
    return poly.num_terms * poly.coefficient_height() * height_affine(poly.field, point) ** max(poly.degree, 0)
