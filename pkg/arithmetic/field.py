import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy import divisors
from sympy.ntheory import factorint, mobius
from sympy.polys import galoistools as gf
from sympy.polys.domains import ZZ

from config import settings
from exceptions import AllCoordinatesVanish, UnsupportedField, ZeroElement

logger = logging.getLogger(__name__)


class FieldKind(str, Enum):
    RATIONAL = "Q"
    FUNCTION = "FqT"


class FqPoly:
    """Polynomial over F_q, coefficients stored high-to-low as in sympy.polys.galoistools."""

    __slots__ = ("coeffs", "q")

    def __init__(self, coeffs: Sequence[int], q: int):
        self.q = q
        self.coeffs = tuple(int(c) for c in gf.gf_strip([int(c) % q for c in coeffs]))

    @classmethod
    def from_low(cls, coeffs: Sequence[int], q: int) -> "FqPoly":
        return cls(list(reversed(list(coeffs))), q)

    @classmethod
    def constant(cls, c: int, q: int) -> "FqPoly":
        return cls([c], q)

    @classmethod
    def monomial(cls, degree: int, q: int) -> "FqPoly":
        return cls([1] + [0] * degree, q)

    @property
    def degree(self) -> int:
        # -1 for the zero polynomial
        return len(self.coeffs) - 1

    @property
    def leading(self) -> int:
        return self.coeffs[0] if self.coeffs else 0

    def low_coeffs(self) -> List[int]:
        return list(reversed(self.coeffs))

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return (len(self.coeffs), self.coeffs)

    def monic(self) -> Tuple[int, "FqPoly"]:
        lc, f = gf.gf_monic(list(self.coeffs), self.q, ZZ)
        return int(lc), FqPoly(f, self.q)

    def _coerce(self, other):
        if isinstance(other, FqPoly):
            if other.q != self.q:
                raise ValueError(f"Mixed characteristics {self.q} and {other.q}")
            return other
        if isinstance(other, int):
            return FqPoly.constant(other, self.q)
        return NotImplemented

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FqPoly(gf.gf_add(list(self.coeffs), list(other.coeffs), self.q, ZZ), self.q)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FqPoly(gf.gf_sub(list(self.coeffs), list(other.coeffs), self.q, ZZ), self.q)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __neg__(self):
        return FqPoly(gf.gf_neg(list(self.coeffs), self.q, ZZ), self.q)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FqPoly(gf.gf_mul(list(self.coeffs), list(other.coeffs), self.q, ZZ), self.q)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        return FqPoly(gf.gf_pow(list(self.coeffs), n, self.q, ZZ), self.q)

    def __divmod__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other:
            raise ZeroDivisionError("polynomial division by zero")
        quo, rem = gf.gf_div(list(self.coeffs), list(other.coeffs), self.q, ZZ)
        return FqPoly(quo, self.q), FqPoly(rem, self.q)

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def __eq__(self, other):
        if not isinstance(other, FqPoly):
            return NotImplemented
        return self.q == other.q and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.q, self.coeffs))

    def __lt__(self, other: "FqPoly") -> bool:
        return self.sort_key() < other.sort_key()

    def __call__(self, a: int) -> int:
        return int(gf.gf_eval(list(self.coeffs), a, self.q, ZZ))

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for power, c in zip(range(self.degree, -1, -1), self.coeffs):
            if not c:
                continue
            if power == 0:
                terms.append(str(c))
            else:
                mono = "T" if power == 1 else f"T^{power}"
                terms.append(mono if c == 1 else f"{c}*{mono}")
        return "+".join(terms)

    def __repr__(self) -> str:
        return f"FqPoly({self} mod {self.q})"


def fq_gcd(a: FqPoly, b: FqPoly) -> FqPoly:
    """Monic gcd; zero when both inputs vanish."""
    return FqPoly(gf.gf_gcd(list(a.coeffs), list(b.coeffs), a.q, ZZ), a.q)


def fq_inverse_mod(a: FqPoly, modulus: FqPoly) -> FqPoly:
    s, _, h = gf.gf_gcdex(list(a.coeffs), list(modulus.coeffs), a.q, ZZ)
    if list(h) != [1]:
        raise ZeroDivisionError(f"{a} is not invertible modulo {modulus}")
    return FqPoly(s, a.q) % modulus


class FqFraction:
    """Element num/den of F_q(T) in lowest terms with monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: FqPoly, den: Optional[FqPoly] = None):
        q = num.q
        if den is None:
            den = FqPoly.constant(1, q)
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            self.num, self.den = num, FqPoly.constant(1, q)
            return
        g = fq_gcd(num, den)
        num, den = num // g, den // g
        lc, den = den.monic()
        self.num = num * pow(lc, -1, q)
        self.den = den

    @property
    def q(self) -> int:
        return self.num.q

    def __bool__(self) -> bool:
        return bool(self.num)

    def _coerce(self, other):
        if isinstance(other, FqFraction):
            return other
        if isinstance(other, (FqPoly, int)):
            num = other if isinstance(other, FqPoly) else FqPoly.constant(other, self.q)
            return FqFraction(num)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FqFraction(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FqFraction(self.num * other.den - other.num * self.den, self.den * other.den)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FqFraction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other:
            raise ZeroDivisionError("division by zero in F_q(T)")
        return FqFraction(self.num * other.den, self.den * other.num)

    def inverse(self) -> "FqFraction":
        return FqFraction(self.den, self.num)

    def __eq__(self, other):
        if not isinstance(other, FqFraction):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self) -> str:
        return f"FqFraction(({self.num})/({self.den}) mod {self.q})"


RingElement = Union[int, FqPoly]
FieldElement = Union[Fraction, FqFraction, int, FqPoly]


@dataclass(frozen=True)
class GlobalField:
    kind: FieldKind
    q: Optional[int] = None
    d_K: int = 1

    def __post_init__(self):
        if self.kind == FieldKind.FUNCTION:
            if self.q is None or not sympy.isprime(self.q):
                raise ValueError(f"Constant field size must be prime, got {self.q}")
        elif self.q is not None:
            raise ValueError("The rational field takes no q")
        if self.d_K != 1:
            raise UnsupportedField(f"Extension degree {self.d_K} is not supported")

    @classmethod
    def rational(cls) -> "GlobalField":
        return cls(FieldKind.RATIONAL)

    @classmethod
    def function_field(cls, q: int) -> "GlobalField":
        return cls(FieldKind.FUNCTION, q)

    @classmethod
    def from_dict(cls, data: Dict) -> "GlobalField":
        kind = FieldKind(data["kind"])
        if kind == FieldKind.RATIONAL:
            return cls.rational()
        return cls.function_field(int(data["q"]))

    @classmethod
    def parse(cls, text: str) -> "GlobalField":
        """Parse 'Q' or 'FqT:<q>' as used on the command line."""
        if text.upper() == "Q":
            return cls.rational()
        if text.startswith("FqT:"):
            return cls.function_field(int(text.split(":", 1)[1]))
        raise ValueError(f"Unknown field '{text}', expected 'Q' or 'FqT:<q>'")

    def to_dict(self) -> Dict:
        if self.is_rational:
            return {"kind": "Q"}
        return {"kind": "FqT", "q": self.q}

    @property
    def is_rational(self) -> bool:
        return self.kind == FieldKind.RATIONAL

    def __str__(self) -> str:
        return "Q" if self.is_rational else f"F_{self.q}(T)"

    # Ring elements

    def zero(self) -> RingElement:
        return 0 if self.is_rational else FqPoly([], self.q)

    def one(self) -> RingElement:
        return 1 if self.is_rational else FqPoly.constant(1, self.q)

    def T(self) -> FqPoly:
        if self.is_rational:
            raise UnsupportedField("Q has no variable T")
        return FqPoly.monomial(1, self.q)

    def element(self, value) -> RingElement:
        if self.is_rational:
            return int(value)
        if isinstance(value, FqPoly):
            return value
        if isinstance(value, int):
            return FqPoly.constant(value, self.q)
        return FqPoly.from_low(value, self.q)

    def encode(self, a: RingElement):
        """JSON form: decimal string for Q, low-to-high coefficient array for F_q(T)."""
        if self.is_rational:
            return str(a)
        return a.low_coeffs()

    def decode(self, obj) -> RingElement:
        if self.is_rational:
            return int(obj)
        if isinstance(obj, (int, str)):
            return FqPoly.constant(int(obj), self.q)
        return FqPoly.from_low([int(c) for c in obj], self.q)

    def gcd(self, a: RingElement, b: RingElement) -> RingElement:
        if self.is_rational:
            return math.gcd(a, b)
        return fq_gcd(a, b)

    def normalize(self, a: RingElement) -> Tuple[int, RingElement]:
        """Split a into (unit, associate) with a positive (Q) or monic (F_q(T)) associate."""
        if self.is_rational:
            return (-1, -a) if a < 0 else (1, a)
        if not a:
            return 1, a
        return a.monic()

    def sort_key(self, a: RingElement):
        # Q: 0, 1, -1, 2, -2, ...; F_q(T): degree then coefficients
        if self.is_rational:
            return (abs(a), a < 0)
        return a.sort_key()

    def fraction(self, num: RingElement, den: Optional[RingElement] = None) -> FieldElement:
        if self.is_rational:
            return Fraction(num, 1 if den is None else den)
        return FqFraction(num, den)

    def residue_key(self, r):
        return r if self.is_rational else r.sort_key()


@dataclass(frozen=True)
class PrimeOfK:
    generator: RingElement
    norm: int

    @property
    def degree(self) -> int:
        return self.generator.degree if isinstance(self.generator, FqPoly) else 1

    def sort_key(self):
        if isinstance(self.generator, FqPoly):
            return (self.norm, self.generator.sort_key())
        return (self.norm, ())

    def __str__(self) -> str:
        return str(self.generator)


def make_prime(field: GlobalField, generator) -> PrimeOfK:
    """Validate an irreducible generator and attach its norm."""
    generator = field.element(generator)
    if field.is_rational:
        if not sympy.isprime(generator):
            raise ValueError(f"{generator} is not a positive prime")
        return PrimeOfK(generator, generator)
    if generator.degree < 1 or generator.leading != 1:
        raise ValueError(f"{generator} is not monic of positive degree")
    if not gf.gf_irred_p_rabin(list(generator.coeffs), field.q, ZZ):
        raise ValueError(f"{generator} is reducible over F_{field.q}")
    return PrimeOfK(generator, field.q ** generator.degree)


@dataclass(frozen=True)
class PrimeSet:
    field: GlobalField
    primes: Tuple[PrimeOfK, ...]
    bound: Optional[int] = None

    def __post_init__(self):
        keys = [p.sort_key() for p in self.primes]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise ValueError("Primes must be strictly increasing by (norm, generator)")
        if self.bound is not None and any(p.norm > self.bound for p in self.primes):
            raise ValueError(f"Prime norm exceeds the bound {self.bound}")

    def __iter__(self) -> Iterator[PrimeOfK]:
        return iter(self.primes)

    def __len__(self) -> int:
        return len(self.primes)

    def __contains__(self, p) -> bool:
        return p in self.primes

    def subset(self, keep: Iterable[PrimeOfK]) -> "PrimeSet":
        keep = set(keep)
        return PrimeSet(self.field, tuple(p for p in self.primes if p in keep), self.bound)

    def to_dict(self) -> Dict:
        return {
            "field": self.field.to_dict(),
            "bound": self.bound,
            "primes": [self.field.encode(p.generator) for p in self.primes],
            "norms": [p.norm for p in self.primes],
        }


@dataclass(frozen=True)
class FieldConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c6: float = 1.0
    c_count: float = 4.0
    h_K: int = 1
    g_K: int = 0
    R_K: int = 1

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3, self.c4, self.c6, self.c_count) <= 0:
            raise ValueError("Field constants must be positive")
        if self.c1 > self.c2 or self.c3 > self.c4:
            raise ValueError("Field constants must satisfy c1 <= c2 and c3 <= c4")

    @property
    def c5(self) -> float:
        return 2 * (self.c4 + 3) / self.c1

    def to_dict(self) -> Dict:
        return {
            "c1": self.c1, "c2": self.c2, "c3": self.c3, "c4": self.c4,
            "c5": self.c5, "c6": self.c6, "c_count": self.c_count,
            "h_K": self.h_K, "g_K": self.g_K, "R_K": self.R_K,
        }


# Primes

def prime_norm(p: PrimeOfK) -> int:
    return p.norm


def _simple_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.array([], dtype=np.int64)
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p: limit + 1: p] = False
    return np.flatnonzero(is_prime).astype(np.int64)


def rational_primes(limit: int, segment_odd_count: int = 1 << 18) -> List[int]:
    """Segmented sieve of Eratosthenes over the odd numbers up to limit."""
    if limit < 2:
        return []
    base = _simple_sieve(math.isqrt(limit) + 1)
    primes = [2]
    span = 2 * segment_odd_count
    low = 3

    while low <= limit:
        high = min(low + span, limit + 1)  # exclusive
        mask = np.ones((high - low + 1) // 2, dtype=bool)

        for p in base[1:]:
            p = int(p)
            if p * p >= high:
                break
            start = max(p * p, ((low + p - 1) // p) * p)
            if start % 2 == 0:
                start += p
            if start >= high:
                continue
            mask[(start - low) // 2::p] = False

        primes.extend((low + 2 * np.flatnonzero(mask)).tolist())
        low = high if high % 2 == 1 else high + 1

    return primes


def monic_irreducibles(q: int, degree: int) -> List[FqPoly]:
    """All monic irreducible polynomials of the given degree, in coefficient order."""
    found = []
    for tail in itertools.product(range(q), repeat=degree):
        coeffs = [1, *tail]
        if gf.gf_irred_p_rabin(coeffs, q, ZZ):
            found.append(FqPoly(coeffs, q))
    return found


def primes_up_to(field: GlobalField, Q: int) -> PrimeSet:
    """P(Q): every prime of norm at most Q, sorted by (norm, generator)."""
    if Q < 2:
        raise ValueError(f"Prime bound must be at least 2, got {Q}")

    if field.is_rational:
        primes = tuple(PrimeOfK(p, p) for p in rational_primes(Q))
    else:
        primes = []
        degree, norm = 1, field.q
        while norm <= Q:
            primes.extend(PrimeOfK(g, norm) for g in monic_irreducibles(field.q, degree))
            degree, norm = degree + 1, norm * field.q
        primes = tuple(primes)

    logger.debug(f"Enumerated {len(primes)} primes of {field} with norm <= {Q}")
    return PrimeSet(field, primes, Q)


def weight_w(P: Iterable[PrimeOfK]) -> float:
    """w(P) = sum of log N(p) / N(p), compensated summation."""
    return math.fsum(math.log(p.norm) / p.norm for p in P)


def theta(P: Iterable[PrimeOfK]) -> float:
    return math.fsum(math.log(p.norm) for p in P)


def irreducible_count(q: int, n: int) -> int:
    """Number of monic irreducibles of degree n over F_q (necklace formula)."""
    total = sum(int(mobius(d)) * q ** (n // d) for d in divisors(n))
    return total // n


# Valuations and reductions

def ord_at(field: GlobalField, x: RingElement, p: PrimeOfK) -> int:
    """Largest e with p^e dividing x."""
    if not x:
        raise ZeroElement("ord_p(0) is undefined")
    e = 0
    while True:
        quo, rem = divmod(x, p.generator)
        if rem:
            return e
        x, e = quo, e + 1


def _residue(field: GlobalField, a: RingElement, p: PrimeOfK):
    return a % p.generator


def _residue_inverse(field: GlobalField, r, p: PrimeOfK):
    if field.is_rational:
        return pow(r, -1, p.generator)
    return fq_inverse_mod(r, p.generator)


def primitive(field: GlobalField, x: Sequence[RingElement]) -> Tuple[RingElement, ...]:
    """Divide a tuple of ring elements by the gcd of its coordinates."""
    g = field.zero()
    for a in x:
        g = field.gcd(g, a)
    if not g:
        return tuple(x)
    return tuple(a // g for a in x)


def reduce_mod(field: GlobalField, x: Sequence[RingElement], p: PrimeOfK, projective: bool = False) -> tuple:
    """Componentwise reduction; projective residues are scaled so the first nonzero entry is 1."""
    if not projective:
        return tuple(_residue(field, a, p) for a in x)

    residues = [_residue(field, a, p) for a in primitive(field, x)]
    lead = next((r for r in residues if r), None)
    if lead is None:
        raise AllCoordinatesVanish(f"Point {tuple(x)} vanishes modulo {p}")
    inv = _residue_inverse(field, lead, p)
    return tuple((r * inv) % p.generator for r in residues)


# Places

INFINITY = "inf"


def _as_fraction(field: GlobalField, x: FieldElement) -> FieldElement:
    if field.is_rational:
        return Fraction(x)
    if isinstance(x, FqFraction):
        return x
    return FqFraction(field.element(x))


def places_of(field: GlobalField, x: FieldElement) -> Dict[object, Fraction]:
    """Exact normalized absolute values of x at every place where they differ from 1."""
    x = _as_fraction(field, x)
    if not x:
        raise ZeroElement("Absolute values of 0 are not places data")

    values: Dict[object, Fraction] = {}

    if field.is_rational:
        if abs(x) != 1:
            values[INFINITY] = abs(x)
        for part, sign in ((x.numerator, -1), (x.denominator, 1)):
            for prime, e in factorint(abs(part)).items():
                values[PrimeOfK(prime, prime)] = Fraction(prime) ** (sign * e)
        return values

    q = field.q
    degree_gap = x.num.degree - x.den.degree
    if degree_gap:
        values[INFINITY] = Fraction(q) ** degree_gap
    for part, sign in ((x.num, -1), (x.den, 1)):
        if part.degree < 1:
            continue
        _, factors = gf.gf_factor(list(part.coeffs), q, ZZ)
        for factor, e in factors:
            g = FqPoly(factor, q)
            values[PrimeOfK(g, q ** g.degree)] = Fraction(q) ** (sign * e * g.degree)
    return values


def absolute_value(field: GlobalField, x: FieldElement, place) -> Fraction:
    return places_of(field, x).get(place, Fraction(1))


def product_formula(field: GlobalField, x: FieldElement) -> Fraction:
    """Product of ||x||_v over all places; exactly 1 for nonzero x."""
    result = Fraction(1)
    for value in places_of(field, x).values():
        result *= value
    return result


# Constants

@lru_cache(maxsize=None)
def calibrate_function_field_constants(q: int, max_degree: int) -> FieldConstants:
    """Landau-type constants for F_q(T) from exact irreducible counts.

    Both w(P(Q))/ln Q and theta(Q)/Q are step functions of Q whose extremes on
    [q^m, q^(m+1)) sit at the endpoints, so scanning powers of q is exact.
    """
    log_q = math.log(q)
    w_m = theta_m = 0.0
    w_ratios, theta_ratios = [], []

    for m in range(1, max_degree + 1):
        count = irreducible_count(q, m)
        w_m += count * m * log_q / q ** m
        theta_m += count * m * log_q
        w_ratios.extend([w_m / (m * log_q), w_m / ((m + 1) * log_q)])
        theta_ratios.extend([theta_m / q ** m, theta_m / q ** (m + 1)])

    constants = FieldConstants(
        c1=0.9 * min(w_ratios),
        c2=1.1 * max(w_ratios),
        c3=0.9 * min(theta_ratios),
        c4=1.1 * max(theta_ratios),
        c6=settings.siegel_c6,
        c_count=2.0 * q,
    )
    logger.info(f"Calibrated constants for F_{q}(T) up to degree {max_degree}: {constants.to_dict()}")
    return constants


def field_constants(field: GlobalField) -> FieldConstants:
    """Shipped constants; F_q(T) values are valid for q <= Q < q^(calibration degree + 1)."""
    if field.is_rational:
        return FieldConstants(c1=0.5, c2=1.5, c3=0.5, c4=1.5, c6=settings.siegel_c6, c_count=4.0)
    return calibrate_function_field_constants(field.q, settings.function_field_calibration_degree)
