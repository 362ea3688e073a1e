import itertools
import logging
import random
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import Poly, QQ, Symbol

from arithmetic.field import GlobalField, RingElement
from arithmetic.heights import (
    BoundedBox, BoxKind, HeightValue, canonical_projective, enumerate_bounded, height_projective,
    scalar_elements,
)
from arithmetic.polynomials import Polynomial
from config import settings
from exceptions import ChainInvalid
from solvers.siegel import LinearSystem, kernel_basis, matrix_rank

logger = logging.getLogger(__name__)

Point = Tuple[RingElement, ...]


@dataclass(frozen=True)
class Hypersurface:
    """Z(f) in P^m for a nonzero homogeneous f in m+1 variables."""

    poly: Polynomial

    def __post_init__(self):
        if self.poly.is_zero():
            raise ChainInvalid("A hypersurface needs a nonzero polynomial")
        if not self.poly.is_homogeneous():
            raise ChainInvalid(f"Polynomial {self.poly} is not homogeneous")

    @property
    def field(self) -> GlobalField:
        return self.poly.field

    @property
    def degree(self) -> int:
        return self.poly.degree

    @property
    def m(self) -> int:
        return self.poly.nvars - 1

    def contains(self, x: Sequence[RingElement]) -> bool:
        return not self.poly(tuple(x))


@dataclass
class NoetherMap:
    field: GlobalField
    m: int
    forms: List[Polynomial]
    centers: List[Point]
    degree: int
    heights: List[HeightValue] = dc_field(default_factory=list)
    constant: float = 1.0
    audit: Dict = dc_field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.forms) - 1

    @property
    def steps(self) -> int:
        return len(self.centers)

    def coefficient_rows(self) -> List[List[RingElement]]:
        basis = [tuple(int(i == j) for i in range(self.m + 1)) for j in range(self.m + 1)]
        return [[form.terms.get(e, self.field.zero()) for e in basis] for form in self.forms]

    def __call__(self, x: Sequence[RingElement]) -> Point:
        return tuple(form(tuple(x)) for form in self.forms)

    def image(self, x: Sequence[RingElement]) -> Optional[Point]:
        value = self(x)
        if not any(value):
            return None
        return canonical_projective(self.field, value)

    def to_dict(self) -> Dict:
        return {
            "field": self.field.to_dict(),
            "m": self.m,
            "dim": self.dim,
            "degree": self.degree,
            "matrix": [[str(a) for a in row] for row in self.coefficient_rows()],
            "centers": [[self.field.encode(a) for a in c] for c in self.centers],
            "heights": [h.to_dict() for h in self.heights],
            "constant": self.constant,
            "audit": self.audit,
        }


# Off-points and complements

def _search_order(field: GlobalField, D: int) -> List[RingElement]:
    if field.is_rational:
        order = [0]
        for a in range(1, max(D, 1) + 1):
            order.extend([a, -a])
        return order
    # smallest degree box with more than D elements per coordinate
    k = 0
    while field.q ** (k + 1) <= D:
        k += 1
    return scalar_elements(field, field.q ** k)


def point_off_hypersurface(f: Hypersurface) -> Point:
    """First point of the box [deg f]^(m+1), in lexicographic scan order, where f does not vanish."""
    order = _search_order(f.field, f.degree)
    for x in itertools.product(order, repeat=f.m + 1):
        if any(x) and f.poly(x):
            return tuple(x)
    # unreachable: the box exceeds every partial degree
    raise RuntimeError(f"No off-point found for {f.poly}")


def complement_small_basis(field: GlobalField, x: Sequence[RingElement]) -> List[Polynomial]:
    """Linear forms of small height whose common zero set is the point x."""
    x = tuple(field.element(a) for a in x)
    if not any(x):
        raise ValueError("The zero tuple is not a projective point")
    nvars = len(x)
    basis = [tuple(int(i == j) for i in range(nvars)) for j in range(nvars)]
    vectors = kernel_basis(LinearSystem(field, [list(x)]))
    forms = [Polynomial.from_coefficients(field, basis, list(v)) for v in vectors]

    if matrix_rank(field, [list(x)] + [list(v) for v in vectors]) != nvars:
        logger.error(f"Complement of {x} is not a basis")
        raise RuntimeError("Complement basis failed the rank check")
    return forms


def _compose(field: GlobalField, outer: Polynomial, inner: List[Polynomial]) -> Polynomial:
    """outer(inner_0, ..., inner_n) for a linear form outer."""
    nvars = inner[0].nvars
    total = Polynomial(field, nvars)
    for exponent, coeff in outer.terms.items():
        index = exponent.index(1)
        total = total + inner[index] * coeff
    return total


def _form_height(field: GlobalField, form: Polynomial) -> HeightValue:
    return height_projective(field, list(form.terms.values()))


# Sampling and audits

def sample_variety_points(f: Hypersurface, bound, limit: Optional[int] = None) -> List[Point]:
    """Points of Z(f) in the projective box of height at most bound, in scan order."""
    box = BoundedBox(f.field, Fraction(bound), f.m, BoxKind.PROJECTIVE)
    stream, _ = enumerate_bounded(box)
    found = []
    for x in stream:
        if f.contains(x):
            found.append(x)
            if limit is not None and len(found) >= limit:
                break
    return found


def _distinct_roots(field: GlobalField, coeffs: Sequence[RingElement]) -> int:
    t = Symbol("t")
    g = Poly(list(reversed([int(c) for c in coeffs])), t, domain=QQ)
    if g.is_zero:
        return -1
    square_free = g.quo(g.gcd(g.diff(t)))
    return square_free.degree()


def _box_fibre(nmap: NoetherMap, f: Hypersurface, y: Point, bound) -> int:
    target = nmap.image(y)
    box = BoundedBox(f.field, Fraction(bound), f.m, BoxKind.PROJECTIVE)
    stream, _ = enumerate_bounded(box)
    return sum(1 for z in stream if f.contains(z) and nmap.image(z) == target)


def fiber_audit(nmap: NoetherMap, f: Hypersurface, samples: Sequence[Point],
                n_samples: Optional[int] = None, seed: int = 0, box_bound=None) -> Dict:
    """Fibre sizes of the map restricted to Z(f) over sampled points.

    One-step maps over Q count the distinct roots of f on the line through the
    sample and the projection center; otherwise fibres are counted inside a box.
    """
    n_samples = settings.fiber_samples if n_samples is None else n_samples
    chosen = list(samples)
    if len(chosen) > n_samples:
        chosen = random.Random(seed).sample(chosen, n_samples)

    exact = nmap.steps == 1 and nmap.field.is_rational
    bound = box_bound if box_bound is not None else max(
        (float(height_projective(f.field, y)) for y in chosen), default=1.0)
    sizes = []
    for y in chosen:
        if exact:
            coeffs = f.poly.restrict_to_line(y, nmap.centers[0])
            sizes.append(_distinct_roots(nmap.field, coeffs))
        else:
            sizes.append(_box_fibre(nmap, f, y, bound))

    audit = {
        "samples": len(chosen),
        "method": "line-roots" if exact else "box-scan",
        "max_fibre": max(sizes, default=0),
        "degree_bound": f.degree,
        "holds": all(size <= f.degree for size in sizes),
    }
    if not exact:
        audit["limitation"] = f"fibres counted among points of height <= {bound}"
    logger.debug(f"Fibre audit: {audit}")
    return audit


# Normalization

def noether_normalize(field: GlobalField, m: int, chain: Sequence[Hypersurface],
                      target_dim: Optional[int] = None, samples: Sequence[Point] = (),
                      seed: int = 0) -> NoetherMap:
    """Compose one projection per chain step, from a point off each supplied hypersurface.

    chain[i] lives in P^(m-i) and must vanish on the image of V after i steps;
    samples are points of V used to check that.
    """
    if target_dim is not None and target_dim != m - len(chain):
        raise ChainInvalid(f"A chain of {len(chain)} steps from P^{m} reaches dimension "
                           f"{m - len(chain)}, not {target_dim}")

    forms = [Polynomial.variable(field, m + 1, i) for i in range(m + 1)]
    centers: List[Point] = []
    samples = [tuple(field.element(a) for a in y) for y in samples]
    D = max((f.degree for f in chain), default=1)

    for step, f in enumerate(chain):
        if f.m != len(forms) - 1:
            raise ChainInvalid(f"Step {step} polynomial has {f.m + 1} variables, expected {len(forms)}")
        for y in samples:
            image = tuple(form(y) for form in forms)
            if f.poly(image):
                raise ChainInvalid(f"Step {step} polynomial does not vanish at the image of {y}")

        center = point_off_hypersurface(f)
        complement = complement_small_basis(field, center)
        forms = [_compose(field, L, forms) for L in complement]
        centers.append(center)
        logger.info(f"Projection step {step}: center {center}, {len(forms)} forms remain")

    heights = [_form_height(field, form) for form in forms]
    nmap = NoetherMap(field, m, forms, centers, D, heights)
    nmap.constant = max(float(h) for h in heights) / D ** len(chain) if chain else 1.0

    rows = nmap.coefficient_rows()
    if matrix_rank(field, rows) != len(forms):
        logger.error("Composed linear forms are dependent")
        raise RuntimeError("Noether map forms are not linearly independent")
    for y in samples:
        if not any(nmap(y)):
            raise ChainInvalid(f"All forms vanish at the variety point {y}")

    if len(chain) == 1 and samples:
        nmap.audit = fiber_audit(nmap, chain[0], samples, seed=seed)
    logger.info(f"Noether map P^{m} -> P^{nmap.dim}: observed constant {nmap.constant:.4g}")
    return nmap
