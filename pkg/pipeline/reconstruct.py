import logging
import math
import random
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from arithmetic.field import GlobalField, PrimeSet, RingElement, primes_up_to
from arithmetic.heights import HeightValue
from arithmetic.polynomials import Polynomial, monomial_count, monomials
from config import settings
from exceptions import DegreeTooSmall, HypothesisFailed, HypothesisViolated
from sieve.point_set import PointSet
from sieve.structure import CharacteristicWitness, SieveParams, build_characteristic_set
from solvers.siegel import LinearSystem, rational_kernel, small_solution

logger = logging.getLogger(__name__)


class OutcomeKind(str, Enum):
    SMALL = "Small"
    STRUCTURED = "Structured"
    NO_STRUCTURE = "NoStructureFound"


@dataclass
class RPolynomial:
    poly: Polynomial
    r: int
    homogeneous: bool
    bound: Optional[HeightValue] = None
    margin_ratio: float = 0.0

    @property
    def field(self) -> GlobalField:
        return self.poly.field

    @property
    def degree(self) -> int:
        return self.poly.degree

    def evaluate(self, x: Sequence[RingElement]) -> RingElement:
        return self.poly(tuple(x))

    def vanishes_at(self, x: Sequence[RingElement]) -> bool:
        return not self.evaluate(x)

    def certify_r(self, N, d_K: int = 1) -> bool:
        """Sufficient condition for H(f(x)) < N^(3 r d_K) on the height-N box.

        Uses H(f(x)) <= R * H(1:c) * H(1:x)^deg with H(1:x) <= N.
        """
        log_N = math.log(float(N))
        log_bound = (math.log(max(self.poly.num_terms, 1)) + self.poly.coefficient_height().log()
                     + max(self.degree, 0) * log_N)
        return log_bound < 3 * self.r * d_K * log_N

    def to_dict(self) -> Dict:
        return {
            "r": self.r,
            "degree": self.degree,
            "homogeneous": self.homogeneous,
            "poly": self.poly.to_dict(),
            "text": str(self.poly),
            "coefficient_height": self.poly.coefficient_height().to_dict(),
            "bound": self.bound.to_dict() if self.bound is not None else None,
            "margin_ratio": self.margin_ratio,
        }


@dataclass
class ReconstructionOutcome:
    kind: OutcomeKind
    ratio: float = 0.0
    threshold: float = 0.0
    polynomial: Optional[RPolynomial] = None
    polynomials: List[RPolynomial] = dc_field(default_factory=list)
    fraction: float = 0.0
    fraction_exact: bool = True
    witness: Optional[CharacteristicWitness] = None
    r_certified: bool = False
    margin_certified: bool = False
    rounds: List[Dict] = dc_field(default_factory=list)
    diagnostics: Dict = dc_field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = {
            "kind": self.kind.value,
            "ratio": self.ratio,
            "threshold": self.threshold,
            "fraction": self.fraction,
            "fraction_exact": self.fraction_exact,
            "r_certified": self.r_certified,
            "margin_certified": self.margin_certified,
            "rounds": self.rounds,
            "diagnostics": self.diagnostics,
        }
        if self.polynomial is not None:
            data["poly"] = self.polynomial.to_dict()
        if self.polynomials:
            data["cover"] = [p.to_dict() for p in self.polynomials]
        if self.witness is not None:
            data["witness"] = self.witness.to_dict()
        return data


# Interpolation

def _monomial_value(field: GlobalField, x: Sequence[RingElement], exponent: Sequence[int]) -> RingElement:
    value = field.one()
    for a, e in zip(x, exponent):
        if e:
            value = value * a ** e
    return value


def _interpolate(A: PointSet, r: int, homogeneous: bool) -> RPolynomial:
    field, d = A.field, A.dim
    basis = monomials(d, r, homogeneous)
    rows = [[_monomial_value(field, x, e) for e in basis] for x in A]
    solution = small_solution(LinearSystem(field, rows, t=len(basis)))
    poly = Polynomial.from_coefficients(field, basis, list(solution.vector))

    if any(poly(x) for x in A):
        logger.error(f"Interpolated polynomial {poly} does not vanish on the constraint set")
        raise RuntimeError("Vanishing polynomial failed its exactness check")
    ratio = len(basis) / len(A) if len(A) else float(len(basis))
    return RPolynomial(poly, r, homogeneous, solution.bound, ratio)


def vanishing_polynomial(A: PointSet, r: int, homogeneous: bool = False,
                         margin: Optional[float] = None) -> RPolynomial:
    """Small-height polynomial of degree r (or at most r) vanishing on every point of A."""
    margin = settings.siegel_margin if margin is None else margin
    count = monomial_count(A.dim, r, homogeneous)
    if count <= margin * A.field.d_K ** 2 * len(A):
        raise DegreeTooSmall(f"{count} monomials of degree {r} do not exceed {margin} x |A| = {margin * len(A)}")
    return _interpolate(A, r, homogeneous)


def vanish_mask(S: PointSet, poly: Polynomial, indices: Optional[Sequence[int]] = None) -> List[bool]:
    indices = range(len(S)) if indices is None else indices
    return [not poly(S.points[i]) for i in indices]


def vanish_fraction(S: PointSet, poly: Polynomial, seed: int = 0) -> Tuple[float, bool]:
    """(fraction of S where poly vanishes, computed exactly)."""
    if not len(S):
        return 1.0, True
    if len(S) <= settings.exact_vanish_limit:
        return sum(vanish_mask(S, poly)) / len(S), True
    sample = random.Random(seed).sample(range(len(S)), settings.vanish_sample_size)
    return sum(vanish_mask(S, poly, sample)) / len(sample), False


# Degree schedule

def paper_degree(c2: float, d: int, h: int, homogeneous: bool, d_K: int = 1) -> int:
    """Degree making the monomial count exceed the certified margin times c2 r^(d-h)."""
    margin = settings.certified_margin * d_K ** 2
    if homogeneous:
        return max(1, math.ceil((margin * c2 * math.factorial(d - 1)) ** (1 / (h - 1))))
    return max(1, math.ceil((margin * c2 * math.factorial(d)) ** (1 / h)))


def _degree_schedule(start: int) -> List[int]:
    schedule, r = [], start
    while r <= settings.r_escalation_cap:
        schedule.append(r)
        r *= 2
    return schedule


def smallness(S: PointSet, params: SieveParams) -> Tuple[float, float]:
    """(|S| / N^(k-1+eps), threshold on |S|)."""
    scale = params.power_of_N(params.k - 1 + params.eps)
    return len(S) / scale, settings.smallness_constant * scale


# Reconstruction

def _ambient_rejects(poly: Polynomial, ambient: Sequence[Sequence[RingElement]]) -> bool:
    return bool(ambient) and all(not poly(tuple(x)) for x in ambient)


def _certify_against(witness: CharacteristicWitness, rpoly: RPolynomial):
    on_A = all(rpoly.vanishes_at(witness.S.points[i]) for i in witness.A)
    on_L = all(rpoly.vanishes_at(witness.S.points[i]) for i in witness.L)
    witness.certified_against.append({
        "poly": str(rpoly.poly), "r": rpoly.r, "vanishes_on_A": on_A, "vanishes_on_L": on_L,
        "holds": (not on_A) or on_L,
    })


def canonical_order(S: PointSet) -> List[int]:
    """Indices of S sorted by the coordinatewise canonical key of the field."""
    field = S.field
    return sorted(range(len(S)), key=lambda i: tuple(field.sort_key(a) for a in S.points[i]))


def _generic_kernel_element(S: PointSet, constraints: Sequence[int], basis) -> Optional[Polynomial]:
    """Sum of a kernel basis: it vanishes at a point only when every kernel element does, barring accidents."""
    field = S.field
    rows = [[_monomial_value(field, S.points[i], e) for e in basis] for i in constraints]
    kernel = rational_kernel(LinearSystem(field, rows, t=len(basis)))
    if not kernel:
        return None
    coeffs = list(kernel[0])
    for v in kernel[1:]:
        coeffs = [a + b for a, b in zip(coeffs, v)]
    poly = Polynomial.from_coefficients(field, basis, coeffs)
    return None if poly.is_zero else poly


def _screen(S: PointSet, poly: Polynomial, fitted: set) -> Tuple[List[bool], float, float]:
    """(vanish mask, fraction over S, fraction over the points outside the constraint set)."""
    mask = vanish_mask(S, poly)
    held_out = [hit for i, hit in enumerate(mask) if i not in fitted]
    held_fraction = sum(held_out) / len(held_out) if held_out else 0.0
    return mask, sum(mask) / len(S), held_fraction


def _closure(S: PointSet, witness: CharacteristicWitness, r: int, homogeneous: bool, target: float,
             ambient, rounds: List[Dict]) -> Optional[Tuple[RPolynomial, float, bool]]:
    """Grow the constraint set from A until the forced zeros of the kernel cover the target.

    Points are added in canonical order, one per round, while the monomial count exceeds the
    constraint count and at most half of S is used as constraints. A polynomial is accepted
    only when it also vanishes on at least the target share of the points it was not fitted to.
    """
    basis = monomials(S.dim, r, homogeneous)
    limit = min(len(basis) - 1, len(S) // 2)
    constraints = list(dict.fromkeys(witness.A))
    order = canonical_order(S)
    while True:
        if len(constraints) > limit:
            rounds.append({"r": r, "constraints": len(constraints), "monomials": len(basis),
                           "stopped": f"constraint limit {limit} reached"})
            return None
        poly = _generic_kernel_element(S, constraints, basis)
        if poly is None:
            rounds.append({"r": r, "constraints": len(constraints), "monomials": len(basis),
                           "stopped": "no nonzero kernel element"})
            return None
        mask, fraction, held_fraction = _screen(S, poly, set(constraints))
        rounds.append({
            "r": r, "constraints": len(constraints), "monomials": len(basis),
            "margin_ratio": len(basis) / len(constraints) if constraints else float(len(basis)),
            "fraction": fraction, "held_out_fraction": held_fraction,
        })
        if fraction >= target and held_fraction >= target:
            break
        constraints.append(next(i for i in order if not mask[i]))

    # lowest degree whose kernel on the same constraints still passes
    fitted = set(constraints)
    degree = r
    for low in range(1, r):
        candidate = _generic_kernel_element(S, constraints, monomials(S.dim, low, homogeneous))
        if candidate is None:
            continue
        _, fraction, held_fraction = _screen(S, candidate, fitted)
        if fraction >= target and held_fraction >= target:
            degree = low
            break

    rpoly = _interpolate(S.subset(constraints), degree, homogeneous)
    rounds[-1].update({"margin_ratio": rpoly.margin_ratio, "degree": rpoly.degree, "trimmed_to": degree})
    if _ambient_rejects(rpoly.poly, ambient):
        rounds[-1]["stopped"] = "vanishes on the ambient variety"
        return None
    return rpoly, sum(vanish_mask(S, rpoly.poly)) / len(S), True


def reconstruct(S: PointSet, params: SieveParams, P: Optional[PrimeSet] = None, homogeneous: bool = False,
                ambient: Sequence[Sequence[RingElement]] = ()) -> ReconstructionOutcome:
    """Small set, or a low-degree polynomial vanishing on at least (1 - eta)|S| points."""
    ratio, threshold = smallness(S, params)
    if len(S) < threshold:
        logger.info(f"Small set: |S|={len(S)} < {threshold:.3f}")
        return ReconstructionOutcome(OutcomeKind.SMALL, ratio=ratio, threshold=threshold)

    h = params.h
    paper = params.mode == "paper"
    if homogeneous and paper and h <= 1:
        raise HypothesisViolated("The homogeneous path in paper mode needs h > 1")

    field = S.field
    P = P if P is not None else (primes_up_to(field, params.Q) if params.Q >= 2 else PrimeSet(field, ()))
    target = 1 - params.eta

    if paper:
        probe = build_characteristic_set(S, P, 1, params)
        start = paper_degree(probe.c2, params.d, h, homogeneous, field.d_K)
    else:
        start = 1
    schedule = _degree_schedule(start)

    rounds: List[Dict] = []
    witness = None
    for r in schedule:
        witness = build_characteristic_set(S, P, r, params)
        if paper:
            try:
                rpoly = vanishing_polynomial(S.subset(witness.A), r, homogeneous, settings.certified_margin)
            except DegreeTooSmall as e:
                rounds.append({"r": r, "constraints": len(witness.A), "stopped": str(e)})
                continue
            fraction, _ = vanish_fraction(S, rpoly.poly)
            rounds.append({"r": r, "constraints": len(witness.A), "margin_ratio": rpoly.margin_ratio,
                           "fraction": fraction})
            found = (rpoly, fraction, True) if fraction >= target and not _ambient_rejects(rpoly.poly, ambient) else None
        else:
            found = _closure(S, witness, r, homogeneous, target, ambient, rounds)

        if found is None:
            logger.info(f"No polynomial of degree {r} reached the target fraction {target}")
            continue

        rpoly, _, _ = found
        fraction, exact = vanish_fraction(S, rpoly.poly)
        if fraction < target:
            continue
        _certify_against(witness, rpoly)
        margin = settings.certified_margin if paper else settings.siegel_margin
        outcome = ReconstructionOutcome(
            OutcomeKind.STRUCTURED, ratio=ratio, threshold=threshold, polynomial=rpoly,
            polynomials=[rpoly], fraction=fraction, fraction_exact=exact, witness=witness,
            r_certified=rpoly.certify_r(S.N, field.d_K),
            margin_certified=rpoly.margin_ratio > margin * field.d_K ** 2,
            rounds=rounds,
        )
        logger.info(f"Structured: degree {rpoly.degree} polynomial vanishing on {fraction:.4f} of S at r={r}")
        return outcome

    logger.info(f"No structure found up to r={settings.r_escalation_cap}")
    return ReconstructionOutcome(
        OutcomeKind.NO_STRUCTURE, ratio=ratio, threshold=threshold, witness=witness, rounds=rounds,
        diagnostics={"schedule": schedule, "start_degree": start,
                     "transcript": witness.transcript.to_dict() if witness else None},
    )


def reconstruct_partitioned(S: PointSet, params: SieveParams, P: Optional[PrimeSet] = None,
                            homogeneous: bool = False, rounds: Optional[int] = None) -> ReconstructionOutcome:
    """Cover S by zero sets: reconstruct, remove the vanishing points, repeat on the remainder."""
    rounds = settings.partition_rounds if rounds is None else rounds
    target = 1 - params.eta
    remaining = list(range(len(S)))
    cover: List[RPolynomial] = []
    history = []

    for step in range(rounds):
        if len(remaining) <= (1 - target) * len(S):
            break
        sub = S.subset(remaining)
        try:
            outcome = reconstruct(sub, params, P, homogeneous)
        except HypothesisFailed as e:
            history.append({"round": step, "size": len(sub), "stopped": str(e)})
            break
        history.append({"round": step, "size": len(sub), "kind": outcome.kind.value})
        if outcome.kind != OutcomeKind.STRUCTURED:
            break
        cover.append(outcome.polynomial)
        mask = vanish_mask(sub, outcome.polynomial.poly)
        remaining = [i for i, hit in zip(remaining, mask) if not hit]

    covered = (len(S) - len(remaining)) / len(S) if len(S) else 1.0
    if cover and covered >= target:
        product = cover[0].poly
        for rpoly in cover[1:]:
            product = product * rpoly.poly
        combined = RPolynomial(product, sum(p.r for p in cover), homogeneous)
        return ReconstructionOutcome(
            OutcomeKind.STRUCTURED, polynomial=combined, polynomials=cover, fraction=covered,
            r_certified=combined.certify_r(S.N, S.field.d_K), rounds=history,
        )
    ratio, threshold = smallness(S, params)
    kind = OutcomeKind.SMALL if len(S) < threshold else OutcomeKind.NO_STRUCTURE
    return ReconstructionOutcome(kind, ratio=ratio, threshold=threshold, polynomials=cover,
                                 fraction=covered, rounds=history)
