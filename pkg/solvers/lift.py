import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from arithmetic.field import GlobalField, RingElement
from arithmetic.heights import HeightValue, canonical_projective, height_affine
from exceptions import UnsupportedField

logger = logging.getLogger(__name__)

EXACT_RANK_LIMIT = 4


def lift_point(field: GlobalField, x: Sequence) -> Tuple[RingElement, ...]:
    """Integral representative of a projective point: denominators and common factors cleared."""
    # class number one: every ideal class is trivial, so no representative ideals are needed
    logger.debug(f"Lifting {tuple(x)} over {field} with the trivial class representative")
    return canonical_projective(field, x)


def lift_height(field: GlobalField, x: Sequence) -> HeightValue:
    """H_K(1 : y) of the lift y."""
    return height_affine(field, lift_point(field, x))


@dataclass(frozen=True)
class SUnitTarget:
    """Positive targets at the archimedean place followed by one per listed prime."""

    primes: Tuple[int, ...]
    targets: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "primes", tuple(int(p) for p in self.primes))
        object.__setattr__(self, "targets", tuple(float(x) for x in self.targets))
        if len(self.targets) != len(self.primes) + 1:
            raise ValueError(f"Expected {len(self.primes) + 1} targets, got {len(self.targets)}")
        if any(x <= 0 for x in self.targets):
            raise ValueError("Targets must be positive")
        if len(set(self.primes)) != len(self.primes) or any(p < 2 for p in self.primes):
            raise ValueError("Primes must be distinct and at least 2")

    @property
    def places(self) -> List[str]:
        return ["inf"] + [str(p) for p in self.primes]


@dataclass
class SUnitResult:
    exponents: Tuple[int, ...]
    sign: int
    t: float
    distance: float
    C_W: float
    exact: bool

    def to_dict(self) -> Dict:
        return {
            "exponents": list(self.exponents),
            "sign": self.sign,
            "t": self.t,
            "distance": self.distance,
            "C_W": self.C_W,
            "exact": self.exact,
        }


def sunit_log_vector(primes: Sequence[int], exponents: Sequence[int]) -> List[float]:
    """log ||eps||_v over S = {inf} + primes for eps = prod p^a."""
    logs = [a * math.log(p) for p, a in zip(primes, exponents)]
    return [math.fsum(logs)] + [-value for value in logs]


def sunit_norms(primes: Sequence[int], exponents: Sequence[int]) -> List[Fraction]:
    """Exact ||eps||_v; their product is 1."""
    infinite = Fraction(1)
    finite = []
    for p, a in zip(primes, exponents):
        infinite *= Fraction(p) ** a
        finite.append(Fraction(p) ** -a)
    return [infinite] + finite


def _spread(logs: Sequence[float], primes: Sequence[int], exponents: Sequence[int]) -> Tuple[float, float]:
    residuals = [y - l for y, l in zip(logs, sunit_log_vector(primes, exponents))]
    high, low = max(residuals), min(residuals)
    return (high - low) / 2, (high + low) / 2


def _local_search(logs, primes, start: List[int]) -> List[int]:
    best = list(start)
    best_value = _spread(logs, primes, best)[0]
    improved = True
    while improved:
        improved = False
        for i in range(len(best)):
            for step in (-1, 1):
                candidate = list(best)
                candidate[i] += step
                value = _spread(logs, primes, candidate)[0]
                if value < best_value - 1e-15:
                    best, best_value, improved = candidate, value, True
    return best


def sunit_reduce(field: GlobalField, target: SUnitTarget) -> SUnitResult:
    """S-unit eps and scale t with log x_v close to log t + log ||eps||_v at every place of S."""
    if not field.is_rational:
        raise UnsupportedField("S-unit reduction is implemented over Q only")

    primes = target.primes
    logs = [math.log(x) for x in target.targets]
    log_primes = [math.log(p) for p in primes]
    C_W = math.fsum(log_primes) / 2
    # residuals always sum to sum(logs), so their mean is fixed
    mean = math.fsum(logs) / len(logs)

    start = [round((mean - y) / L) for y, L in zip(logs[1:], log_primes)]
    start = _local_search(logs, primes, start)
    radius = _spread(logs, primes, start)[0]

    exact = len(primes) <= EXACT_RANK_LIMIT
    best = start
    if exact and primes:
        ranges = [
            range(math.floor((mean - 2 * radius - y) / L) - 1, math.ceil((mean + 2 * radius - y) / L) + 2)
            for y, L in zip(logs[1:], log_primes)
        ]
        candidates = sorted(itertools.product(*ranges), key=lambda a: (sum(abs(v) for v in a), a))
        best = list(min(candidates, key=lambda a: round(_spread(logs, primes, a)[0], 12)))

    distance, center = _spread(logs, primes, best)
    result = SUnitResult(tuple(best), 1, math.exp(center), distance, C_W, exact)
    if distance > C_W + 1e-9:
        logger.warning(f"S-unit distance {distance:.4f} exceeds C_W={C_W:.4f}")
    logger.debug(f"S-unit reduction over S={target.places}: {result.to_dict()}")
    return result
