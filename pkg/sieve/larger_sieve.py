import logging
import math
from collections import Counter
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Tuple

import numpy as np

from arithmetic.field import (
    FieldConstants, PrimeOfK, PrimeSet, field_constants, primes_up_to, weight_w,
)
from config import settings
from exceptions import BoundTooSmall
from sieve.point_set import PointSet

logger = logging.getLogger(__name__)

PAIR_CHUNK = 2048


@dataclass(frozen=True)
class ResidueOccupancy:
    prime: PrimeOfK
    classes: Dict[tuple, int]
    occupancy: int


def residue_class_sizes(S: PointSet, p: PrimeOfK) -> ResidueOccupancy:
    """|S(a, p)| for every residue tuple a, plus the occupancy |[S]_p|."""
    classes = dict(S.residue_classes(p))
    return ResidueOccupancy(p, classes, len(classes))


@dataclass
class PrimeAudit:
    prime: PrimeOfK
    norm: int
    pair_count: int
    class_square_count: int

    @property
    def log_norm(self) -> float:
        return math.log(self.norm)


@dataclass
class SieveAudit:
    size: int
    N: float
    Q: int
    per_prime: List[PrimeAudit] = dc_field(default_factory=list)
    lhs_pairs: float = 0.0
    lhs_classes: float = 0.0
    rhs: float = 0.0
    holds: bool = True

    @property
    def identity_exact(self) -> bool:
        return all(row.pair_count == row.class_square_count for row in self.per_prime)

    def to_rows(self) -> List[Dict]:
        return [
            {
                "prime": str(row.prime),
                "norm": row.norm,
                "pair_count": row.pair_count,
                "class_square_count": row.class_square_count,
                "log_norm": row.log_norm,
            }
            for row in self.per_prime
        ]

    def to_dict(self) -> Dict:
        return {
            "size": self.size,
            "N": self.N,
            "Q": self.Q,
            "lhs_pairs": self.lhs_pairs,
            "lhs_classes": self.lhs_classes,
            "rhs": self.rhs,
            "holds": self.holds,
            "identity_exact": self.identity_exact,
            "per_prime": self.to_rows(),
        }


def _congruent_pairs(codes: np.ndarray) -> int:
    """Ordered pairs i != j with equal codes, by a chunked pair scan."""
    n = len(codes)
    total = 0
    for start in range(0, n, PAIR_CHUNK):
        block = codes[start:start + PAIR_CHUNK]
        total += int((block[:, None] == codes[None, :]).sum())
    return total - n


def larger_sieve_audit(S: PointSet, Q: int) -> SieveAudit:
    """Count congruent pairs two ways and compare with 3|S|^2 log N.

    For d > 1 the congruence is taken on the first coordinate.
    """
    if S.N <= 2 ** S.field.d_K:
        raise BoundTooSmall(f"The larger sieve needs N > {2 ** S.field.d_K}, got {S.N}")

    primes = primes_up_to(S.field, Q) if Q >= 2 else PrimeSet(S.field, ())
    audit = SieveAudit(size=len(S), N=float(S.N), Q=Q)

    for p in primes:
        first = [res[0] for res in S.point_residues(p)] if len(S) else []
        counts = Counter(first)
        class_square = sum(c * c for c in counts.values()) - len(S)

        codes: Dict[object, int] = {}
        encoded = np.array([codes.setdefault(r, len(codes)) for r in first], dtype=np.int64)
        pairs = _congruent_pairs(encoded) if len(S) else 0

        audit.per_prime.append(PrimeAudit(p, p.norm, pairs, class_square))

    audit.lhs_pairs = math.fsum(row.pair_count * row.log_norm for row in audit.per_prime)
    audit.lhs_classes = math.fsum(row.class_square_count * row.log_norm for row in audit.per_prime)
    audit.rhs = 3 * len(S) ** 2 * math.log(float(S.N))
    audit.holds = audit.lhs_classes <= audit.rhs + settings.comparison_tolerance

    if not audit.identity_exact:
        logger.error(f"Pair and class-square counts disagree for |S|={len(S)}, Q={Q}")
        raise RuntimeError("Double-counting identity failed")

    logger.debug(f"Larger sieve audit |S|={len(S)} Q={Q}: lhs={audit.lhs_classes:.4f} rhs={audit.rhs:.4f}")
    return audit


# Constants

def sieve_constant_c1(kappa: float, mu: float, gamma: float, constants: FieldConstants) -> float:
    """C1 = kappa * mu^2 * gamma / c5."""
    _check_positive(kappa=kappa, mu=mu, gamma=gamma)
    return kappa * mu ** 2 * gamma / constants.c5


def sieve_constant_c2(alpha: float, kappa: float, gamma: float, constants: FieldConstants) -> float:
    """C2 = max{2 alpha, 2 (12 alpha / (c1^2 gamma kappa))^(2 c3 / (gamma kappa))}."""
    _check_positive(alpha=alpha, kappa=kappa, gamma=gamma)
    base = 12 * alpha / (constants.c1 ** 2 * gamma * kappa)
    return max(2 * alpha, 2 * base ** (2 * constants.c3 / (gamma * kappa)))


def sieve_constants(kind: str, constants: FieldConstants, **params) -> float:
    if kind == "C1":
        return sieve_constant_c1(params["kappa"], params["mu"], params["gamma"], constants)
    if kind == "C2":
        return sieve_constant_c2(params["alpha"], params["kappa"], params["gamma"], constants)
    raise ValueError(f"Unknown sieve constant '{kind}'")


def inner_c1(kappa: float, eps: float, d: int, constants: FieldConstants) -> float:
    """kappa * eps / (2^7 c5 d), the C1 value the generic-subset argument feeds in."""
    return kappa * eps / (2 ** 7 * constants.c5 * d)


def _check_positive(**params):
    for name, value in params.items():
        if value <= 0:
            raise ValueError(f"Parameter {name} must be positive, got {value}")
    if "gamma" in params and params["gamma"] > 1:
        raise ValueError(f"gamma must be at most 1, got {params['gamma']}")


# Distribution statistics

def badly_distributed_primes(S: PointSet, alpha: float, k: int, P: PrimeSet) -> Tuple[PrimeSet, float]:
    """Primes where S occupies fewer than alpha * N(p)^k classes, and their weight share."""
    if not 0 <= k <= S.dim:
        raise ValueError(f"k must lie in [0, {S.dim}], got {k}")
    bad = [p for p in P if len(S.residue_classes(p)) < alpha * p.norm ** k]
    P_bad = P.subset(bad)
    total = weight_w(P)
    ratio = weight_w(P_bad) / total if total > 0 else 0.0
    return P_bad, ratio


def occupancy_table(S: PointSet, P: PrimeSet, k: int = 1) -> List[Dict]:
    rows = []
    for p in P:
        occupancy = residue_class_sizes(S, p).occupancy
        rows.append({
            "prime": str(p),
            "norm": p.norm,
            "occupancy": occupancy,
            "size": len(S),
            "density": occupancy / p.norm ** k,
        })
    return rows


def few_classes_check(X: PointSet, P: PrimeSet, alpha: float, kappa: float, mu: float,
                      gamma: float, constants: Optional[FieldConstants] = None) -> Dict:
    """Check a set concentrated in few classes for many primes has fewer than Q elements.

    Hypotheses: w(P) >= kappa w(P(Q)) with Q = floor(N^gamma), and for every
    p in P some floor(alpha N(p)) classes hold at least mu |X| elements.
    """
    constants = constants or field_constants(X.field)
    Q = math.floor(float(X.N) ** gamma)
    all_primes = primes_up_to(X.field, Q) if Q >= 2 else PrimeSet(X.field, ())

    concentrated = True
    for p in P:
        counts = sorted(X.residue_classes(p).values(), reverse=True)
        covered = sum(counts[:math.floor(alpha * p.norm)])
        concentrated &= covered >= mu * len(X)

    weight_ok = weight_w(P) >= kappa * weight_w(all_primes) - settings.comparison_tolerance
    C1 = sieve_constant_c1(kappa, mu, gamma, constants)
    hypotheses = concentrated and weight_ok and alpha <= C1

    return {
        "Q": Q,
        "size": len(X),
        "C1": C1,
        "hypotheses": hypotheses,
        "conclusion": len(X) < Q,
        "holds": (not hypotheses) or len(X) < Q,
    }


def occupancy_bound_check(S: PointSet, P: PrimeSet, alpha: float, kappa: float, gamma: float,
                          constants: Optional[FieldConstants] = None) -> Dict:
    """Check a set occupying fewer than alpha classes for all p in P has at most C2 elements."""
    constants = constants or field_constants(S.field)
    Q = math.floor(float(S.N) ** gamma)
    all_primes = primes_up_to(S.field, Q) if Q >= 2 else PrimeSet(S.field, ())

    few_classes = all(len(S.residue_classes(p)) < alpha for p in P)
    weight_ok = weight_w(P) >= kappa * weight_w(all_primes) - settings.comparison_tolerance
    C2 = sieve_constant_c2(alpha, kappa, gamma, constants)
    hypotheses = few_classes and weight_ok

    return {
        "Q": Q,
        "size": len(S),
        "C2": C2,
        "hypotheses": hypotheses,
        "conclusion": len(S) <= C2,
        "holds": (not hypotheses) or len(S) <= C2,
    }
