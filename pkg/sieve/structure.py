import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from arithmetic.field import (
    FieldConstants, GlobalField, PrimeOfK, PrimeSet, RingElement, field_constants,
    primes_up_to, reduce_mod, weight_w,
)
from arithmetic.heights import BoundedBox, count_bounded, scalar_elements
from config import settings
from exceptions import BoxTooLarge, EmptySet, HypothesisFailed
from sieve.larger_sieve import sieve_constant_c2
from sieve.point_set import PointSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SieveParams:
    d: int
    k: int
    eps: float
    alpha: float
    eta: float
    kappa: float
    N: Fraction
    c: float = 1.0
    mode: str = "pragmatic"
    Q: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "N", Fraction(self.N))
        if not 0 <= self.k < self.d:
            raise ValueError(f"Need 0 <= k < d, got k={self.k}, d={self.d}")
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        for name in ("eps", "alpha", "kappa", "c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.mode not in ("paper", "pragmatic"):
            raise ValueError(f"Unknown constant mode '{self.mode}'")
        if self.Q is None:
            # floor rule; recursion passes Q through unchanged
            object.__setattr__(self, "Q", math.floor(float(self.N) ** (self.eps / (2 * self.d))))

    @classmethod
    def create(cls, d: int, k: int, N, eps: float = 0.5, alpha: float = 1.0, eta: float = 0.5,
               kappa: float = 0.5, c: Optional[float] = None, mode: Optional[str] = None) -> "SieveParams":
        return cls(d=d, k=k, eps=eps, alpha=alpha, eta=eta, kappa=kappa, N=Fraction(N),
                   c=settings.smallness_constant if c is None else c,
                   mode=mode or settings.constant_mode)

    @property
    def h(self) -> int:
        return self.d - self.k

    @property
    def nu(self) -> float:
        return (self.d - 1) / self.d

    @property
    def log_N(self) -> float:
        return math.log(float(self.N))

    def power_of_N(self, exponent: float) -> float:
        return float(self.N) ** exponent

    def descend(self, alpha: float, c: float) -> "SieveParams":
        """Parameters for the sections: one dimension less, nu*eps, kappa/2, same Q."""
        return replace(self, d=self.d - 1, k=self.k - 1, eps=self.nu * self.eps,
                       kappa=self.kappa / 2, alpha=alpha, c=c)

    def to_dict(self) -> Dict:
        return {
            "d": self.d, "k": self.k, "h": self.h, "eps": self.eps, "alpha": self.alpha,
            "eta": self.eta, "kappa": self.kappa, "N": str(self.N), "Q": self.Q,
            "c": self.c, "mode": self.mode, "nu": self.nu,
        }


class StructureConstants:
    """Constants of the generic-family and characteristic-set constructions.

    'paper' evaluates the printed formulas; 'pragmatic' substitutes the
    configured values so that small N reaches the nontrivial branches.
    """

    def __init__(self, params: SieveParams, constants: FieldConstants, d_K: int = 1):
        self.params = params
        self.constants = constants
        self.d_K = d_K

    @property
    def paper(self) -> bool:
        return self.params.mode == "paper"

    def b1_generic(self) -> float:
        p = self.params
        if self.paper:
            return 2 ** 8 * p.alpha * self.constants.c5 * p.d / (p.kappa * p.eps)
        return settings.pragmatic_b1_factor * p.alpha

    def b1_characteristic(self) -> float:
        p = self.params
        if self.paper:
            return 2 ** 7 * p.alpha * self.constants.c5 * p.d / (p.kappa * p.eps)
        return settings.pragmatic_b1_factor * p.alpha

    def section_constant_generic(self) -> float:
        p = self.params
        if self.paper:
            return p.c / (8 * self.constants.c_count) * ((1 - p.nu) * p.eps / self.d_K) ** self.d_K
        return settings.pragmatic_section_floor

    def section_constant_characteristic(self) -> float:
        p = self.params
        if self.paper:
            return 3 * p.c / (2 ** (3 * p.d + 4) * self.constants.c_count) * ((1 - p.nu) * p.eps) ** self.d_K
        return settings.pragmatic_section_floor

    def section_floor(self, c_prime: float) -> float:
        p = self.params
        return c_prime * p.power_of_N(p.d - p.h - 2 + p.nu * p.eps)

    def generic_chain(self) -> Tuple[float, float, float]:
        """(B, kappa1, c1) for the current level, independent of the data."""
        p = self.params
        if p.d <= p.h:
            return 2.0, 1.0, 1.0
        b1 = self.b1_generic()
        child = StructureConstants(p.descend(b1, self.section_constant_generic()), self.constants, self.d_K)
        B_sub, kappa1_sub, c1_sub = child.generic_chain()
        kappa1 = kappa1_sub / 4
        c1 = kappa1_sub * c1_sub / 2 ** (p.d + 4)
        if self.paper:
            B = 2 ** 12 * p.d * self.constants.c5 * B_sub / (p.kappa * p.eps * kappa1_sub * c1_sub)
        else:
            beta = kappa1_sub / 4
            B = 4 * B_sub * b1 / (c1_sub * beta * p.alpha)
        return B, kappa1, c1

    def delta1(self, kappa1: float, kappa3: float, c4: float, delta0: float) -> float:
        if not self.paper:
            return settings.pragmatic_delta1
        p = self.params
        c5_prime = (p.kappa / 2 ** (3 * p.d + 6) * self.constants.c2 * (p.eps / p.d)
                    * c4 * kappa1 * kappa3 * delta0)
        return c5_prime / 4

    def section_count(self, r: int, delta1: float) -> int:
        m = math.ceil(4 * r * self.d_K / delta1)
        if not self.paper:
            m = min(m, settings.pragmatic_sections)
        return max(m, 1)


# Witnesses and transcripts

@dataclass
class GenericityWitness:
    prime: PrimeOfK
    B: float
    l: int
    members: List[int]
    worst_class: tuple
    worst_density: float

    def to_dict(self, field: GlobalField) -> Dict:
        return {
            "prime": field.encode(self.prime.generator),
            "norm": self.prime.norm,
            "B": self.B,
            "l": self.l,
            "size": len(self.members),
            "worst_class": [str(a) for a in self.worst_class],
            "worst_density": self.worst_density,
        }


@dataclass
class StructureTranscript:
    kind: str
    d: int
    h: int
    size: int
    steps: Dict = dc_field(default_factory=dict)
    constants: Dict = dc_field(default_factory=dict)
    warnings: List[str] = dc_field(default_factory=list)
    children: List["StructureTranscript"] = dc_field(default_factory=list)

    def warn(self, message: str):
        logger.warning(message)
        self.warnings.append(message)

    def all_warnings(self) -> List[str]:
        out = list(self.warnings)
        for child in self.children:
            out.extend(child.all_warnings())
        return out

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "h": self.h,
            "size": self.size,
            "steps": self.steps,
            "constants": self.constants,
            "warnings": self.warnings,
            "children": [child.to_dict() for child in self.children],
        }


@dataclass
class GenericFamily:
    S: PointSet
    primes: PrimeSet
    witnesses: Dict[PrimeOfK, GenericityWitness]
    B: float
    kappa1: float
    c1: float
    first_coordinate: int
    sections: Dict[RingElement, Dict[PrimeOfK, List[int]]]
    transcript: StructureTranscript

    def to_dict(self) -> Dict:
        return {
            "primes": self.primes.to_dict(),
            "B": self.B,
            "kappa1": self.kappa1,
            "c1": self.c1,
            "first_coordinate": self.first_coordinate,
            "witnesses": [w.to_dict(self.S.field) for w in self.witnesses.values()],
            "transcript": self.transcript.to_dict(),
        }


@dataclass
class CharacteristicWitness:
    S: PointSet
    A: List[int]
    L: List[int]
    r: int
    delta: float
    c2: float
    transcript: StructureTranscript
    certified_against: List[Dict] = dc_field(default_factory=list)

    def points(self, indices: Iterable[int]) -> List[tuple]:
        return [self.S.points[i] for i in indices]

    def to_dict(self) -> Dict:
        return {
            "A_size": len(self.A),
            "L_size": len(self.L),
            "r": self.r,
            "delta": self.delta,
            "c2": self.c2,
            "A": [[self.S.field.encode(a) for a in self.S.points[i]] for i in self.A],
            "certified_against": self.certified_against,
            "transcript": self.transcript.to_dict(),
        }


# Index views over a root set, reusing its residue caches

class _View:
    def __init__(self, root: PointSet, indices: Sequence[int], coords: Sequence[int]):
        self.root = root
        self.indices = list(indices)
        self.coords = tuple(coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __len__(self) -> int:
        return len(self.indices)

    def first(self, i: int) -> RingElement:
        return self.root.points[i][self.coords[0]]

    def residue(self, i: int, p: PrimeOfK) -> tuple:
        full = self.root.point_residues(p)[i]
        return tuple(full[c] for c in self.coords)

    def first_residue(self, i: int, p: PrimeOfK):
        return self.root.point_residues(p)[i][self.coords[0]]

    def restrict(self, indices: Iterable[int]) -> "_View":
        return _View(self.root, indices, self.coords)

    def move_to_front(self, position: int) -> "_View":
        coords = (self.coords[position],) + self.coords[:position] + self.coords[position + 1:]
        return _View(self.root, self.indices, coords)

    def drop_first(self, indices: Iterable[int]) -> "_View":
        return _View(self.root, indices, self.coords[1:])

    def sections(self, indices: Optional[Iterable[int]] = None) -> Dict[RingElement, List[int]]:
        groups: Dict[RingElement, List[int]] = defaultdict(list)
        for i in (self.indices if indices is None else indices):
            groups[self.first(i)].append(i)
        field = self.root.field
        return {x: groups[x] for x in sorted(groups, key=field.sort_key)}

    def as_point_set(self) -> PointSet:
        points = [tuple(self.root.points[i][c] for c in self.coords) for i in self.indices]
        return PointSet(self.root.field, self.root.N, points, self.dim, validate=False)


def _residue_sort_key(field: GlobalField, residue: tuple):
    return tuple(field.residue_key(a) for a in residue)


# Elementary operations

def section(S: PointSet, x: RingElement) -> PointSet:
    """S_x: the points of S with first coordinate x."""
    return S.subset(S.section_indices(S.field.element(x)))


def _class_profile(view: _View, p: PrimeOfK, indices: Sequence[int]) -> Tuple[tuple, int]:
    counts = Counter(view.residue(i, p) for i in indices)
    field = view.root.field
    top = max(counts.values())
    worst = min((a for a, c in counts.items() if c == top), key=lambda a: _residue_sort_key(field, a))
    return worst, top


def _is_generic(view: _View, p: PrimeOfK, indices: Sequence[int], B: float, l: int) -> Tuple[bool, tuple, float]:
    if not indices:
        raise EmptySet("Genericity is undefined for the empty set")
    worst, top = _class_profile(view, p, indices)
    density = top / len(indices)
    return density < B / p.norm ** l, worst, density


def genericity_check(S: PointSet, p: PrimeOfK, B: float, l: int) -> Tuple[bool, tuple, float]:
    """True iff every residue class mod p holds fewer than B|S|/N(p)^l points."""
    view = _View(S, range(len(S)), range(S.dim))
    return _is_generic(view, p, view.indices, B, l)


def _exceptional(view: _View, indices: Sequence[int], p: PrimeOfK, B1: float, h: int,
                 alpha: float) -> Tuple[set, set]:
    by_first: Dict[object, List[int]] = defaultdict(list)
    for i in indices:
        by_first[view.first_residue(i, p)].append(i)

    occupancy_threshold = B1 * p.norm ** (view.dim - h - 1)
    size_threshold = B1 / (alpha * p.norm) * len(indices)
    E1, E2 = set(), set()
    for a, members in by_first.items():
        if len({view.residue(i, p) for i in members}) >= occupancy_threshold:
            E1.add(a)
        if len(members) >= size_threshold:
            E2.add(a)
    return E1, E2


def exceptional_classes(S: PointSet, p: PrimeOfK, B1: float, h: int, alpha: float = 1.0) -> Tuple[set, set]:
    """First-coordinate residues with too many occupied classes (E1) or too many points (E2)."""
    view = _View(S, range(len(S)), range(S.dim))
    return _exceptional(view, view.indices, p, B1, h, alpha)


def _concentrated_weight(field: GlobalField, x: RingElement, P: Sequence[PrimeOfK],
                         E: Dict[PrimeOfK, set]) -> float:
    return math.fsum(
        math.log(p.norm) / p.norm
        for p in P
        if reduce_mod(field, (x,), p)[0] in E.get(p, ())
    )


def _concentrated_support(view: _View, indices: Sequence[int], P: PrimeSet,
                          E: Dict[PrimeOfK, set]) -> set:
    """The members of X that occur as first coordinates of the given points."""
    total = weight_w(P)
    if total == 0:
        return set()
    primes = list(P)
    firsts = {view.first(i) for i in indices}
    field = view.root.field
    return {
        x for x in firsts
        if _concentrated_weight(field, x, primes, E) >= total / 2 - settings.comparison_tolerance
    }


def concentrated_lines(S: PointSet, P: PrimeSet, B1: float, h: int, alpha: float = 1.0,
                       budget: Optional[int] = None) -> FrozenSet[RingElement]:
    """X: elements of [N] lying in the exceptional classes for at least half the prime weight."""
    budget = settings.box_budget if budget is None else budget
    view = _View(S, range(len(S)), range(S.dim))
    E = {}
    for p in P:
        E1, E2 = _exceptional(view, view.indices, p, B1, h, alpha)
        E[p] = E1 | E2
    total = weight_w(P)
    if total == 0 or not any(E.values()):
        return frozenset()

    field = S.field
    box = BoundedBox(field, S.N)
    count = count_bounded(box)
    if count > budget:
        raise BoxTooLarge(f"Scanning [N] with {count} elements exceeds budget {budget}")

    if field.is_rational:
        n = math.floor(S.N)
        xs = np.arange(-n, n + 1, dtype=np.int64)
        weight = np.zeros(len(xs))
        for p in P:
            if E[p]:
                hit = np.isin(xs % p.generator, np.fromiter(E[p], dtype=np.int64))
                weight += hit * (math.log(p.norm) / p.norm)
        chosen = xs[weight >= total / 2 - settings.comparison_tolerance]
        return frozenset(int(x) for x in chosen)

    primes = list(P)
    return frozenset(
        x for x in scalar_elements(field, S.N)
        if _concentrated_weight(field, x, primes, E) >= total / 2 - settings.comparison_tolerance
    )


def _spread_coordinate(view: _View, Q: int, fraction: float, transcript: StructureTranscript) -> Tuple[int, List[int]]:
    """Shrink to the largest fibres coordinate by coordinate until one projection is spread.

    Returns (position, kept indices) such that every subset holding at least
    `fraction` of the kept points projects onto at least Q values at position.
    """
    current = list(view.indices)
    field = view.root.field
    attempts = []
    for position in range(view.dim):
        coord = view.coords[position]
        counts = Counter(view.root.points[i][coord] for i in current)
        fibres = sorted(counts.items(), key=lambda item: (-item[1], field.sort_key(item[0])))
        need = math.ceil(fraction * len(current))
        covered, minimal = 0, 0
        for _, size in fibres:
            if covered >= need:
                break
            covered += size
            minimal += 1
        attempts.append({"position": position, "size": len(current), "min_projection": minimal})
        if minimal >= Q:
            transcript.steps["coordinate_pruning"] = attempts
            return position, current
        keep = {value for value, _ in fibres[:minimal]}
        current = [i for i in current if view.root.points[i][coord] in keep]

    transcript.steps["coordinate_pruning"] = attempts
    raise HypothesisFailed(
        f"No coordinate spreads over Q={Q} values after pruning to {len(current)} points; N is too small"
    )


def spread_coordinate_prune(S: PointSet, Q: int, fraction: float = 0.5) -> Tuple[int, List[int], List[Dict]]:
    """(coordinate, kept indices, attempts) of the coordinate pruning search."""
    transcript = StructureTranscript("coordinate_pruning", S.dim, 0, len(S))
    view = _View(S, range(len(S)), range(S.dim))
    position, kept = _spread_coordinate(view, Q, fraction, transcript)
    return position, kept, transcript.steps["coordinate_pruning"]


def _prime_weight_share(P: Iterable[PrimeOfK], total: float) -> float:
    return weight_w(P) / total if total > 0 else 1.0


# Generic families

@dataclass
class _GenericResult:
    primes: List[PrimeOfK]
    members: Dict[PrimeOfK, List[int]]
    B: float
    kappa1: float
    c1: float
    first_coordinate: int
    sections: Dict[RingElement, Dict[PrimeOfK, List[int]]]
    transcript: StructureTranscript


def _generic(view: _View, P: PrimeSet, params: SieveParams, constants: FieldConstants) -> _GenericResult:
    d, h = view.dim, params.h
    transcript = StructureTranscript("generic", d, h, len(view))
    regime = StructureConstants(params, constants, view.root.field.d_K)
    B, kappa1, c1 = regime.generic_chain()

    if d <= h:
        members = {p: list(view.indices) for p in P}
        transcript.constants = {"B": B, "kappa1": kappa1, "c1": c1}
        return _GenericResult(list(P), members, B, kappa1, c1, view.coords[0] if view.coords else 0,
                              {}, transcript)

    threshold = params.c * params.power_of_N(d - h - 1 + params.eps)
    transcript.steps["size_threshold"] = threshold
    if len(view) < threshold:
        raise HypothesisFailed(f"|S|={len(view)} is below c*N^(d-h-1+eps)={threshold:.3f}")

    position, kept = _spread_coordinate(view, params.Q, 0.5, transcript)
    pruned = view.move_to_front(position).restrict(kept)

    B1 = regime.b1_generic()
    E = {}
    for p in P:
        E1, E2 = _exceptional(pruned, pruned.indices, p, B1, h, params.alpha)
        E[p] = E1 | E2
    X = _concentrated_support(pruned, pruned.indices, P, E)
    if len(X) >= params.Q:
        transcript.warn(f"Concentrated set has {len(X)} >= Q={params.Q} members at d={d}")
    S_bar = [i for i in pruned.indices if pruned.first(i) not in X]

    c_prime = regime.section_constant_generic()
    floor_size = regime.section_floor(c_prime)
    kept_sections = {x: idx for x, idx in pruned.sections(S_bar).items() if len(idx) >= floor_size}
    S_prime_size = sum(len(idx) for idx in kept_sections.values())
    if S_prime_size < len(view) / 4:
        transcript.warn(f"Sections above the floor hold {S_prime_size} < |S|/4 points at d={d}")

    transcript.steps.update({
        "pruned": len(pruned), "B1": B1, "X": len(X), "S_bar": len(S_bar),
        "section_floor": floor_size, "sections": len(kept_sections), "S_prime": S_prime_size,
    })

    sub_params = params.descend(B1, c_prime)
    field = view.root.field
    children: Dict[RingElement, _GenericResult] = {}
    sub_sizes: Dict[RingElement, int] = {}
    for x, idx in kept_sections.items():
        P_x = P.subset(p for p in P if reduce_mod(field, (x,), p)[0] not in E[p])
        try:
            child = _generic(pruned.drop_first(idx), P_x, sub_params, constants)
        except HypothesisFailed as e:
            transcript.warn(f"Section x={x} skipped: {e}")
            continue
        children[x] = child
        sub_sizes[x] = len(idx)
        transcript.children.append(child.transcript)

    S_prime_total = sum(sub_sizes.values())
    _, kappa1_sub, _ = StructureConstants(sub_params, constants, field.d_K).generic_chain()
    beta = kappa1_sub / 4

    prime_mass = Counter()
    for x, child in children.items():
        for p in child.primes:
            prime_mass[p] += sub_sizes[x]
    selected = [p for p in P if prime_mass[p] >= beta * S_prime_total and prime_mass[p] > 0]

    members: Dict[PrimeOfK, List[int]] = {}
    sections: Dict[RingElement, Dict[PrimeOfK, List[int]]] = {}
    for x, child in children.items():
        sections[x] = {p: child.members[p] for p in child.primes}
    for p in selected:
        members[p] = sorted(i for x, child in children.items() if p in child.members for i in child.members[p])

    certified = []
    for p in selected:
        ok, _, density = _is_generic(pruned, p, members[p], B, d - h) if members[p] else (False, (), 1.0)
        if ok:
            certified.append(p)
        else:
            transcript.warn(f"Prime {p} dropped: worst class density {density:.4f} fails (B={B:.4g}, l={d - h})")

    total_weight = weight_w(P)
    observed_kappa1 = _prime_weight_share(certified, total_weight)
    observed_c1 = min((len(members[p]) / len(view) for p in certified), default=0.0)
    if observed_kappa1 < kappa1:
        transcript.warn(f"w(P')/w(P)={observed_kappa1:.4f} below kappa1={kappa1:.4g}; recording the observed value")
    if observed_c1 < c1:
        transcript.warn(f"min |G_p|/|S|={observed_c1:.4f} below c1={c1:.4g}; recording the observed value")

    transcript.constants = {
        "B": B, "kappa1_formula": kappa1, "c1_formula": c1,
        "kappa1": min(kappa1, observed_kappa1), "c1": min(c1, observed_c1), "beta": beta,
    }
    return _GenericResult(
        certified, {p: members[p] for p in certified}, B,
        min(kappa1, observed_kappa1), min(c1, observed_c1),
        pruned.coords[0], sections, transcript,
    )


def build_generic_family(S: PointSet, P: PrimeSet, params: SieveParams) -> GenericFamily:
    """Primes P' and subsets G_p(S) that are (B, d-h)-generic modulo each p in P'."""
    if params.d != S.dim:
        raise ValueError(f"Parameters are for d={params.d} but the set has dimension {S.dim}")
    constants = field_constants(S.field)
    view = _View(S, range(len(S)), range(S.dim))
    result = _generic(view, P, params, constants)

    witnesses = {}
    for p in result.primes:
        ok, worst, density = _is_generic(view, p, result.members[p], result.B, params.d - params.h)
        witnesses[p] = GenericityWitness(p, result.B, params.d - params.h, result.members[p], worst, density)

    logger.info(f"Generic family: {len(result.primes)}/{len(P)} primes kept, B={result.B:.4g}, "
                f"kappa1={result.kappa1:.4g}, c1={result.c1:.4g}")
    return GenericFamily(
        S=S, primes=P.subset(result.primes), witnesses=witnesses, B=result.B,
        kappa1=result.kappa1, c1=result.c1, first_coordinate=result.first_coordinate,
        sections=result.sections, transcript=result.transcript,
    )


# Characteristic sets

def psi_weight(field: GlobalField, s: Sequence[RingElement], L: Iterable[Sequence[RingElement]], Q: int) -> float:
    """Sum of log N(p) over p in P(Q) for which some point of L is congruent to s."""
    L = [tuple(field.element(a) for a in pt) for pt in L]
    if not L or Q < 2:
        return 0.0
    s = tuple(field.element(a) for a in s)
    total = []
    for p in primes_up_to(field, Q):
        target = reduce_mod(field, s, p)
        if any(reduce_mod(field, x, p) == target for x in L):
            total.append(math.log(p.norm))
    return math.fsum(total)


def _psi_scores(view: _View, candidates: Sequence[int], L: Sequence[int], primes: PrimeSet) -> Dict[int, float]:
    scores = {i: [] for i in candidates}
    for p in primes:
        occupied = {view.residue(j, p) for j in L}
        log_norm = math.log(p.norm)
        for i in candidates:
            if view.residue(i, p) in occupied:
                scores[i].append(log_norm)
    return {i: math.fsum(values) for i, values in scores.items()}


@dataclass
class PigeonholeSets:
    """Sections meeting many residue classes for many primes."""
    per_prime: Dict[PrimeOfK, List[int]]
    skipped: List[PrimeOfK]
    members: List[int]
    kappa3: float


def _pigeonhole_rows(view: _View, p: PrimeOfK, G: List[int], B: float, B1: float, h: int) -> List[int]:
    """B[p]: members of the G_p-sections meeting some heavily hit class pattern."""
    field = view.root.field
    by_first: Dict[object, List[int]] = defaultdict(list)
    for i in G:
        by_first[view.first_residue(i, p)].append(i)
    G_sections = view.sections(G)

    exponent = view.dim - h - 1
    q_len = math.ceil(p.norm ** exponent / (2 * B))
    chosen_rows: set = set()
    for a, G_a in by_first.items():
        if len(G_a) < len(G) / (2 * p.norm):
            continue
        counts = Counter(view.residue(i, p) for i in G_a)
        ordered = sorted(counts.items(), key=lambda item: (-item[1], _residue_sort_key(field, item[0])))
        hits: Counter = Counter()
        for b, _ in ordered[:q_len]:
            rows = {view.first(i) for i in G_a if view.residue(i, p) == b}
            for x in rows:
                for i in G_sections[x]:
                    hits[i] += 1
        threshold = q_len / (4 * B1 * B)
        chosen_rows.update(view.first(i) for i in G_a if hits[i] >= threshold)
    return sorted(chosen_rows, key=field.sort_key)


def pigeonhole_sections(view: _View, S_prime: Sequence[int], P_prime: Sequence[PrimeOfK],
                        G: Dict[PrimeOfK, List[int]], B: float, B1: float, beta: float, c1: float,
                        h: int, transcript: StructureTranscript) -> PigeonholeSets:
    kappa3 = beta * c1 / (16 * B1 * B)
    sections = view.sections(S_prime)
    per_prime: Dict[PrimeOfK, List[int]] = {}
    skipped = []
    for p in P_prime:
        if p.norm ** (view.dim - h - 1) <= 2 * B:
            skipped.append(p)
            continue
        rows = _pigeonhole_rows(view, p, G[p], B, B1, h)
        per_prime[p] = [i for x in rows if x in sections for i in sections[x]]
    if skipped:
        transcript.warn(f"{len(skipped)} primes with N(p)^(d-h-1) <= 2B skipped in the pigeonhole step")

    weights: Dict[int, List[float]] = defaultdict(list)
    for p, rows in per_prime.items():
        for i in rows:
            weights[i].append(math.log(p.norm) / p.norm)
    w_total = weight_w(P_prime)
    members = [i for i in S_prime if w_total > 0 and math.fsum(weights[i]) >= kappa3 * w_total]
    transcript.steps["pigeonhole_sets"] = {"kappa3": kappa3, "skipped": len(skipped), "members": len(members)}
    return PigeonholeSets(per_prime, skipped, members, kappa3)


@dataclass
class _CharResult:
    A: List[int]
    L: List[int]
    c2: float
    transcript: StructureTranscript


def _characteristic(view: _View, P: PrimeSet, r: int, params: SieveParams, constants: FieldConstants) -> _CharResult:
    d, h = view.dim, params.h
    transcript = StructureTranscript("characteristic", d, h, len(view))
    regime = StructureConstants(params, constants, view.root.field.d_K)

    if d < h:
        if len(view):
            raise HypothesisFailed(f"A set of dimension {d} < h={h} must be empty")
        return _CharResult([], [], 0.0, transcript)

    if d == h:
        formula = sieve_constant_c2(params.alpha, params.kappa, params.eps / (2 * params.d), constants)
        if len(view) > formula:
            transcript.warn(f"|S|={len(view)} exceeds the occupancy bound C2={formula:.4g}")
        transcript.constants = {"c2_formula": formula}
        return _CharResult(list(view.indices), list(view.indices), max(formula, float(len(view))), transcript)

    position, S1 = _spread_coordinate(view, params.Q, 1 / 8, transcript)
    pruned = view.move_to_front(position).restrict(S1)

    big = len(S1) / params.Q if params.Q else float("inf")
    S2 = [i for idx in pruned.sections().values() if len(idx) <= big for i in idx]

    c_prime = regime.section_constant_characteristic()
    floor_size = regime.section_floor(c_prime)
    S3_sections = {x: idx for x, idx in pruned.sections(S2).items() if len(idx) >= floor_size}
    S3 = [i for idx in S3_sections.values() for i in idx]

    B1 = regime.b1_characteristic()
    E1 = {p: _exceptional(pruned, S3, p, B1, h, params.alpha)[0] for p in P}
    X = _concentrated_support(pruned, S3, P, E1)
    S4_sections = {x: idx for x, idx in S3_sections.items() if x not in X}

    transcript.steps.update({
        "S1": len(S1), "S2": len(S2), "S3": len(S3), "X": len(X),
        "S4": sum(len(idx) for idx in S4_sections.values()), "B1": B1, "section_floor": floor_size,
    })

    sub_params = params.descend(B1, c_prime)
    field = view.root.field
    A_x: Dict[RingElement, List[int]] = {}
    L_x: Dict[RingElement, List[int]] = {}
    P_x: Dict[RingElement, PrimeSet] = {}
    delta0 = 1.0
    c2_sub = 0.0
    for x, idx in S4_sections.items():
        primes_x = P.subset(p for p in P if reduce_mod(field, (x,), p)[0] not in E1[p])
        try:
            child = _characteristic(pruned.drop_first(idx), primes_x, r, sub_params, constants)
        except HypothesisFailed as e:
            transcript.warn(f"Section x={x} skipped: {e}")
            continue
        if not child.L:
            continue
        A_x[x], L_x[x], P_x[x] = child.A, child.L, primes_x
        delta0 = min(delta0, len(child.L) / len(idx))
        c2_sub = max(c2_sub, child.c2)
        transcript.children.append(child.transcript)

    S_prime = [i for x in L_x for i in L_x[x]]
    if not S_prime:
        raise HypothesisFailed(f"No section survived the filters at d={d}; N is too small")

    # generic families on every section, glued by prime
    generic_params = replace(sub_params, c=c_prime * delta0)
    B, kappa1_sub, c1_sub = StructureConstants(generic_params, constants, field.d_K).generic_chain()
    families: Dict[RingElement, _GenericResult] = {}
    for x, idx in L_x.items():
        try:
            families[x] = _generic(pruned.drop_first(idx), P_x[x], generic_params, constants)
        except HypothesisFailed as e:
            transcript.warn(f"No generic family on section x={x}: {e}")
    beta = kappa1_sub / 4
    mass = Counter()
    for x, family in families.items():
        for p in family.primes:
            mass[p] += len(L_x[x])
    P_prime = [p for p in P if mass[p] > 0 and mass[p] >= beta * len(S_prime)]
    G = {p: [i for x, fam in families.items() if p in fam.members for i in fam.members[p]] for p in P_prime}

    sets = pigeonhole_sections(pruned, S_prime, P_prime, G, B, B1, beta, c1_sub, h, transcript)

    c4 = beta * c1_sub / (2 ** 5 * (B1 * B) ** 2)
    delta1 = regime.delta1(kappa1_sub / 4, sets.kappa3, c4, delta0)
    m = regime.section_count(r, delta1)

    favoured = {pruned.first(i) for i in sets.members}
    ranked = [x for x in L_x if x in favoured]
    ranked += sorted((x for x in L_x if x not in favoured),
                     key=lambda x: (-len(L_x[x]), field.sort_key(x)))
    chosen = ranked[:m]
    if len(chosen) < m:
        transcript.warn(f"Only {len(chosen)} of m={m} sections available")
    if len([x for x in chosen if x in favoured]) < len(chosen):
        transcript.warn("Some chosen sections do not meet the pigeonhole set; chosen by size")

    A = sorted(i for x in chosen for i in A_x[x])
    chosen_members = [i for x in chosen for i in L_x[x]]
    all_primes = primes_up_to(field, params.Q) if params.Q >= 2 else PrimeSet(field, ())
    scores = _psi_scores(pruned, S_prime, chosen_members, all_primes)
    psi_threshold = 3 * r * field.d_K * params.log_N
    L = sorted(set(i for i in S_prime if scores[i] >= psi_threshold - settings.comparison_tolerance)
               | set(chosen_members))

    c2_formula = 4 * field.d_K / delta1 * c2_sub
    observed = len(A) / r ** (d - h)
    transcript.steps.update({
        "S_prime": len(S_prime), "P_prime": len(P_prime), "m": m, "chosen": [str(x) for x in chosen],
        "psi_threshold": psi_threshold, "L": len(L), "delta0": delta0,
    })
    transcript.constants = {"B": B, "B1": B1, "delta1": delta1, "c4": c4, "c2_formula": c2_formula}
    return _CharResult(A, L, max(c2_formula, observed), transcript)


def build_characteristic_set(S: PointSet, P: PrimeSet, r: int, params: SieveParams) -> CharacteristicWitness:
    """A small A inside a dense L such that r-polynomials vanishing on A tend to vanish on L."""
    if r < 1:
        raise ValueError(f"r must be positive, got {r}")
    if params.d != S.dim:
        raise ValueError(f"Parameters are for d={params.d} but the set has dimension {S.dim}")
    constants = field_constants(S.field)
    view = _View(S, range(len(S)), range(S.dim))
    result = _characteristic(view, P, r, params, constants)
    delta = len(result.L) / len(S) if len(S) else 1.0
    logger.info(f"Characteristic set: |A|={len(result.A)} |L|={len(result.L)} delta={delta:.4f} r={r}")
    return CharacteristicWitness(S, result.A, result.L, r, delta, result.c2, result.transcript)
