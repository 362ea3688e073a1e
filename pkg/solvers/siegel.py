import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from sympy import QQ, ZZ
from sympy.polys.domains import GF
from sympy.polys.matrices import DomainMatrix

from arithmetic.field import FieldConstants, FqPoly, GlobalField, RingElement, field_constants
from arithmetic.heights import HeightValue, height_affine, height_scalar
from exceptions import HypothesisViolated, NoKernel

logger = logging.getLogger(__name__)


@dataclass
class LinearSystem:
    """Homogeneous system sum_j c_j a_ij = 0 over O_K, s rows by t columns."""

    field: GlobalField
    rows: List[List[RingElement]]
    t: Optional[int] = None

    def __post_init__(self):
        self.rows = [[self.field.element(a) for a in row] for row in self.rows]
        if self.t is None:
            if not self.rows:
                raise ValueError("A system without rows needs an explicit column count")
            self.t = len(self.rows[0])
        if any(len(row) != self.t for row in self.rows):
            raise ValueError(f"Every row must have {self.t} entries")

    @property
    def s(self) -> int:
        return len(self.rows)

    @property
    def C(self) -> HeightValue:
        """Largest coefficient height."""
        heights = [height_scalar(self.field, a) for row in self.rows for a in row]
        if not heights:
            return height_scalar(self.field, self.field.one())
        return max(heights)

    def residual(self, c: Sequence[RingElement]) -> List[RingElement]:
        out = []
        for row in self.rows:
            total = self.field.zero()
            for a, x in zip(row, c):
                total = total + a * x
            out.append(total)
        return out

    def is_solution(self, c: Sequence[RingElement]) -> bool:
        return not any(self.residual(c))

    def to_dict(self) -> Dict:
        return {
            "field": self.field.to_dict(),
            "t": self.t,
            "rows": [[self.field.encode(a) for a in row] for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "LinearSystem":
        field = GlobalField.from_dict(data["field"])
        return cls(field, [[field.decode(a) for a in row] for row in data["rows"]], data.get("t"))


@dataclass
class SmallSolution:
    vector: Tuple[RingElement, ...]
    height: HeightValue
    bound: Optional[HeightValue]

    @property
    def within_bound(self) -> Optional[bool]:
        if self.bound is None:
            return None
        return self.height <= self.bound

    def to_dict(self, field: GlobalField) -> Dict:
        return {
            "vector": [field.encode(a) for a in self.vector],
            "height": self.height.to_dict(),
            "log_height": self.height.log(),
            "bound": self.bound.to_dict() if self.bound is not None else None,
            "within_bound": self.within_bound,
        }


def _log_of(value) -> float:
    if isinstance(value, HeightValue):
        return value.log()
    if isinstance(value, Fraction):
        return math.log(value.numerator) - math.log(value.denominator)
    return math.log(value)


def _rational_from_log(log_value: float) -> Fraction:
    """An exact rational within float precision of exp(log_value), rounded up."""
    exponent = log_value / math.log(2)
    whole = math.floor(exponent)
    mantissa = math.ceil(2.0 ** (exponent - whole + 52))
    return Fraction(mantissa) * Fraction(2) ** (whole - 52)


def siegel_bound(s: int, t: int, C, constants: Optional[FieldConstants] = None,
                 field: Optional[GlobalField] = None) -> HeightValue:
    """c6 * (t C)^(8s / (t - 2s)), requiring t > 2s.

    Evaluated in log space; the exponent makes the bound astronomically large
    for systems with many rows.
    """
    if t <= 2 * s:
        raise HypothesisViolated(f"The small-solution bound needs t > 2s, got s={s}, t={t}")
    field = field or GlobalField.rational()
    constants = constants or field_constants(field)
    log_value = math.log(constants.c6) + (8 * s / (t - 2 * s)) * (math.log(t) + _log_of(C))
    if field.is_rational:
        return HeightValue.rational(_rational_from_log(log_value))
    # heights over F_q(T) are powers of q
    return HeightValue.power(field.q, math.floor(log_value / math.log(field.q) + 1e-12))


# Canonical forms and ordering

def _canonical(field: GlobalField, c: Sequence[RingElement]) -> Tuple[RingElement, ...]:
    g = field.zero()
    for a in c:
        g = field.gcd(g, a)
    if not g:
        return tuple(c)
    c = [a // g for a in c]
    lead = next(a for a in c if a)
    if field.is_rational:
        return tuple(-a for a in c) if lead < 0 else tuple(c)
    inv = pow(lead.leading, -1, field.q)
    return tuple(a * inv for a in c)


def _solution_key(field: GlobalField, c: Sequence[RingElement]):
    first = next(i for i, a in enumerate(c) if a)
    order = tuple(c) if field.is_rational else tuple(a.sort_key() for a in c)
    return (height_affine(field, c), first, order)


def _best(field: GlobalField, candidates: Iterable[Sequence[RingElement]]) -> Tuple[RingElement, ...]:
    canonical = {_canonical(field, c) for c in candidates if any(c)}
    return min(canonical, key=lambda c: _solution_key(field, c))


# Integer kernels

def _to_ints(matrix: DomainMatrix) -> List[List[int]]:
    return [[int(v) for v in row] for row in matrix.to_Matrix().tolist()]


def _rational_rank(rows: List[List[int]], t: int) -> int:
    if not rows:
        return 0
    return DomainMatrix([[QQ(a) for a in row] for row in rows], (len(rows), t), QQ).rank()


def _nullspace_lattice(rows: List[List[int]], t: int) -> List[List[int]]:
    """Fraction-free kernel basis from the rational nullspace, each row made primitive."""
    null = DomainMatrix([[QQ(a) for a in row] for row in rows], (len(rows), t), QQ).nullspace()
    basis = []
    for row in null.to_Matrix().tolist():
        fracs = [Fraction(str(v)) for v in row]
        den = math.lcm(*[f.denominator for f in fracs])
        ints = [int(f * den) for f in fracs]
        g = math.gcd(*ints)
        basis.append([a // g for a in ints])
    return basis


def _lll(rows: List[List[int]], width: int) -> List[List[int]]:
    return _to_ints(DomainMatrix([[ZZ(v) for v in row] for row in rows], (len(rows), width), ZZ).lll())


def _integer_kernel(rows: List[List[int]], t: int) -> List[List[int]]:
    """LLL-reduced basis of the full integer kernel of the rows.

    The reduced nullspace basis spans a finite-index sublattice whose norms bound
    the kernel minima; the embedding [I | W A^T] with W above 2^t times that bound
    then returns a basis of the saturated kernel as its zero-tail rows.
    """
    if not rows:
        return [[int(i == j) for i in range(t)] for j in range(t)]
    dim = t - _rational_rank(rows, t)
    if dim == 0:
        return []

    sublattice = _lll(_nullspace_lattice(rows, t), t)
    bound = max(math.isqrt(sum(v * v for v in row)) + 1 for row in sublattice)
    weight = 2 ** t * bound
    s = len(rows)
    embedding = [
        [int(i == j) for i in range(t)] + [weight * rows[r][j] for r in range(s)]
        for j in range(t)
    ]
    reduced = _lll(embedding, t + s)
    kernel = [row[:t] for row in reduced if not any(row[t:])]
    if len(kernel) != dim:
        logger.warning(f"Embedding produced {len(kernel)} of {dim} kernel vectors; using the nullspace sublattice")
        return sublattice
    return kernel


def _integer_candidates(kernel: List[List[int]]) -> List[List[int]]:
    candidates = [list(v) for v in kernel]
    for u, v in itertools.combinations(kernel, 2):
        candidates.append([a + b for a, b in zip(u, v)])
        candidates.append([a - b for a, b in zip(u, v)])
    return candidates


# F_q[T] kernels

def _fq_rank(field: GlobalField, vectors: List[List[FqPoly]]) -> int:
    """Rank over F_q(T) by fraction-free elimination."""
    rows = [list(v) for v in vectors]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        p = rows[rank][col]
        for i in range(rank + 1, len(rows)):
            factor = rows[i][col]
            if factor:
                rows[i] = [a * p - b * factor for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def _fq_kernel_at_degree(field: GlobalField, rows: List[List[FqPoly]], t: int, D: int) -> List[List[FqPoly]]:
    """Solutions with every entry of degree at most D, as an F_q basis."""
    q = field.q
    width = D + 1
    equations = []
    for row in rows:
        top = max((a.degree for a in row), default=0)
        for n in range(top + D + 1):
            eq = [0] * (t * width)
            for j, a in enumerate(row):
                low = a.low_coeffs()
                for k in range(width):
                    if 0 <= n - k < len(low):
                        eq[j * width + k] = low[n - k]
            equations.append(eq)

    K = GF(q)
    if not equations:
        null_rows = [[int(i == j) for i in range(t * width)] for j in range(t * width)]
    else:
        M = DomainMatrix([[K(v) for v in eq] for eq in equations], (len(equations), t * width), K)
        null_rows = [[int(v) % q for v in row] for row in M.nullspace().to_Matrix().tolist()]

    return [
        [FqPoly.from_low(vec[j * width:(j + 1) * width], q) for j in range(t)]
        for vec in null_rows
    ]


def _fq_kernel(field: GlobalField, rows: List[List[FqPoly]], t: int, limit: Optional[int] = None):
    """(minimal degree, solutions at that degree, independent basis up to the kernel dimension)."""
    dim = t - (_fq_rank(field, rows) if rows else 0)
    if dim == 0:
        return None, [], []
    top = max((a.degree for row in rows for a in row), default=0)
    max_degree = limit if limit is not None else len(rows) * (max(top, 0) + 1) + t

    first_degree, first_solutions, basis = None, [], []
    for D in range(max_degree + 1):
        solutions = [v for v in _fq_kernel_at_degree(field, rows, t, D) if any(v)]
        if solutions and first_degree is None:
            first_degree, first_solutions = D, solutions
        ordered = sorted((_canonical(field, v) for v in solutions), key=lambda c: _solution_key(field, c))
        for v in ordered:
            if _fq_rank(field, basis + [list(v)]) > len(basis):
                basis.append(list(v))
        if len(basis) == dim:
            break
    return first_degree, first_solutions, basis


# Public operations

def kernel_basis(system: LinearSystem) -> List[Tuple[RingElement, ...]]:
    """A basis of the kernel over K made of small O_K vectors."""
    field = system.field
    if field.is_rational:
        basis = _integer_kernel(system.rows, system.t)
    else:
        _, _, basis = _fq_kernel(field, system.rows, system.t)
    return sorted((_canonical(field, v) for v in basis), key=lambda c: _solution_key(field, c))


def rational_kernel(system: LinearSystem) -> List[Tuple[RingElement, ...]]:
    """A basis of the kernel over K with O_K entries, without height reduction."""
    field = system.field
    if not system.rows:
        return [tuple(field.one() if i == j else field.zero() for i in range(system.t)) for j in range(system.t)]
    if field.is_rational:
        if _rational_rank(system.rows, system.t) == system.t:
            return []
        return [tuple(v) for v in _nullspace_lattice(system.rows, system.t)]
    _, _, basis = _fq_kernel(field, system.rows, system.t)
    return [tuple(v) for v in basis]


def small_solution(system: LinearSystem, constants: Optional[FieldConstants] = None) -> SmallSolution:
    """A nonzero exact kernel vector of small height."""
    field = system.field
    if field.is_rational:
        kernel = _integer_kernel(system.rows, system.t)
        if not kernel:
            raise NoKernel(f"The {system.s}x{system.t} system has full column rank")
        vector = _best(field, _integer_candidates(kernel))
    else:
        degree, solutions, _ = _fq_kernel(field, system.rows, system.t)
        if degree is None:
            raise NoKernel(f"The {system.s}x{system.t} system has full column rank")
        vector = _best(field, solutions)

    if not system.is_solution(vector):
        logger.error(f"Kernel vector {vector} leaves a nonzero residual")
        raise RuntimeError("Kernel computation produced a non-solution")

    bound = None
    if system.t > 2 * system.s:
        bound = siegel_bound(system.s, system.t, system.C, constants, field)
    solution = SmallSolution(vector, height_affine(field, vector), bound)
    logger.debug(f"Small solution of a {system.s}x{system.t} system: height {float(solution.height):.4g}")
    return solution


def exhaustive_minimum(system: LinearSystem, max_height: int) -> Optional[Tuple[int, ...]]:
    """Smallest canonical integer solution with entries bounded by max_height, by full search."""
    if not system.field.is_rational:
        raise ValueError("Exhaustive search is implemented over Z only")
    for h in range(1, max_height + 1):
        found = [
            c for c in itertools.product(range(-h, h + 1), repeat=system.t)
            if max(abs(a) for a in c) == h and system.is_solution(c)
        ]
        if found:
            return _best(system.field, found)
    return None


def calibrate_c6(systems: Sequence[LinearSystem]) -> Tuple[float, List[float]]:
    """Smallest power of two c6 >= 1 making every returned height obey the bound."""
    unit = FieldConstants(c1=0.5, c2=1.5, c3=0.5, c4=1.5, c6=1.0)
    ratios = []
    for system in systems:
        if system.t <= 2 * system.s:
            continue
        solution = small_solution(system, unit)
        base = siegel_bound(system.s, system.t, system.C, unit, system.field)
        ratios.append(math.exp(solution.height.log() - base.log()))
    worst = max(ratios, default=1.0)
    c6 = 2.0 ** max(0, math.ceil(math.log2(worst))) if worst > 0 else 1.0
    logger.info(f"Calibrated c6={c6} over {len(ratios)} systems (worst ratio {worst:.4f})")
    return c6, ratios


def matrix_rank(field: GlobalField, rows: List[List[RingElement]]) -> int:
    """Exact rank over K."""
    rows = [[field.element(a) for a in row] for row in rows]
    if not rows:
        return 0
    if field.is_rational:
        return _rational_rank(rows, len(rows[0]))
    return _fq_rank(field, rows)
