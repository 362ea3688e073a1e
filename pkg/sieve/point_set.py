import hashlib
import json
import logging
import threading
from collections import Counter
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from arithmetic.field import GlobalField, PrimeOfK, RingElement, reduce_mod
from arithmetic.heights import height_scalar

logger = logging.getLogger(__name__)

Point = Tuple[RingElement, ...]


class PointSet:
    """Finite set of distinct affine points over O_K with coordinates of height at most N.

    Reductions modulo primes are cached per prime on first use; the caches are
    guarded by a lock so concurrent readers build each entry once.
    """

    def __init__(self, field: GlobalField, N, points: Iterable[Sequence[RingElement]],
                 dim: Optional[int] = None, validate: bool = True):
        self.field = field
        self.N = Fraction(N)
        self.points: Tuple[Point, ...] = tuple(tuple(field.element(a) for a in pt) for pt in points)
        self.dim = dim if dim is not None else (len(self.points[0]) if self.points else 1)

        self._residues: Dict[PrimeOfK, List[tuple]] = {}
        self._lock = threading.Lock()

        if validate:
            self._validate()

    def _validate(self):
        if len(set(self.points)) != len(self.points):
            raise ValueError("PointSet points must be pairwise distinct")
        for pt in self.points:
            if len(pt) != self.dim:
                raise ValueError(f"Point {pt} does not have dimension {self.dim}")
            for a in pt:
                if height_scalar(self.field, a) > self.N:
                    raise ValueError(f"Coordinate {a} exceeds the height bound {self.N}")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def __getitem__(self, index: int) -> Point:
        return self.points[index]

    def point_residues(self, p: PrimeOfK) -> List[tuple]:
        """Residue tuple of every point modulo p, aligned with self.points."""
        cached = self._residues.get(p)
        if cached is not None:
            return cached
        with self._lock:
            if p not in self._residues:
                self._residues[p] = [reduce_mod(self.field, pt, p) for pt in self.points]
                logger.debug(f"Built residue cache for {p} over {len(self.points)} points")
            return self._residues[p]

    def residue_classes(self, p: PrimeOfK, indices: Optional[Iterable[int]] = None) -> Counter:
        residues = self.point_residues(p)
        if indices is None:
            return Counter(residues)
        return Counter(residues[i] for i in indices)

    def subset(self, indices: Iterable[int]) -> "PointSet":
        return PointSet(self.field, self.N, [self.points[i] for i in indices], self.dim, validate=False)

    def section_indices(self, x: RingElement) -> List[int]:
        return [i for i, pt in enumerate(self.points) if pt[0] == x]

    def encoded_points(self) -> List[List]:
        return [[self.field.encode(a) for a in pt] for pt in self.points]

    def content_hash(self) -> str:
        """SHA-256 over the field, bound and sorted encoded points."""
        payload = {
            "field": self.field.to_dict(),
            "N": str(self.N),
            "dim": self.dim,
            "points": sorted(json.dumps(pt) for pt in self.encoded_points()),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def to_dict(self) -> Dict:
        return {
            "field": self.field.to_dict(),
            "N": str(self.N),
            "dim": self.dim,
            "points": self.encoded_points(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "PointSet":
        field = GlobalField.from_dict(data["field"])
        points = [[field.decode(a) for a in pt] for pt in data["points"]]
        return cls(field, Fraction(data["N"]), points, data.get("dim"))
