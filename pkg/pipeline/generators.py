import json
import logging
import random
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import BaseModel, Field

from arithmetic.field import GlobalField, RingElement
from arithmetic.heights import BoundedBox, BoxKind, count_bounded, enumerate_bounded, height_scalar, scalar_elements
from config import settings
from exceptions import BudgetExceeded, SpecError
from sieve.point_set import PointSet

logger = logging.getLogger(__name__)


class GeneratorKind(str, Enum):
    POLYNOMIAL_IMAGE = "polynomial-image"
    RANDOM_UNIFORM = "random-uniform"
    UNION = "union"
    FILE = "file"


class GeneratorSpec(BaseModel):
    kind: GeneratorKind
    # polynomial-image: g_1..g_{d-1}, each a low-to-high coefficient list in field encoding
    polynomials: List[List] = Field(default_factory=list)
    x_bound: Optional[int] = Field(None, ge=1)
    symmetric: bool = False
    size: Optional[int] = Field(None, ge=0)
    parts: List["GeneratorSpec"] = Field(default_factory=list)
    path: Optional[str] = None


GeneratorSpec.model_rebuild()


def _evaluate(field: GlobalField, coeffs: Sequence[RingElement], x: RingElement) -> RingElement:
    value = field.zero()
    for c in reversed(coeffs):
        value = value * x + c
    return value


def _x_domain(field: GlobalField, N: Fraction, x_bound: Optional[int], symmetric: bool) -> List[RingElement]:
    if field.is_rational:
        bound = x_bound if x_bound is not None else int(N)
        return list(range(-bound, bound + 1)) if symmetric else list(range(1, bound + 1))
    elements = scalar_elements(field, x_bound if x_bound is not None else N)
    return elements if symmetric else [x for x in elements if x]


def _polynomial_image(spec: GeneratorSpec, field: GlobalField, N: Fraction, d: int) -> List[tuple]:
    if len(spec.polynomials) != d - 1:
        raise SpecError(f"polynomial-image needs {d - 1} polynomials for d={d}, got {len(spec.polynomials)}")
    polys = [[field.decode(c) for c in g] for g in spec.polynomials]
    domain = _x_domain(field, N, spec.x_bound, spec.symmetric)
    if len(domain) > settings.box_budget:
        raise BudgetExceeded(f"x-domain of {len(domain)} elements exceeds budget {settings.box_budget}")

    points = []
    for x in domain:
        pt = (x, *(_evaluate(field, g, x) for g in polys))
        if all(height_scalar(field, a) <= N for a in pt):
            points.append(pt)
            if spec.size is not None and len(points) >= spec.size:
                break
    return points


def _random_element(field: GlobalField, rng: random.Random, N: Fraction, max_degree: int) -> RingElement:
    if field.is_rational:
        n = int(N)
        return rng.randint(-n, n)
    return field.element([rng.randrange(field.q) for _ in range(max_degree + 1)])


def _random_uniform(spec: GeneratorSpec, field: GlobalField, N: Fraction, d: int, seed: int) -> List[tuple]:
    size = spec.size or 0
    box = BoundedBox(field, N, d, BoxKind.AFFINE)
    count = count_bounded(box)
    if size > count:
        raise BudgetExceeded(f"Cannot draw {size} distinct points from a box of {count}")
    if size > settings.box_budget:
        raise BudgetExceeded(f"Requested {size} points, budget is {settings.box_budget}")

    rng = random.Random(seed)
    if 4 * size >= count:
        stream, _ = enumerate_bounded(box)
        return rng.sample(list(stream), size)

    max_degree = -1 if field.is_rational else box.max_degree()
    drawn = {}
    while len(drawn) < size:
        pt = tuple(_random_element(field, rng, N, max_degree) for _ in range(d))
        drawn.setdefault(pt, None)
    return list(drawn)


def _from_file(spec: GeneratorSpec, field: GlobalField) -> List[tuple]:
    if not spec.path:
        raise SpecError("file generator needs a path")
    try:
        data = json.loads(Path(spec.path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Failed to read point file {spec.path}: {e}")
        raise SpecError(f"Unreadable point file {spec.path}") from e
    rows = data["points"] if isinstance(data, dict) else data
    return [tuple(field.decode(a) for a in row) for row in rows]


def _points(spec: GeneratorSpec, field: GlobalField, N: Fraction, d: int, seed: int) -> List[tuple]:
    if spec.kind == GeneratorKind.POLYNOMIAL_IMAGE:
        return _polynomial_image(spec, field, N, d)
    if spec.kind == GeneratorKind.RANDOM_UNIFORM:
        return _random_uniform(spec, field, N, d, seed)
    if spec.kind == GeneratorKind.FILE:
        return _from_file(spec, field)

    merged = {}
    for offset, part in enumerate(spec.parts):
        for pt in _points(part, field, N, d, seed + offset):
            merged.setdefault(pt, None)
    return list(merged)


def generate_set(spec: GeneratorSpec, field: GlobalField, N, d: int, seed: int = 0) -> PointSet:
    """Deterministic point set for a generator spec; every coordinate has height at most N."""
    N = Fraction(N)
    points = _points(spec, field, N, d, seed)
    if spec.kind == GeneratorKind.UNION and spec.size is not None:
        points = points[:spec.size]
    logger.info(f"Generated {len(points)} points with the {spec.kind.value} generator (seed {seed})")
    try:
        return PointSet(field, N, points, dim=d)
    except ValueError as e:
        logger.error(f"Generated points are not a valid set: {e}")
        raise SpecError(str(e)) from e
