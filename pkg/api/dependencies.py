import logging
from contextlib import contextmanager
from fractions import Fraction
from typing import Iterator

from fastapi import HTTPException

from arithmetic.field import GlobalField
from exceptions import InverseSieveError
from sieve.point_set import PointSet

logger = logging.getLogger(__name__)


def get_field(descriptor: str) -> GlobalField:
    """Field from its descriptor, as a 400 when malformed."""
    try:
        return GlobalField.parse(descriptor)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))


def get_point_set(descriptor: str, N, points) -> PointSet:
    field = get_field(descriptor)
    try:
        decoded = [[field.decode(a) for a in pt] for pt in points]
        return PointSet(field, Fraction(N), decoded, dim=len(points[0]) if points else 1)
    except (ValueError, TypeError) as e:
        raise HTTPException(status_code=400, detail=f"Invalid point set: {e}")


@contextmanager
def domain_errors(operation: str) -> Iterator[None]:
    """Map domain errors to 400 and anything unexpected to 500."""
    try:
        yield
    except HTTPException:
        raise
    except (InverseSieveError, ValueError) as e:
        logger.error(f"{operation} rejected: {e}")
        raise HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}")
    except Exception as e:
        logger.error(f"{operation} failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))
