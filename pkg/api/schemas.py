from enum import Enum
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator

from arithmetic.field import GlobalField


class ConstantMode(str, Enum):
    PAPER = "paper"
    PRAGMATIC = "pragmatic"


class FieldRequest(BaseModel):
    field: str = Field("Q", description="'Q' or 'FqT:<q>'")

    @field_validator("field")
    def validate_field(cls, v):
        GlobalField.parse(v)
        return v


class HeightRequest(FieldRequest):
    point: List[Any] = Field(..., min_length=1, description="Coordinates in field encoding")
    projective: bool = False


class HeightResponse(BaseModel):
    height: Dict[str, Any]
    log_height: float


class PrimesRequest(FieldRequest):
    Q: int = Field(..., ge=2, le=10**7)


class PrimesResponse(BaseModel):
    count: int
    weight: float
    primes: List[Dict[str, Any]]


class PointsRequest(FieldRequest):
    N: Union[int, str] = Field(..., description="Height bound, integer or rational string")
    points: List[List[Any]]

    @field_validator("points")
    def validate_dimensions(cls, v):
        if v and len({len(pt) for pt in v}) != 1:
            raise ValueError("All points must have the same dimension")
        return v


class SieveAuditRequest(PointsRequest):
    Q: int = Field(..., ge=0)


class SiegelRequest(FieldRequest):
    rows: List[List[Any]]
    t: Optional[int] = Field(None, ge=1)


class LiftRequest(FieldRequest):
    point: List[Any] = Field(..., min_length=1)


class LiftResponse(BaseModel):
    lift: List[Any]
    height: Dict[str, Any]


class ReconstructRequest(PointsRequest):
    k: int = Field(1, ge=0)
    eps: float = Field(0.5, gt=0)
    alpha: float = Field(1.0, gt=0)
    eta: float = Field(0.1, gt=0, lt=1)
    kappa: float = Field(0.5, gt=0)
    mode: Optional[ConstantMode] = None
    homogeneous: bool = False
    partition: bool = False
