import logging

from fastapi import APIRouter

from api.dependencies import domain_errors, get_field
from api.schemas import HeightRequest, HeightResponse, PrimesRequest, PrimesResponse
from arithmetic.field import primes_up_to, weight_w
from arithmetic.heights import height_affine, height_projective

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/height", response_model=HeightResponse)
async def compute_height(request: HeightRequest):
    """Projective height H_K(x), or H_K(1:x) for an affine point."""
    field = get_field(request.field)
    with domain_errors("Height"):
        point = [field.decode(a) for a in request.point]
        height = height_projective(field, point) if request.projective else height_affine(field, point)
    return HeightResponse(height=height.to_dict(), log_height=height.log())


@router.post("/primes", response_model=PrimesResponse)
async def list_primes(request: PrimesRequest):
    """Primes of norm at most Q with their weight w(P)."""
    field = get_field(request.field)
    with domain_errors("Prime enumeration"):
        P = primes_up_to(field, request.Q)
    logger.info(f"Listed {len(P)} primes of {field} up to {request.Q}")
    primes = [{"generator": field.encode(p.generator), "norm": p.norm} for p in P]
    return PrimesResponse(count=len(P), weight=weight_w(P), primes=primes)
