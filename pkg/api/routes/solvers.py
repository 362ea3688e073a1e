import logging

from fastapi import APIRouter

from api.dependencies import domain_errors, get_field
from api.schemas import LiftRequest, LiftResponse, SiegelRequest
from solvers.lift import lift_height, lift_point
from solvers.siegel import LinearSystem, small_solution

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/siegel")
async def siegel_solution(request: SiegelRequest):
    """Small nonzero solution of a homogeneous system."""
    field = get_field(request.field)
    with domain_errors("Small solution"):
        system = LinearSystem(field, [[field.decode(a) for a in row] for row in request.rows], request.t)
        solution = small_solution(system)
    logger.info(f"Solved a {system.s}x{system.t} system over {field}")
    return {"status": "success", "solution": solution.to_dict(field)}


@router.post("/lift", response_model=LiftResponse)
async def lift(request: LiftRequest):
    """Integral representative of a projective point."""
    field = get_field(request.field)
    with domain_errors("Lift"):
        point = [field.decode(a) for a in request.point]
        lifted = lift_point(field, point)
        height = lift_height(field, point)
    return LiftResponse(lift=[field.encode(a) for a in lifted], height=height.to_dict())
