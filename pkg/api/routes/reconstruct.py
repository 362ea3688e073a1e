import logging

from fastapi import APIRouter

from api.dependencies import domain_errors, get_point_set
from api.schemas import ReconstructRequest
from pipeline.reconstruct import reconstruct, reconstruct_partitioned
from sieve.structure import SieveParams

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("")
async def reconstruct_set(request: ReconstructRequest):
    """Small-set verdict or a low-degree polynomial vanishing on most of the set."""
    S = get_point_set(request.field, request.N, request.points)
    with domain_errors("Reconstruction"):
        params = SieveParams.create(
            S.dim, request.k, S.N, request.eps, request.alpha, request.eta, request.kappa,
            mode=request.mode.value if request.mode else None,
        )
        if request.partition:
            outcome = reconstruct_partitioned(S, params, homogeneous=request.homogeneous)
        else:
            outcome = reconstruct(S, params, homogeneous=request.homogeneous)
    logger.info(f"Reconstruction of {len(S)} points: {outcome.kind.value}")
    return {"status": "success", "content_hash": S.content_hash(), "outcome": outcome.to_dict()}
