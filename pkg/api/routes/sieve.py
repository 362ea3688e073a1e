import logging

from fastapi import APIRouter

from api.dependencies import domain_errors, get_point_set
from api.schemas import SieveAuditRequest
from sieve.larger_sieve import larger_sieve_audit

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/audit")
async def sieve_audit(request: SieveAuditRequest):
    """Double-counted larger sieve audit of a point set."""
    S = get_point_set(request.field, request.N, request.points)
    with domain_errors("Sieve audit"):
        audit = larger_sieve_audit(S, request.Q)
    return {"status": "success", "content_hash": S.content_hash(), "audit": audit.to_dict()}
