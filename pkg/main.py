import argparse
import json
import logging
import sys
from contextlib import asynccontextmanager
from fractions import Fraction
from pathlib import Path

import uvicorn
from fastapi import APIRouter, FastAPI
from fastapi.middleware.cors import CORSMiddleware

from api.routes.arithmetic import router as arithmetic_router
from api.routes.health import router as health_router
from api.routes.reconstruct import router as reconstruct_router
from api.routes.sieve import router as sieve_router
from api.routes.solvers import router as solvers_router
from arithmetic.field import GlobalField, PrimeSet, primes_up_to, theta, weight_w
from arithmetic.heights import height_affine, height_projective
from arithmetic.polynomials import Polynomial
from config import settings
from exceptions import InverseSieveError, SpecError
from pipeline.experiment import load_spec, run_experiment
from pipeline.generators import GeneratorSpec, generate_set
from pipeline.reconstruct import reconstruct, reconstruct_partitioned
from sieve.larger_sieve import larger_sieve_audit
from sieve.point_set import PointSet
from sieve.structure import SieveParams, build_characteristic_set, build_generic_family
from solvers.lift import SUnitTarget, lift_height, lift_point, sunit_reduce
from solvers.noether import Hypersurface, noether_normalize, sample_variety_points
from solvers.siegel import LinearSystem, small_solution

#logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper()),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler(settings.log_file),
        logging.StreamHandler()
    ]
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info(f"Starting Inverse Sieve API in {settings.constant_mode} mode")
    yield
    logger.info("Shutting down Inverse Sieve API")


app = FastAPI(
    title=settings.app_title,
    version=settings.app_version,
    description="Heights, larger sieve audits, small solutions and polynomial reconstruction over Q and F_q(T)",
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

router = APIRouter()
router.include_router(health_router, tags=["health"])
router.include_router(arithmetic_router, prefix="/arithmetic", tags=["arithmetic"])
router.include_router(sieve_router, prefix="/sieve", tags=["sieve"])
router.include_router(solvers_router, prefix="/solvers", tags=["solvers"])
router.include_router(reconstruct_router, prefix="/reconstruct", tags=["reconstruct"])

app.include_router(router, prefix="/api/v1")


@app.get("/")
async def root():
    return {
        "message": "Inverse Sieve API",
        "version": settings.app_version,
        "docs": "/docs"
    }


# Command line

def _json_arg(text: str):
    """Inline JSON, or @path for a JSON file."""
    if text.startswith("@"):
        return json.loads(Path(text[1:]).read_text())
    return json.loads(text)


def _params(args, d: int) -> SieveParams:
    return SieveParams.create(d, args.k, args.N, args.eps, args.alpha, args.eta, args.kappa, mode=args.mode)


def _point_set(args, field: GlobalField) -> PointSet:
    if args.input:
        spec = GeneratorSpec(kind="file", path=args.input)
    elif args.generator:
        spec = GeneratorSpec.model_validate(_json_arg(args.generator))
    else:
        raise SpecError("Provide --input or --generator")
    return generate_set(spec, field, Fraction(args.N), args.d, args.seed)


def _primes(field: GlobalField, Q: int) -> PrimeSet:
    return primes_up_to(field, Q) if Q >= 2 else PrimeSet(field, ())


def cmd_heights(args, field: GlobalField) -> dict:
    point = [field.decode(a) for a in _json_arg(args.point)]
    height = height_projective(field, point) if args.projective else height_affine(field, point)
    return {"height": height.to_dict(), "log_height": height.log()}


def cmd_primes(args, field: GlobalField) -> dict:
    P = _primes(field, args.Q)
    return {"count": len(P), "weight": weight_w(P), "theta": theta(P), "primes": P.to_dict()}


def cmd_sieve_audit(args, field: GlobalField) -> dict:
    S = _point_set(args, field)
    Q = args.Q if args.Q is not None else _params(args, S.dim).Q
    return {"content_hash": S.content_hash(), "audit": larger_sieve_audit(S, Q).to_dict()}


def cmd_generic(args, field: GlobalField) -> dict:
    S = _point_set(args, field)
    params = _params(args, S.dim)
    return build_generic_family(S, _primes(field, params.Q), params).to_dict()


def cmd_characteristic(args, field: GlobalField) -> dict:
    S = _point_set(args, field)
    params = _params(args, S.dim)
    return build_characteristic_set(S, _primes(field, params.Q), args.r, params).to_dict()


def cmd_siegel(args, field: GlobalField) -> dict:
    rows = [[field.decode(a) for a in row] for row in _json_arg(args.rows)]
    system = LinearSystem(field, rows, args.t)
    return small_solution(system).to_dict(field)


def cmd_noether(args, field: GlobalField) -> dict:
    chain = [Hypersurface(Polynomial.from_dict(field, data)) for data in _json_arg(args.chain)]
    samples = sample_variety_points(chain[0], args.sample_bound, settings.fiber_samples) if chain else []
    return noether_normalize(field, args.m, chain, samples=samples, seed=args.seed).to_dict()


def cmd_lift(args, field: GlobalField) -> dict:
    if args.sunit_primes:
        primes = [int(p) for p in args.sunit_primes.split(",")]
        targets = [float(x) for x in args.targets.split(",")]
        return sunit_reduce(field, SUnitTarget(tuple(primes), tuple(targets))).to_dict()
    point = [field.decode(a) for a in _json_arg(args.point)]
    return {
        "lift": [field.encode(a) for a in lift_point(field, point)],
        "height": lift_height(field, point).to_dict(),
    }


def cmd_reconstruct(args, field: GlobalField) -> dict:
    S = _point_set(args, field)
    params = _params(args, S.dim)
    P = _primes(field, params.Q)
    if args.partition:
        outcome = reconstruct_partitioned(S, params, P, args.homogeneous)
    else:
        outcome = reconstruct(S, params, P, args.homogeneous)
    return {"content_hash": S.content_hash(), "outcome": outcome.to_dict()}


COMMANDS = {
    "heights": cmd_heights,
    "primes": cmd_primes,
    "sieve-audit": cmd_sieve_audit,
    "generic": cmd_generic,
    "characteristic": cmd_characteristic,
    "siegel": cmd_siegel,
    "noether": cmd_noether,
    "lift": cmd_lift,
    "reconstruct": cmd_reconstruct,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--field", default="Q", help="'Q' or 'FqT:<q>'")
    common.add_argument("--N", default="1000", help="Height bound")
    common.add_argument("--d", type=int, default=2, help="Ambient dimension of generated sets")
    common.add_argument("--k", type=int, default=1)
    common.add_argument("--eps", type=float, default=0.5)
    common.add_argument("--alpha", type=float, default=1.0)
    common.add_argument("--eta", type=float, default=0.1)
    common.add_argument("--kappa", type=float, default=0.5)
    common.add_argument("--mode", choices=["paper", "pragmatic"], default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="Write the JSON result here")

    point_input = argparse.ArgumentParser(add_help=False)
    point_input.add_argument("--input", default=None, help="JSON file of points")
    point_input.add_argument("--generator", default=None, help="Generator spec as JSON or @file")

    parser = argparse.ArgumentParser(prog="inverse-sieve", description="Inverse sieve toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("heights", parents=[common], help="Height of a point")
    p.add_argument("--point", required=True, help="Coordinates as JSON")
    p.add_argument("--projective", action="store_true")

    p = sub.add_parser("primes", parents=[common], help="Primes of norm at most Q")
    p.add_argument("--Q", type=int, required=True)

    p = sub.add_parser("sieve-audit", parents=[common, point_input], help="Larger sieve audit")
    p.add_argument("--Q", type=int, default=None)

    sub.add_parser("generic", parents=[common, point_input], help="Generic family of subsets")

    p = sub.add_parser("characteristic", parents=[common, point_input], help="Characteristic set")
    p.add_argument("--r", type=int, default=1)

    p = sub.add_parser("siegel", parents=[common], help="Small solution of a linear system")
    p.add_argument("--rows", required=True, help="Coefficient rows as JSON")
    p.add_argument("--t", type=int, default=None)

    p = sub.add_parser("noether", parents=[common], help="Noether normalization of a hypersurface chain")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--chain", required=True, help="JSON list of polynomials")
    p.add_argument("--sample-bound", type=int, default=6)

    p = sub.add_parser("lift", parents=[common], help="Integral lift or S-unit reduction")
    p.add_argument("--point", default="[1]")
    p.add_argument("--sunit-primes", default=None, help="Comma separated primes")
    p.add_argument("--targets", default=None, help="Comma separated targets, archimedean first")

    p = sub.add_parser("reconstruct", parents=[common, point_input], help="Reconstruct a vanishing polynomial")
    p.add_argument("--homogeneous", action="store_true")
    p.add_argument("--partition", action="store_true")

    p = sub.add_parser("experiment", parents=[common], help="Run an experiment spec")
    p.add_argument("--spec", required=True)

    sub.add_parser("serve", parents=[common], help="Start the HTTP service")
    return parser


def _emit(result: dict, out):
    text = json.dumps(result, sort_keys=True, indent=2, default=str)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        uvicorn.run(app, host=settings.host, port=settings.port, log_level=settings.log_level.lower())
        return EXIT_OK

    if args.command == "experiment":
        try:
            spec = load_spec(args.spec)
            report = run_experiment(spec, args.out)
        except SpecError as e:
            _emit({"error": {"type": "SpecError", "message": str(e)}}, None)
            return EXIT_USAGE
        except InverseSieveError as e:
            logger.error(f"Experiment failed: {e}")
            _emit({"error": {"type": type(e).__name__, "message": str(e)}}, None)
            return EXIT_FAILED
        return EXIT_OK if report["passed"] else EXIT_FAILED

    try:
        field = GlobalField.parse(args.field)
        result = COMMANDS[args.command](args, field)
    except (SpecError, json.JSONDecodeError) as e:
        logger.error(f"Usage error in {args.command}: {e}")
        _emit({"error": {"type": type(e).__name__, "message": str(e)}}, None)
        return EXIT_USAGE
    except (InverseSieveError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        _emit({"error": {"type": type(e).__name__, "message": str(e)}}, None)
        return EXIT_FAILED

    _emit(result, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
