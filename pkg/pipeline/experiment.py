import hashlib
import json
import logging
import threading
import time
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from arithmetic.field import GlobalField, PrimeSet, primes_up_to
from config import settings
from exceptions import InverseSieveError, SpecError
from pipeline.generators import GeneratorSpec, generate_set
from pipeline.reconstruct import OutcomeKind, reconstruct, reconstruct_partitioned
from sieve.larger_sieve import larger_sieve_audit, occupancy_table
from sieve.structure import SieveParams, build_characteristic_set, build_generic_family

logger = logging.getLogger(__name__)


class Stage(str, Enum):
    AUDIT = "audit"
    GENERIC = "generic"
    CHARACTERISTIC = "characteristic"
    RECONSTRUCT = "reconstruct"
    PARTITION = "partition"


class Expectations(BaseModel):
    outcome: Optional[OutcomeKind] = None
    min_fraction: Optional[float] = Field(None, ge=0, le=1)
    max_degree: Optional[int] = Field(None, ge=0)
    audit_holds: Optional[bool] = None


class ExperimentSpec(BaseModel):
    name: str = "experiment"
    field: str = "Q"
    N: Union[int, str]
    d: int = Field(2, ge=1)
    k: int = Field(1, ge=0)
    eps: float = Field(0.5, gt=0)
    alpha: float = Field(1.0, gt=0)
    eta: float = Field(0.1, gt=0, lt=1)
    kappa: float = Field(0.5, gt=0)
    mode: Optional[str] = None
    r: int = Field(1, ge=1)
    homogeneous: bool = False
    generator: GeneratorSpec
    stages: List[Stage] = Field(default_factory=lambda: [Stage.AUDIT, Stage.RECONSTRUCT])
    expect: Expectations = Field(default_factory=Expectations)
    seed: int = 0
    out: Optional[str] = None

    @field_validator("field")
    def validate_field(cls, v):
        GlobalField.parse(v)
        return v

    @field_validator("mode")
    def validate_mode(cls, v):
        if v is not None and v not in ("paper", "pragmatic"):
            raise ValueError("mode must be 'paper' or 'pragmatic'")
        return v

    @model_validator(mode="after")
    def validate_params(self):
        # k < d, N > 0 and the rest of the sieve parameter ranges
        try:
            self.params()
        except ZeroDivisionError as e:
            raise ValueError(f"Invalid N {self.N!r}") from e
        return self

    def params(self) -> SieveParams:
        return SieveParams.create(self.d, self.k, self.N, self.eps, self.alpha, self.eta, self.kappa,
                                  mode=self.mode)


def load_spec(path: Union[str, Path]) -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as e:
        logger.error(f"Invalid experiment spec {path}: {e}")
        raise SpecError(f"Invalid experiment spec {path}: {e}") from e


class ReportWriter:
    """Single writer for stage events and the final report of one run."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.events_path = out_dir / "events.jsonl"
        self._lock = threading.Lock()
        (out_dir / "tables").mkdir(parents=True, exist_ok=True)
        self.events_path.write_text("")

    def event(self, stage: str, event: str, **data):
        line = json.dumps({"stage": stage, "event": event, **data}, sort_keys=True)
        with self._lock:
            with self.events_path.open("a") as handle:
                handle.write(line + "\n")

    def table(self, name: str, rows: List[Dict]):
        with self._lock:
            pd.DataFrame(rows).to_csv(self.out_dir / "tables" / f"{name}.csv", index=False)

    def report(self, report: Dict) -> Path:
        path = self.out_dir / "report.json"
        with self._lock:
            path.write_text(json.dumps(report, sort_keys=True, indent=2, default=str))
        return path


def report_hash(report: Dict) -> str:
    """SHA-256 of the canonical report without its timing block."""
    payload = {key: value for key, value in report.items() if key not in ("timing", "report_hash")}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _check_expectations(spec: ExperimentSpec, stages: Dict) -> List[Dict]:
    checks = []
    expect = spec.expect
    outcome = stages.get(Stage.RECONSTRUCT.value) or stages.get(Stage.PARTITION.value)
    if expect.outcome is not None:
        actual = outcome["kind"] if outcome else None
        checks.append({"check": "outcome", "expected": expect.outcome.value, "actual": actual,
                       "passed": actual == expect.outcome.value})
    if expect.min_fraction is not None:
        actual = outcome["fraction"] if outcome else None
        checks.append({"check": "min_fraction", "expected": expect.min_fraction, "actual": actual,
                       "passed": actual is not None and actual >= expect.min_fraction})
    if expect.max_degree is not None:
        actual = outcome["poly"]["degree"] if outcome and "poly" in outcome else None
        checks.append({"check": "max_degree", "expected": expect.max_degree, "actual": actual,
                       "passed": actual is not None and actual <= expect.max_degree})
    if expect.audit_holds is not None:
        audit = stages.get(Stage.AUDIT.value)
        actual = audit["holds"] if audit else None
        checks.append({"check": "audit_holds", "expected": expect.audit_holds, "actual": actual,
                       "passed": actual == expect.audit_holds})
    return checks


def run_experiment(spec: ExperimentSpec, out_dir: Optional[Union[str, Path]] = None) -> Dict:
    """Generate the set, run the enabled stages and write the report files."""
    out = Path(out_dir or spec.out or Path(settings.output_dir) / spec.name)
    writer = ReportWriter(out)
    field = GlobalField.parse(spec.field)
    params = spec.params()
    timing: Dict[str, float] = {}

    started = time.perf_counter()
    S = generate_set(spec.generator, field, params.N, spec.d, spec.seed)
    timing["generate"] = time.perf_counter() - started
    writer.event("generate", "done", size=len(S), content_hash=S.content_hash())

    P = primes_up_to(field, params.Q) if params.Q >= 2 else PrimeSet(field, ())
    writer.table("occupancy", occupancy_table(S, P, params.k))

    report: Dict = {
        "name": spec.name,
        "spec": spec.model_dump(mode="json"),
        "params": params.to_dict(),
        "input": {"size": len(S), "content_hash": S.content_hash()},
        "stages": {},
    }
    failure = None

    for stage in spec.stages:
        writer.event(stage.value, "start")
        started = time.perf_counter()
        try:
            if stage == Stage.AUDIT:
                audit = larger_sieve_audit(S, params.Q)
                writer.table("audit", audit.to_rows())
                result = audit.to_dict()
            elif stage == Stage.GENERIC:
                result = build_generic_family(S, P, params).to_dict()
            elif stage == Stage.CHARACTERISTIC:
                result = build_characteristic_set(S, P, spec.r, params).to_dict()
            elif stage == Stage.RECONSTRUCT:
                result = reconstruct(S, params, P, spec.homogeneous).to_dict()
            else:
                result = reconstruct_partitioned(S, params, P, spec.homogeneous).to_dict()
        except InverseSieveError as e:
            logger.error(f"Stage {stage.value} failed: {e}")
            failure = {"stage": stage.value, "error": type(e).__name__, "message": str(e)}
            writer.event(stage.value, "failed", error=type(e).__name__, message=str(e))
            break
        timing[stage.value] = time.perf_counter() - started
        report["stages"][stage.value] = result
        writer.event(stage.value, "done")

    checks = _check_expectations(spec, report["stages"])
    report["checks"] = checks
    report["failure"] = failure
    report["passed"] = failure is None and all(check["passed"] for check in checks)
    report["report_hash"] = report_hash(report)
    if settings.record_timings:
        report["timing"] = timing

    path = writer.report(report)
    logger.info(f"Experiment '{spec.name}' {'passed' if report['passed'] else 'failed'}; report at {path}")
    return report
