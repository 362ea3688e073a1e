from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Logging Configuration
    log_level: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR)"
    )

    log_file: str = Field(
        default="inverse_sieve.log",
        description="Log file path"
    )

    # Constant regime
    constant_mode: str = Field(
        default="pragmatic",
        description="Constant regime for the structure module: 'paper' or 'pragmatic'"
    )

    pragmatic_b1_factor: float = Field(
        default=2.0,
        description="Pragmatic B1 as a multiple of alpha"
    )

    pragmatic_section_floor: float = Field(
        default=1.0,
        description="Pragmatic c'(K, nu) used by the section-size filter"
    )

    pragmatic_delta1: float = Field(
        default=1.0,
        description="Pragmatic delta_1 controlling the number of chosen sections"
    )

    pragmatic_sections: int = Field(
        default=2,
        description="Upper bound on the number of sections glued into A in pragmatic mode"
    )

    # Enumeration and numerics
    box_budget: int = Field(
        default=10**8,
        description="Largest exact box count that may be enumerated"
    )

    comparison_tolerance: float = Field(
        default=1e-9,
        description="Absolute tolerance for floating-point threshold comparisons"
    )

    function_field_calibration_degree: int = Field(
        default=16,
        description="Largest prime degree used when calibrating F_q(T) constants"
    )

    # Siegel / reconstruction
    siegel_c6: float = Field(
        default=1.0,
        description="Calibrated constant c_6 in the Siegel bound"
    )

    siegel_margin: float = Field(
        default=2.0,
        description="Required ratio monomials / |A| for the Siegel hypothesis"
    )

    certified_margin: float = Field(
        default=18.0,
        description="Ratio monomials / |A| needed for the full height certificate"
    )

    r_escalation_cap: int = Field(
        default=16,
        description="Largest degree r tried before giving up"
    )

    partition_rounds: int = Field(
        default=4,
        description="Rounds of reconstruction on the remainder"
    )

    smallness_constant: float = Field(
        default=1.0,
        description="Implied constant of the smallness branch |S| < c N^(k-1+eps)"
    )

    exact_vanish_limit: int = Field(
        default=100_000,
        description="Largest set whose vanish fraction is computed by full evaluation"
    )

    vanish_sample_size: int = Field(
        default=20_000,
        description="Sample size for vanish fractions above the exact limit"
    )

    fiber_samples: int = Field(
        default=50,
        description="Number of fibres sampled by the Noether audit"
    )

    # Reports
    output_dir: str = Field(
        default="reports",
        description="Default directory for experiment reports"
    )

    record_timings: bool = Field(
        default=True,
        description="Store stage timings in reports"
    )

    # FastAPI Configuration
    app_title: str = Field(default="Inverse Sieve API")
    app_version: str = Field(default="1.0.0")
    host: str = Field(default="0.0.0.0")
    port: int = Field(default=8000)


settings = Settings()

def validate_settings():
    """Validate critical settings."""
    if settings.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ValueError(f"Unknown log level '{settings.log_level}'")

    if settings.constant_mode not in ("paper", "pragmatic"):
        raise ValueError(f"Unknown constant mode '{settings.constant_mode}'")

    positive_settings = [
        'box_budget',
        'siegel_c6',
        'siegel_margin',
        'certified_margin',
        'r_escalation_cap',
        'fiber_samples',
        'exact_vanish_limit',
        'pragmatic_b1_factor',
        'pragmatic_section_floor',
        'pragmatic_delta1',
        'pragmatic_sections',
    ]

    for setting in positive_settings:
        if getattr(settings, setting) <= 0:
            raise ValueError(f"Setting '{setting}' must be positive")

validate_settings()
