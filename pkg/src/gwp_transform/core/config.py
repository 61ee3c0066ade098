"""Runtime settings for the wave packet transform."""
import logging
from pathlib import Path
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class GWPTSettings(BaseSettings):
    """Runtime defaults, overridable through GWPT_ prefixed environment variables.

    Experiment parameters (packets, grids, rules) live in experiment files, see
    ``gwp_transform.experiments.config``. These settings only cover how the
    numbers are produced: sample densities, truncation tolerances, worker count.
    """

    model_config = SettingsConfigDict(env_prefix="GWPT_", env_file=".env", extra="ignore")

    # sup-norm surrogate sample counts
    samples_per_dim: int = 2048
    samples_per_dim_2d: int = 128

    # Riemann-sum cut-off tolerance
    rs_tail_tol: float = 1e-16

    jobs: int = 1
    timings: bool = False

    # optional default output directory for CSV results
    output_dir: Optional[str] = None

    @field_validator("output_dir")
    @classmethod
    def expand_path(cls, v: Optional[str]) -> Optional[str]:
        """Expand user path if present."""
        return str(Path(v).expanduser()) if v else v

    @field_validator("samples_per_dim", "samples_per_dim_2d", "jobs")
    @classmethod
    def positive_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @field_validator("rs_tail_tol")
    @classmethod
    def tail_tol_range(cls, v: float) -> float:
        if not 0.0 < v <= 1e-6:
            raise ValueError(f"must lie in (0, 1e-6], got {v}")
        return v

    @classmethod
    def load(cls, **overrides) -> "GWPTSettings":
        """Load settings from environment and .env file; keyword overrides take precedence."""
        settings = cls(**overrides)
        logger.debug(f"Loaded runtime settings: {settings.model_dump()}")
        return settings
