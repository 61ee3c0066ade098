"""
Experiment configuration: target packet, basis widths, position box and quadrature rules.

Scalar-or-list fields are normalised to lists and swept as a cartesian product.
Momentum lengths accept multiples of pi written as "4pi", "4*pi", "pi/2" or "π".
"""
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from ..core.errors import ConfigError, WavePacketError
from ..core.gaussian import WavePacket, WidthMatrix, imaginary_width
from ..quadrature import GH, MAX_HERMITE_N, RS, TCM
from ..settings import Settings

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent.parent / "configs"

_PI_EXPR = re.compile(
    r"^(?P<coef>[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*(?P<pi>pi)?"
    r"\s*(?:/\s*(?P<den>\d+(?:\.\d*)?))?$"
)
_RANGE_EXPR = re.compile(r"^\s*(\d+)\s*:\s*(\d+)\s*(?::\s*(\d+))?\s*$")


def parse_length(value: Any) -> float:
    """Number or pi expression to float."""
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().replace("π", "pi")
    match = _PI_EXPR.match(text)
    if not text or match is None or (match["coef"] is None and match["pi"] is None):
        raise ValueError(f"cannot read {value!r} as a number or multiple of pi")
    result = float(match["coef"]) if match["coef"] is not None else 1.0
    if match["pi"]:
        result *= math.pi
    if match["den"]:
        result /= float(match["den"])
    return result


def as_list(value: Any) -> Any:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def parse_counts(value: Any) -> List[int]:
    """Integer list; "start:stop:step" expands to an inclusive range."""
    if isinstance(value, str):
        match = _RANGE_EXPR.match(value)
        if match is None:
            raise ValueError(f"cannot read {value!r} as start:stop[:step]")
        start, stop, step = int(match[1]), int(match[2]), int(match[3] or 1)
        if step < 1:
            raise ValueError("range step must be >= 1")
        return list(range(start, stop + 1, step))
    return [int(v) for v in as_list(value)]


def _positive(values: List[float], what: str) -> List[float]:
    for v in values:
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{what} must be positive, got {v}")
    return values


class Psi0Config(BaseModel):
    """Target packet psi_0 with Im C0 = gamma0_imag * I."""

    model_config = ConfigDict(extra="forbid")

    q0: List[float] = [0.0]
    p0: List[float] = [0.0]
    gamma0_imag: float = 1.0
    eps: List[float] = [1.0]

    @field_validator("q0", "p0", "eps", mode="before")
    @classmethod
    def scalar_or_list(cls, v: Any) -> List[Any]:
        return as_list(v)

    @field_validator("eps")
    @classmethod
    def positive_eps(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one eps is required")
        return _positive(v, "eps")

    @field_validator("gamma0_imag")
    @classmethod
    def positive_gamma(cls, v: float) -> float:
        return _positive([v], "gamma0_imag")[0]

    @model_validator(mode="after")
    def same_dimension(self) -> "Psi0Config":
        if not self.q0 or len(self.q0) != len(self.p0):
            raise ValueError("q0 and p0 must be non-empty and of equal length")
        return self

    @property
    def dim(self) -> int:
        return len(self.q0)

    def packet(self, eps: float) -> WavePacket:
        return WavePacket.create(self.q0, self.p0, imaginary_width(self.gamma0_imag, self.dim), eps)


class BasisConfig(BaseModel):
    """Basis widths: i * gamma * I for every gamma, or one full imaginary-part matrix."""

    model_config = ConfigDict(extra="forbid")

    gamma_imag: List[float] = [1.0]
    im_matrix: Optional[List[List[float]]] = None
    alignment: Literal["auto"] = "auto"

    @field_validator("gamma_imag", mode="before")
    @classmethod
    def scalar_or_list(cls, v: Any) -> List[Any]:
        return as_list(v)

    @field_validator("gamma_imag")
    @classmethod
    def positive_gamma(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one gamma_imag is required")
        return _positive(v, "gamma_imag")

    def widths(self, dim: int) -> List[Tuple[float, WidthMatrix]]:
        """(smallest eigenvalue of Im C, width) for every configured basis."""
        if self.im_matrix is not None:
            width = imaginary_width(np.asarray(self.im_matrix, dtype=float))
            if width.dim != dim:
                raise ConfigError(f"matrix is {width.dim}x{width.dim}, psi0 has d={dim}", "basis.im_matrix")
            return [(float(np.linalg.eigvalsh(width.imag)[0]), width)]
        return [(gamma, imaginary_width(gamma, dim)) for gamma in self.gamma_imag]


class BoxConfig(BaseModel):
    """Position box q0 + [-L_q, L_q]^d with M grid points per dimension."""

    model_config = ConfigDict(extra="forbid")

    L_q: float = 8.0
    M: List[int] = [64]
    samples_per_dim: Optional[int] = None

    @field_validator("L_q", mode="before")
    @classmethod
    def length(cls, v: Any) -> float:
        return _positive([parse_length(v)], "L_q")[0]

    @field_validator("M", mode="before")
    @classmethod
    def counts(cls, v: Any) -> List[int]:
        values = parse_counts(v)
        if not values or min(values) < 1:
            raise ValueError("M must be a non-empty list of positive integers")
        return values

    @field_validator("samples_per_dim")
    @classmethod
    def enough_samples(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 64:
            raise ValueError(f"samples_per_dim must be >= 64, got {v}")
        return v


class RuleConfig(BaseModel):
    """One quadrature rule with its sweep parameters."""

    model_config = ConfigDict(extra="forbid")

    rule: Literal["TcM", "RS", "GH"]
    N: List[int] = []
    L_p: List[float] = []
    dp: List[float] = []
    tail_tol: Optional[float] = None

    @field_validator("N", mode="before")
    @classmethod
    def counts(cls, v: Any) -> List[int]:
        return parse_counts(v)

    @field_validator("L_p", "dp", mode="before")
    @classmethod
    def lengths(cls, v: Any) -> List[float]:
        return _positive([parse_length(item) for item in as_list(v)], "momentum length")

    @field_validator("tail_tol")
    @classmethod
    def tail_tol_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 < v <= 1e-6:
            raise ValueError(f"tail_tol must lie in (0, 1e-6], got {v}")
        return v

    @model_validator(mode="after")
    def rule_parameters(self) -> "RuleConfig":
        if self.rule in (TCM, GH):
            if not self.N:
                raise ValueError(f"{self.rule} needs a non-empty N list")
            if min(self.N) < 1 or any(b <= a for a, b in zip(self.N, self.N[1:])):
                raise ValueError("N must be positive and strictly ascending")
        if self.rule == GH and self.N and max(self.N) > MAX_HERMITE_N:
            raise ValueError(f"GH supports N <= {MAX_HERMITE_N}, got {max(self.N)}")
        if self.rule == TCM and not self.L_p:
            raise ValueError("TcM needs at least one L_p")
        if self.rule == RS and not self.dp:
            raise ValueError("RS needs at least one dp")
        return self


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None

    @field_validator("path")
    @classmethod
    def expand_path(cls, v: Optional[str]) -> Optional[str]:
        """Expand user path if present."""
        return str(Path(v).expanduser()) if v else v


class ExperimentConfig(BaseModel):
    """Complete description of one experiment, loaded from YAML or JSON."""

    model_config = ConfigDict(extra="forbid")

    name: str = "custom"
    psi0: Psi0Config = Field(default_factory=Psi0Config)
    basis: BasisConfig = Field(default_factory=BasisConfig)
    box: BoxConfig = Field(default_factory=BoxConfig)
    rules: List[RuleConfig] = []
    output: OutputConfig = Field(default_factory=OutputConfig)

    @property
    def dim(self) -> int:
        return self.psi0.dim

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Validate a raw document, converting pydantic errors to ConfigError."""
        try:
            config = cls.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or None
            raise ConfigError(first["msg"], field) from e
        try:
            config.basis.widths(config.dim)
        except ConfigError:
            raise
        except WavePacketError as e:
            raise ConfigError(str(e), "basis") from e
        return config

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(Settings.parse_yaml(text))

    @classmethod
    def load_from_file(cls, config_path: Union[str, Path]) -> "ExperimentConfig":
        """Load configuration from a YAML or JSON file."""
        settings = Settings(config_path)
        config = cls.from_dict(settings.config)
        logger.info(f"Loaded experiment '{config.name}' from {config_path}")
        return config

    def dump(self) -> str:
        """Canonical YAML form; parsing it back reproduces this configuration."""
        return yaml.safe_dump(
            self.model_dump(mode="json"), sort_keys=False, default_flow_style=None, width=120
        )

    def with_overrides(
        self, out: Optional[str] = None, samples: Optional[int] = None
    ) -> "ExperimentConfig":
        """Copy with command-line overrides applied field by field."""
        data = self.model_dump()
        if out is not None:
            data["output"]["path"] = out
        if samples is not None:
            data["box"]["samples_per_dim"] = samples
        return self.from_dict(data)


def preset_names() -> List[str]:
    return sorted(path.stem for path in PRESET_DIR.glob("*.yml"))


def preset(name: str) -> ExperimentConfig:
    """Experiment shipped in the configs directory."""
    path = PRESET_DIR / f"{name}.yml"
    if not path.exists():
        raise ConfigError(f"unknown preset {name!r}, available: {', '.join(preset_names())}", "preset")
    return ExperimentConfig.load_from_file(path)
