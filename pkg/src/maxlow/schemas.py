from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from maxlow.errors import ConfigError

SCHEMA_VERSION = "1"

# Values tabulated for structured meshes of both domains; shown next to computed ones.
REFERENCE_CONSTANTS: dict[str, float] = {
    "tilde_c": 0.2461,
    "C1yT_max": 1.05409,
    "C_QT": 0.66666,
    "C_S": 2.25975,
    "c_M": 0.06522,
    "C_M1": 0.94974,
    "C1_Curl": 1.7321,
    "C2_Curl": 0.9129,
    "C1_div": 9.7290,
    "C_OL": 13,
    "C_RD": 1,
}


class PatchConstant(BaseModel):
    quantity: str
    kind: Literal["element", "vertex", "edge", "triangle"]
    anchor: int
    triangle: int | None = None
    value: float


class ConstantsReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    tilde_c: float
    tilde_c_diam: float
    tilde_c_hT: float
    tilde_c_normalization: Literal["diam", "hT"] = "diam"
    C1yT_max: float
    C_QT: float
    C_S: float
    c_M: float
    C_M1: float
    C1_Curl: float
    C2_Curl: float
    C1_div: float
    C1_div_formula: float
    C1_div_override: float | None = None
    C2_div: float
    C_OL: int
    C_RD: float = 1.0
    tolerance: float = 0.0
    flagged: list[str] = Field(default_factory=list)
    patches: list[PatchConstant] = Field(default_factory=list)
    reference: dict[str, float] = Field(default_factory=lambda: dict(REFERENCE_CONSTANTS))


class KappaResult(BaseModel):
    kappa: float
    mu: float
    iterations: int
    residual: float
    method: str
    tolerance: float
    maximizer: list[float] = Field(default_factory=list, exclude=True)


class BoundsRow(BaseModel):
    level: int
    status: Literal["ok", "failed"] = "ok"
    error: str | None = None
    h_max: float | None = None
    h_over_sqrt2: float | None = None
    kappa_h: float | None = None
    c_hat: float | None = None
    m_hat: float | None = None
    c1_div: float | None = None
    eigenvalues: list[float] = Field(default_factory=list)
    # 1-based positions in the sorted discrete spectrum
    eigenvalue_indices: list[int] = Field(default_factory=list)
    lower_bounds: list[float] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict)


class PropertyResult(BaseModel):
    name: str
    passed: bool
    measured: float | None = None
    threshold: float | None = None
    detail: str | None = None


class ValidationReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    source: str
    level: int
    passed: bool
    properties: list[PropertyResult] = Field(default_factory=list)


class RunConfig(BaseModel):
    domain: Literal["square", "lshape"] | None = None
    mesh: str | None = None
    levels: list[int] = Field(default_factory=lambda: [1])
    k: int = 1
    tilde_c_normalization: Literal["diam", "hT"] = "diam"
    c1_div: str = "formula"
    format: Literal["csv", "json", "md"] = "csv"
    out: str | None = None
    threads: int = 1
    seed: int = 0
    eig_tol: float = 1e-9
    power_tol: float = 1e-8
    power_max_iter: int = 10000
    kappa_method: Literal["power", "lanczos"] = "power"
    # constants of coarser levels never drop below those of this level
    constants_floor_level: int = 2

    @field_validator("k", "threads", "power_max_iter")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("eig_tol", "power_tol")
    @classmethod
    def _positive_tol(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @field_validator("constants_floor_level")
    @classmethod
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("must be non-negative")
        return value

    @field_validator("levels")
    @classmethod
    def _levels(cls, value: list[int]) -> list[int]:
        if not value or min(value) < 0:
            raise ValueError("levels must be a non-empty range of non-negative integers")
        return value

    @field_validator("c1_div")
    @classmethod
    def _c1_div(cls, value: str) -> str:
        if value == "formula":
            return value
        try:
            number = float(value)
        except ValueError:
            raise ValueError("c1div must be 'formula' or a positive number") from None
        if not number > 0:
            raise ValueError("c1div override must be positive")
        return value

    @model_validator(mode="after")
    def _one_source(self) -> "RunConfig":
        if (self.domain is None) == (self.mesh is None):
            raise ValueError("exactly one of domain or mesh must be given")
        return self

    @property
    def c1_div_override(self) -> float | None:
        return None if self.c1_div == "formula" else float(self.c1_div)

    @property
    def source(self) -> str:
        return self.domain if self.domain is not None else str(self.mesh)


def parse_levels(text: str) -> list[int]:
    """``"3"`` or ``"1..4"`` to a list of levels."""
    try:
        if ".." in text:
            start, stop = (int(part) for part in text.split("..", 1))
            if stop < start:
                raise ConfigError(f"empty level range {text!r}")
            return list(range(start, stop + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError(f"invalid level range {text!r}") from None
