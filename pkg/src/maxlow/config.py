from __future__ import annotations

from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MAXLOW_", extra="ignore", env_file=".env")

    meshes_root: str = "meshes"

    log_format: str = "text"
    log_level: str = Field(
        default="WARNING",
        validation_alias=AliasChoices("MAXLOW_LOG", "MAXLOW_LOG_LEVEL"),
    )

    threads: int = 1
    seed: int = 20240229

    eig_tol: float = 1e-9
    power_tol: float = 1e-8
    power_max_iter: int = 10000
    kappa_method: str = "power"
    solve_residual_tol: float = 1e-10
    dense_threshold: int = 400

    poincare_refinements: int = 3
    poincare_kappa_sq: float = 0.0889
    tilde_c_normalization: str = "diam"
    c1_div: str = "formula"
    geometry_cache: bool = True
    constants_floor_level: int = 2


settings = Settings()
