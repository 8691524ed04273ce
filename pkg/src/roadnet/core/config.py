from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="ROADNET_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    APP_NAME: str = "roadnet"
    ENV: str = Field(default="local")

    LOG_LEVEL: str = Field(default="INFO")
    LOG_JSON: bool = True

    OTEL_EXPORTER_OTLP_ENDPOINT: str | None = None
    METRICS_TEXTFILE: str | None = None

    # Feature toggles
    ENABLE_METRICS: bool = True
    ENABLE_TRACING: bool = False


@lru_cache(1)
def get_settings() -> Settings:
    return Settings()


AplsMode = Literal["harmonic", "paper_verbatim"]
BandNorm = Literal["chebyshev", "per_axis"]
PairMode = Literal["concat", "sum"]
FeatureFrame = Literal["canvas", "local"]


PRESETS: dict[str, dict[str, Any]] = {
    "city-scale": {"tile": 512, "overlap": 128, "max_steps": 5},
    "spacenet3": {"tile": 400, "overlap": 0, "max_steps": 5},
}


class PipelineConfig(BaseModel):
    """Validated knobs shared by every pipeline command."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    preset: str | None = None

    tile: int = Field(default=512, gt=0)
    overlap: int = Field(default=128, ge=0)
    snap_tol: float = Field(default=2.0, ge=0)

    connect_threshold: float = Field(default=0.5, gt=0, lt=1)
    range_r: float = Field(default=50.0, gt=0)
    n_pt: int = Field(default=8, ge=1)
    pair_mode: PairMode = "concat"
    feature_width: int = Field(default=64, ge=1)
    heads: int = Field(default=4, ge=1)
    n_bins: int = Field(default=36, ge=4)
    feature_frame: FeatureFrame = "canvas"

    max_steps: int = Field(default=5, ge=1)
    stride: float = Field(default=10.0, gt=0)
    proposal_threshold: float = Field(default=0.5, gt=0, lt=1)
    continue_on_branch: bool = False
    max_pushed: int = Field(default=256, ge=0)

    band_norm: BandNorm = "chebyshev"
    noise_lambda: float = Field(default=10.0, gt=0)

    apls_mode: AplsMode = "harmonic"
    apls_exhaustive_limit: int = Field(default=50, ge=2)
    apls_samples: int = Field(default=500, ge=1)
    apls_snap_radius: float = Field(default=5.0, gt=0)
    densify_step: float = Field(default=10.0, gt=0)

    seed_spacing: float = Field(default=20.0, gt=0)
    match_radius: float = Field(default=8.0, gt=0)
    angle_tolerance: float = Field(default=30.0, gt=0)
    propagation_radius: float = Field(default=100.0, gt=0)
    hole_spacing: float = Field(default=5.0, gt=0)

    seed: int = 0

    @model_validator(mode="after")
    def _check_tiling(self) -> PipelineConfig:
        if self.overlap >= self.tile:
            raise ValueError("overlap must be smaller than tile")
        if self.feature_width % self.heads != 0:
            raise ValueError("feature_width must be divisible by heads")
        return self

    @property
    def tile_stride(self) -> int:
        return self.tile - self.overlap


def load_pipeline_config(
    preset: str | None = None,
    config_path: Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> PipelineConfig:
    """Merge preset, YAML file and explicit overrides (later wins)."""
    values: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset: {preset}")
        values.update(PRESETS[preset])
        values["preset"] = preset
    if config_path is not None:
        try:
            loaded = yaml.safe_load(config_path.read_text("utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {config_path} must be a mapping")
        values.update(loaded)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return PipelineConfig(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigError(f"{where}: {first['msg']}") from exc
