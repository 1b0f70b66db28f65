"""Run configuration shared by every CLI subcommand."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataSection(_Section):
    model: Literal["brownian", "integrated-brownian", "matern"] = "brownian"
    nu: Optional[float] = None
    gamma: float = 0.5
    d: int = Field(1, ge=1)
    k: int = Field(200, ge=1)
    n: int = Field(100, ge=1)
    burn_in: int = Field(100, ge=0)
    seed: int = 0
    jitter: float = Field(1e-10, ge=0)

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v):
        if not abs(v) < 1:
            raise ValueError("gamma must satisfy |gamma| < 1")
        return v

    @model_validator(mode="after")
    def _nu(self):
        if self.model == "matern" and (self.nu is None or not self.nu > 0):
            raise ValueError("matern model needs nu > 0")
        return self


class EstimatorSection(_Section):
    kind: Literal["empirical", "spectral-nn", "truth"] = "spectral-nn"
    window: Literal["truncated", "bartlett", "parzen"] = "parzen"
    q: int = Field(20, ge=1)
    M: int = Field(10, ge=1)
    L: int = Field(10, ge=0)
    arch: Literal["shallow", "deep-shared", "deep"] = "deep-shared"
    depth: int = Field(4, ge=1)
    width: int = Field(20, ge=1)
    heads: Optional[int] = Field(None, ge=1)
    epochs: int = Field(200, ge=1)
    lr: float = Field(1e-3, gt=0)
    freq_points: int = Field(64, ge=2)
    seed: int = 0
    init_scale: float = Field(1.0, gt=0)
    xi_scale: float = Field(0.1, gt=0)


class EvaluationSection(_Section):
    I: int = Field(100, ge=1)
    J: int = Field(10000, ge=1)
    seed: int = 0
    curve_points: int = Field(0, ge=0)


class LimitsSection(_Section):
    memory_cap_bytes: int = Field(8 * 2**30, ge=1)


class OutputSection(_Section):
    directory: str = "out"
    formats: list[Literal["json", "csv"]] = ["json", "csv"]


class RunConfig(_Section):
    data: DataSection = DataSection()
    estimator: EstimatorSection = EstimatorSection()
    evaluation: EvaluationSection = EvaluationSection()
    limits: LimitsSection = LimitsSection()
    output: OutputSection = OutputSection()

    def digest(self) -> str:
        """sha256 of the canonical JSON form (defaults filled in)."""
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(doc: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_describe(exc)}") from None


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(doc)
