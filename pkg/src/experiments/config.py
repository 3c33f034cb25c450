"""
إعدادات التجارب
Experiment configuration schema, loaded from JSON and validated before any
computation
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import settings
from src.core.errors import ConfigError

MatrixSpec = Union[List[float], List[List[float]]]

SYSTEM_PATTERN = re.compile(r"^(pendulum|quadcopter|scalar_decay|nlink(\d+)|nlink_linearized(\d+))$")


def to_matrix(spec: Optional[MatrixSpec], n: int, default: Optional[np.ndarray] = None) -> np.ndarray:
    """قائمة قطرية أو مصفوفة كاملة أو عدد واحد مكرر"""
    if spec is None:
        if default is None:
            raise ConfigError("matrix is required")
        return np.asarray(default, dtype=float)
    M = np.asarray(spec, dtype=float)
    if M.ndim == 1:
        M = np.diag(np.full(n, M[0]) if M.size == 1 else M)
    if M.shape != (n, n):
        raise ConfigError(f"matrix has shape {M.shape}, expected {(n, n)}")
    return M


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemConfig(_Section):
    name: str
    params: Dict[str, float] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def known_system(cls, v):
        match = SYSTEM_PATTERN.match(v)
        if not match:
            raise ValueError(f"unknown system '{v}'")
        links = match.group(2) or match.group(3)
        if links is not None and int(links) < 1:
            raise ValueError("link count must be at least 1")
        return v

    @property
    def family(self) -> str:
        return re.sub(r"\d+$", "", self.name)

    @property
    def links(self) -> Optional[int]:
        digits = re.search(r"(\d+)$", self.name)
        return int(digits.group(1)) if digits else None

    @property
    def is_linear(self) -> bool:
        return self.family in ("scalar_decay", "nlink_linearized")


class TrajectoryConfig(_Section):
    source: Literal["constant", "generate", "file"] = "constant"
    path: Optional[str] = None
    x0: Optional[List[float]] = None
    xT: Optional[List[float]] = None
    segments: int = Field(default=300, ge=2)
    effort_weight: float = Field(default=1.0, gt=0)
    starts: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def source_fields(self):
        if self.source == "file" and not self.path:
            raise ValueError("trajectory.source 'file' requires 'path'")
        if self.source == "generate" and (self.x0 is None or self.xT is None):
            raise ValueError("trajectory.source 'generate' requires 'x0' and 'xT'")
        return self


class LqrConfig(_Section):
    Q: Optional[MatrixSpec] = None
    R: Optional[MatrixSpec] = None
    S_T: Optional[MatrixSpec] = None


class GoalConfig(_Section):
    rule: Literal["explicit", "volume_matching"] = "explicit"
    Q: Optional[MatrixSpec] = None
    level: Optional[float] = Field(default=None, gt=0)
    center: Optional[List[float]] = None
    radius: float = Field(default=0.025, gt=0)
    radius_reading: Literal["squared", "plain"] = "squared"

    @model_validator(mode="after")
    def explicit_level(self):
        if self.rule == "explicit" and self.level is None:
            raise ValueError("goal.rule 'explicit' requires 'level'")
        return self


class GridConfig(_Section):
    T: float = Field(default=1.0, gt=0)
    step: float = Field(default=0.025, gt=0)
    steps: Optional[List[float]] = None

    @field_validator("steps")
    @classmethod
    def positive_steps(cls, v):
        if v is not None and (not v or any(h <= 0 for h in v)):
            raise ValueError("grid.steps must be a non-empty list of positive steps")
        return v

    @model_validator(mode="after")
    def steps_divide_horizon(self):
        for h in self.all_steps():
            if h > self.T:
                raise ValueError(f"step {h} exceeds horizon {self.T}")
        return self

    def all_steps(self) -> List[float]:
        return list(self.steps) if self.steps else [self.step]

    def times(self, step: Optional[float] = None) -> np.ndarray:
        """t₁ … t_N with N − 1 = round(T / h) equal intervals"""
        h = self.step if step is None else step
        intervals = max(1, int(round(self.T / h)))
        return np.linspace(0.0, self.T, intervals + 1)


class AlgorithmConfig(_Section):
    c: float = Field(default=1.5, gt=1)
    gamma1: float = Field(default=0.9999, gt=0, lt=1)
    gamma2: float = Field(default=0.999, gt=0, lt=1)
    tau1: int = Field(default=10, ge=1)
    tau2: int = Field(default=30, ge=1)
    derivative_check: bool = True
    derivative_samples: int = Field(default=1, ge=1)
    derivative_margin: float = Field(default=0.0, ge=0)
    derivative_anchor: Literal["end", "start"] = "end"
    nlp_tol: float = Field(default_factory=lambda: settings.NLP_TOL, gt=0)


class IntegrationSection(_Section):
    abs_tol: float = Field(default_factory=lambda: settings.INTEGRATION_ABS_TOL, gt=0)
    rel_tol: float = Field(default_factory=lambda: settings.INTEGRATION_REL_TOL, gt=0)
    max_step: float = Field(default_factory=lambda: settings.INTEGRATION_MAX_STEP, gt=0)
    max_steps: int = Field(default_factory=lambda: settings.INTEGRATION_MAX_STEPS, gt=0)


class ExperimentConfig(_Section):
    """إعدادات تجربة كاملة"""
    name: str = "experiment"
    system: SystemConfig
    trajectory: TrajectoryConfig = Field(default_factory=TrajectoryConfig)
    lqr: LqrConfig = Field(default_factory=LqrConfig)
    goal: GoalConfig
    grid: GridConfig = Field(default_factory=GridConfig)
    algorithm: AlgorithmConfig = Field(default_factory=AlgorithmConfig)
    integration: IntegrationSection = Field(default_factory=IntegrationSection)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0)
    threads: int = Field(default_factory=lambda: settings.DEFAULT_THREADS, ge=1)
    audit_solves: int = Field(default=0, ge=0)
    plot: bool = True


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(_merge(data, overrides or {}))
    except ValidationError as exc:
        raise ConfigError(f"invalid experiment configuration:\n{exc}") from exc


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    تحميل إعدادات التجربة من JSON

    ``overrides`` (from CLI flags) are merged into the file before validation.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return parse_config(data, overrides)
