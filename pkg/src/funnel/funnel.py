"""
تعريف القمع ومواصفاته
Funnel synthesis inputs (FunnelSpec, Goal), the resulting piecewise-linear
funnel and its volume measures
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy import integrate, special

from config.settings import settings
from src.control.shape import QuadraticShape
from src.core.errors import DimensionMismatch, InvalidParameter
from src.core.numkernel import check_symmetric, chol_lower
from src.integration.odeint import IntegrationConfig
from src.systems.dynamics import VectorField
from src.trajectory.trajectory import CSV_FLOAT_FORMAT

FUNNEL_COLUMNS = ["t", "rho", "cross_section_volume"]
# levels below this signal a shape/controller mismatch
RHO_FLOOR = 1e-12
# "end": samples end at t_{k+1}; "start": samples begin at t_k
DERIVATIVE_ANCHORS = ("end", "start")


@dataclass
class Goal:
    """
    منطقة الهدف {(x − x_G)ᵀQ_G(x − x_G) ≤ c_G}
    """
    center: np.ndarray
    Q: np.ndarray
    level: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(-1)
        self.Q = check_symmetric(self.Q, "Q_G")
        chol_lower(self.Q)
        if self.Q.shape[0] != self.center.size:
            raise DimensionMismatch(f"goal center has {self.center.size} entries, Q_G is {self.Q.shape}")
        if not self.level > 0:
            raise InvalidParameter(f"goal level must be positive, got {self.level}")

    def value(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.center
        return float(d @ self.Q @ d)

    def contains(self, x) -> bool:
        return self.value(x) <= self.level


@dataclass
class FunnelSpec:
    """
    مدخلات خوارزمية بناء القمع

    ``grid`` holds t₁ < … < t_N; interval k spans [grid[k], grid[k+1]].
    """
    vector_field: VectorField
    shape: QuadraticShape
    grid: np.ndarray
    goal: Goal
    c: float = 1.5
    gamma1: float = 0.9999
    gamma2: float = 0.999
    tau1: int = 10
    tau2: int = 30
    derivative_check: bool = True
    derivative_samples: int = 1
    derivative_margin: float = 0.0
    derivative_anchor: str = "end"
    seed: int = 0
    cfg: IntegrationConfig = field(default_factory=IntegrationConfig)
    nlp_tol: float = field(default_factory=lambda: settings.NLP_TOL)
    threads: int = field(default_factory=lambda: settings.DEFAULT_THREADS)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float).reshape(-1)
        if self.grid.size < 2:
            raise InvalidParameter("time grid needs at least two points")
        if np.any(np.diff(self.grid) <= 0):
            raise InvalidParameter("time grid must be strictly increasing")
        if not self.c > 1:
            raise InvalidParameter(f"c must exceed 1, got {self.c}")
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise InvalidParameter(f"{name} must lie in (0, 1), got {value}")
        for name in ("tau1", "tau2", "derivative_samples", "threads"):
            if getattr(self, name) < 1:
                raise InvalidParameter(f"{name} must be at least 1")
        if self.derivative_margin < 0:
            raise InvalidParameter("derivative margin must be non-negative")
        if self.derivative_anchor not in DERIVATIVE_ANCHORS:
            raise InvalidParameter(f"derivative anchor must be one of {DERIVATIVE_ANCHORS}, got {self.derivative_anchor!r}")
        if self.nlp_tol <= 0:
            raise InvalidParameter("NLP tolerance must be positive")
        if self.goal.center.size != self.vector_field.state_dim:
            raise DimensionMismatch("goal and vector field dimensions differ")

    @property
    def intervals(self) -> int:
        return self.grid.size - 1

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def sample_times(self, k: int) -> np.ndarray:
        """
        أزمنة فحص المشتقة في الفترة k

        M equally spaced points that end at t_{k+1} (anchor "end") or start
        at t_k (anchor "start").
        """
        t0, t1 = self.grid[k], self.grid[k + 1]
        M = self.derivative_samples
        if self.derivative_anchor == "start":
            times = t0 + (t1 - t0) * np.arange(0, M) / M
            times[0] = t0
            return times
        times = t0 + (t1 - t0) * np.arange(1, M + 1) / M
        times[-1] = t1
        return times


def unit_ball_volume(n: int) -> float:
    """V_n = π^{n/2} / Γ(n/2 + 1)"""
    return float(np.pi ** (n / 2.0) / special.gamma(n / 2.0 + 1.0))


class Funnel:
    """
    القمع الناتج

    Levels ρᵢ at the grid times, linearly interpolated in between; membership
    of (x, t) means P(x − x̃(t), t) ≤ ρᴵ(t).
    """

    def __init__(self, times, levels, shape: Optional[QuadraticShape] = None, report=None):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        self.levels = np.asarray(levels, dtype=float).reshape(-1)
        if self.times.size != self.levels.size:
            raise DimensionMismatch(f"{self.levels.size} levels for {self.times.size} times")
        if np.any(self.levels <= 0):
            raise InvalidParameter("funnel levels must be positive")
        self.shape = shape
        self.report = report

    def __len__(self) -> int:
        return self.times.size

    @property
    def rho0(self) -> float:
        return float(self.levels[0])

    def rho_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.levels))

    def rho_rate(self, t: float, k: Optional[int] = None) -> float:
        """ميل ρᴵ على الفترة k (أو الفترة التي تحوي t)"""
        if k is None:
            k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        return float((self.levels[k + 1] - self.levels[k]) / (self.times[k + 1] - self.times[k]))

    def contains(self, x, t: float) -> bool:
        return self.shape.value(x, t) <= self.rho_at(t)

    def cross_section_volume(self, t: float) -> float:
        S = self.shape.S(t)
        n = S.shape[0]
        return unit_ball_volume(n) * self.rho_at(t) ** (n / 2.0) / np.sqrt(np.linalg.det(S))

    def to_frame(self) -> pd.DataFrame:
        if self.shape is None:
            volumes = np.full(self.times.size, np.nan)
        else:
            volumes = np.array([self.cross_section_volume(t) for t in self.times])
        return pd.DataFrame({"t": self.times, "rho": self.levels, "cross_section_volume": volumes})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Saved funnel with {self.times.size} levels to {path}")
        return path


def load_funnel_levels(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """قراءة (t, ρ) من ملف CSV للقمع"""
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ("t", "rho") if c not in df.columns]
    if missing:
        raise DimensionMismatch(f"funnel file {path} lacks columns {missing}")
    return df["t"].to_numpy(), df["rho"].to_numpy()


def funnel_volume(funnel: Funnel) -> Tuple[float, float]:
    """
    (Σρᵢ, ∫ V_n ρᴵ(t)^{n/2} / √det S(t) dt)

    The time integral uses the trapezoidal rule on the funnel's grid.
    """
    sum_levels = float(np.sum(funnel.levels))
    volumes = np.array([funnel.cross_section_volume(t) for t in funnel.times])
    return sum_levels, float(integrate.trapezoid(volumes, funnel.times))
