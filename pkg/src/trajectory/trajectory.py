"""
المسارات المرجعية
Reference trajectories: interpolated knot data and constant equilibria
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.core.errors import DimensionMismatch, InvalidParameter, OutsideDomain
from src.integration.interpolant import DOMAIN_SLACK, Interpolant
from src.systems.dynamics import ControlSystem

CSV_FLOAT_FORMAT = "%.17g"


class Trajectory:
    """
    مسار مرجعي x̃(t), ũ(t)

    States are interpolated with cubic Hermite polynomials whose knot
    derivatives are f(xᵢ, uᵢ, tᵢ); controls are piecewise linear.
    """

    def __init__(self, times, states, controls, system: ControlSystem, max_defect: float = 0.0):
        self.times = np.asarray(times, dtype=float)
        self.states = np.atleast_2d(np.asarray(states, dtype=float))
        self.controls = np.asarray(controls, dtype=float).reshape(self.times.size, -1)
        if self.states.shape[0] != self.times.size:
            raise DimensionMismatch(f"{self.states.shape[0]} state samples for {self.times.size} knots")
        if self.states.shape[1] != system.state_dim or self.controls.shape[1] != system.control_dim:
            raise DimensionMismatch(f"samples do not match {system.name} dimensions")
        self.system = system
        self.max_defect = max_defect
        rates = np.array([system.f(x, u, t) for t, x, u in zip(self.times, self.states, self.controls)])
        self._state = Interpolant(self.times, self.states, rates)

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def control_dim(self) -> int:
        return self.controls.shape[1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def state(self, t: float) -> np.ndarray:
        return self._state(t)

    def rate(self, t: float) -> np.ndarray:
        return self._state.derivative(t)

    def control(self, t: float) -> np.ndarray:
        slack = DOMAIN_SLACK * max(1.0, self.T - self.t0)
        if not (self.t0 - slack <= t <= self.T + slack):
            raise OutsideDomain(f"t={t} outside trajectory domain [{self.t0}, {self.T}]")
        return np.array([np.interp(t, self.times, column) for column in self.controls.T])

    def knot_rates(self) -> np.ndarray:
        return self._state.derivatives.copy()

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.times}
        for i in range(self.state_dim):
            columns[f"x{i + 1}"] = self.states[:, i]
        for j in range(self.control_dim):
            columns[f"u{j + 1}"] = self.controls[:, j]
        return pd.DataFrame(columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """حفظ المسار بصيغة CSV"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Saved trajectory with {self.times.size} knots to {path}")
        return path


class ConstantTrajectory:
    """
    مسار ثابت عند نقطة توازن
    """

    def __init__(self, x_eq, u_eq, T: float, system: Optional[ControlSystem] = None):
        if T <= 0:
            raise InvalidParameter(f"trajectory horizon must be positive, got {T}")
        self.x_eq = np.array(x_eq, dtype=float).reshape(-1)
        self.u_eq = np.array(u_eq, dtype=float).reshape(-1)
        self.times = np.array([0.0, float(T)])
        self.system = system
        self.max_defect = 0.0
        self.residual = 0.0
        if system is not None:
            self.residual = float(np.linalg.norm(system.f(self.x_eq, self.u_eq, 0.0)))
            if self.residual > 0:
                logger.warning(f"constant trajectory is not an equilibrium of {system.name}: residual {self.residual:.3e}")

    @property
    def state_dim(self) -> int:
        return self.x_eq.size

    @property
    def control_dim(self) -> int:
        return self.u_eq.size

    @property
    def t0(self) -> float:
        return 0.0

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def states(self) -> np.ndarray:
        return np.vstack([self.x_eq, self.x_eq])

    @property
    def controls(self) -> np.ndarray:
        return np.vstack([self.u_eq, self.u_eq])

    def state(self, t: float) -> np.ndarray:
        return self.x_eq.copy()

    def rate(self, t: float) -> np.ndarray:
        return np.zeros_like(self.x_eq)

    def control(self, t: float) -> np.ndarray:
        return self.u_eq.copy()

    def to_frame(self) -> pd.DataFrame:
        columns = {"t": self.times}
        for i in range(self.state_dim):
            columns[f"x{i + 1}"] = np.full(2, self.x_eq[i])
        for j in range(self.control_dim):
            columns[f"u{j + 1}"] = np.full(2, self.u_eq[j])
        return pd.DataFrame(columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        return path


def constant_trajectory(x_eq, u_eq, T: float, system: Optional[ControlSystem] = None) -> ConstantTrajectory:
    """x̃(t) ≡ x_eq, ũ(t) ≡ u_eq على [0, T]"""
    return ConstantTrajectory(x_eq, u_eq, T, system)


def load_trajectory(path: Union[str, Path], system: ControlSystem) -> Trajectory:
    """تحميل مسار من ملف CSV"""
    df = pd.read_csv(path, float_precision="round_trip")
    state_cols = [f"x{i + 1}" for i in range(system.state_dim)]
    control_cols = [f"u{j + 1}" for j in range(system.control_dim)]
    missing = [c for c in ["t", *state_cols, *control_cols] if c not in df.columns]
    if missing:
        raise DimensionMismatch(f"trajectory file {path} lacks columns {missing}")
    logger.info(f"Loaded trajectory with {len(df)} knots from {path}")
    return Trajectory(df["t"].to_numpy(), df[state_cols].to_numpy(), df[control_cols].to_numpy(), system)
