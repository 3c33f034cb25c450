"""
شكل القمع التربيعي
Quadratic funnel shape P(x, t) = (x − x̃(t))ᵀ S(t) (x − x̃(t)) and its rate Ṗ
"""

from typing import Callable, Optional, Tuple

import numpy as np

from src.core.errors import OutsideDomain
from src.core.numkernel import symmetrize
from src.integration.interpolant import DOMAIN_SLACK, MatrixInterpolant
from src.systems.dynamics import VectorField, jacobian

MatrixFn = Callable[[float], np.ndarray]


class QuadraticShape:
    """
    الشكل التربيعي المتغير زمنياً

    ``S`` and ``S_rate`` map time to n×n matrices; ``trajectory`` exposes
    ``state(t)`` and ``rate(t)``. Ṡ is taken from the same interpolant that
    produces S so P and Ṗ stay consistent.
    """

    def __init__(self, S: MatrixFn, S_rate: MatrixFn, trajectory, domain: Tuple[float, float], constant: Optional[np.ndarray] = None):
        self._S = S
        self._S_rate = S_rate
        self.trajectory = trajectory
        self.domain = (float(domain[0]), float(domain[1]))
        self.constant = constant
        self._slack = DOMAIN_SLACK * max(1.0, self.domain[1] - self.domain[0])

    @classmethod
    def from_interpolant(cls, S: MatrixInterpolant, trajectory) -> "QuadraticShape":
        return cls(lambda t: symmetrize(S(t)), lambda t: symmetrize(S.derivative(t)), trajectory, S.domain)

    @classmethod
    def constant_shape(cls, S, trajectory) -> "QuadraticShape":
        S = symmetrize(np.atleast_2d(np.asarray(S, dtype=float)))
        S.setflags(write=False)
        zero = np.zeros_like(S)
        zero.setflags(write=False)
        return cls(lambda t: S, lambda t: zero, trajectory, (trajectory.t0, trajectory.T), constant=S)

    @property
    def dim(self) -> int:
        return self.S(self.domain[0]).shape[0]

    def _check(self, t: float) -> None:
        if not (self.domain[0] - self._slack <= t <= self.domain[1] + self._slack):
            raise OutsideDomain(f"t={t} outside shape domain {self.domain}")

    def S(self, t: float) -> np.ndarray:
        self._check(t)
        return self._S(t)

    def S_rate(self, t: float) -> np.ndarray:
        self._check(t)
        return self._S_rate(t)

    def center(self, t: float) -> np.ndarray:
        return self.trajectory.state(t)

    def value(self, x, t: float) -> float:
        d = np.asarray(x, dtype=float) - self.center(t)
        return float(d @ self.S(t) @ d)

    def value_grad(self, x, t: float) -> Tuple[float, np.ndarray]:
        """(P, ∇ₓP)"""
        d = np.asarray(x, dtype=float) - self.center(t)
        Sd = self.S(t) @ d
        return float(d @ Sd), 2.0 * Sd

    def rate(self, vector_field: VectorField, x, t: float) -> float:
        return self.rate_grad(vector_field, x, t, with_grad=False)[0]

    def rate_grad(self, vector_field: VectorField, x, t: float, with_grad: bool = True) -> Tuple[float, Optional[np.ndarray]]:
        """
        Ṗ = 2 dᵀS(F(x,t) − x̃̇(t)) + dᵀṠd and its gradient in x.
        """
        x = np.asarray(x, dtype=float)
        d = x - self.center(t)
        S = self.S(t)
        S_rate = self.S_rate(t)
        relative_rate = vector_field(x, t) - self.trajectory.rate(t)
        Sd = S @ d
        value = float(2.0 * Sd @ relative_rate + d @ S_rate @ d)
        if not with_grad:
            return value, None
        J = jacobian(vector_field, x, t)
        grad = 2.0 * (S @ relative_rate) + 2.0 * (J.T @ Sd) + 2.0 * (S_rate @ d)
        return value, grad


def shape_value(shape: QuadraticShape, x, t: float) -> float:
    """P(x − x̃(t), t)"""
    return shape.value(x, t)


def shape_rate(shape: QuadraticShape, vector_field: VectorField, x, t: float) -> float:
    """Ṗ(x − x̃(t), t) على طول الحقل"""
    return shape.rate(vector_field, x, t)
