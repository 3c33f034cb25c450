"""
الأنظمة الديناميكية
Control systems, closed-loop vector fields and Jacobian evaluation
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.core.errors import DimensionMismatch, NonFiniteInput

StateFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
FieldFn = Callable[[np.ndarray, float], np.ndarray]

FD_REL_STEP = 1e-6


def fd_steps(x: np.ndarray) -> np.ndarray:
    """خطوة الفروق المركزية 1e-6·max(1,|xᵢ|)"""
    return FD_REL_STEP * np.maximum(1.0, np.abs(x))


def central_difference(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Jacobian of ``fun`` at ``x`` by central differences, one column per coordinate."""
    x = np.asarray(x, dtype=float)
    steps = fd_steps(x)
    columns = []
    for i, h in enumerate(steps):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        columns.append((np.asarray(fun(xp), dtype=float) - np.asarray(fun(xm), dtype=float)) / (2.0 * h))
    J = np.column_stack(columns) if columns else np.zeros((0, 0))
    if not np.all(np.isfinite(J)):
        raise NonFiniteInput("finite-difference Jacobian is not finite")
    return J


@dataclass(frozen=True)
class ControlSystem:
    """
    نظام تحكم مفتوح الحلقة ẋ = f(x, u, t)
    """
    name: str
    state_dim: int
    control_dim: int
    rhs: StateFn
    jac_x: Optional[StateFn] = None
    jac_u: Optional[StateFn] = None
    params: dict = field(default_factory=dict)

    def f(self, x, u, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(self.control_dim)
        if x.shape != (self.state_dim,):
            raise DimensionMismatch(f"{self.name}: state has shape {x.shape}, expected ({self.state_dim},)")
        return np.asarray(self.rhs(x, u, t), dtype=float)

    def A(self, x, u, t: float = 0.0) -> np.ndarray:
        """∂f/∂x"""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(self.control_dim)
        if self.jac_x is not None:
            return np.asarray(self.jac_x(x, u, t), dtype=float)
        return central_difference(lambda z: self.f(z, u, t), x)

    def B(self, x, u, t: float = 0.0) -> np.ndarray:
        """∂f/∂u"""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(self.control_dim)
        if self.jac_u is not None:
            return np.asarray(self.jac_u(x, u, t), dtype=float)
        return central_difference(lambda w: self.f(x, w, t), u)


@dataclass(frozen=True)
class VectorField:
    """
    حقل متجهي مغلق الحلقة ẋ = F(x, t)

    ``matrix`` is set for linear time-invariant fields F(x) = A x so the
    exact ellipsoid oracle can use it.
    """
    name: str
    state_dim: int
    rhs: FieldFn
    jac: Optional[FieldFn] = None
    matrix: Optional[np.ndarray] = None

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(x, dtype=float), t), dtype=float)

    @property
    def is_linear(self) -> bool:
        return self.matrix is not None

    def jacobian(self, x, t: float = 0.0) -> np.ndarray:
        return jacobian(self, x, t)


@dataclass(frozen=True)
class Controller:
    """
    متحكم تغذية راجعة u(x, t)
    """
    control: FieldFn
    state_jacobian: Optional[FieldFn] = None
    name: str = "controller"

    def __call__(self, x, t: float = 0.0) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.control(np.asarray(x, dtype=float), t), dtype=float))

    def jacobian(self, x, t: float = 0.0) -> Optional[np.ndarray]:
        if self.state_jacobian is None:
            return None
        return np.atleast_2d(np.asarray(self.state_jacobian(np.asarray(x, dtype=float), t), dtype=float))


def jacobian(vector_field: VectorField, x, t: float = 0.0) -> np.ndarray:
    """
    ∂F/∂x: analytic when the field provides it, otherwise central differences.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("state must be finite")
    if vector_field.matrix is not None:
        return np.array(vector_field.matrix, dtype=float)
    if vector_field.jac is not None:
        J = np.asarray(vector_field.jac(x, t), dtype=float)
    else:
        J = central_difference(lambda z: vector_field(z, t), x)
    if not np.all(np.isfinite(J)):
        raise NonFiniteInput(f"{vector_field.name}: Jacobian is not finite at x={x}")
    return J


def linear_field(A, name: str = "linear") -> VectorField:
    """حقل خطي ẋ = A x"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"linear field matrix must be square, got {A.shape}")
    frozen = A.copy()
    frozen.setflags(write=False)
    return VectorField(
        name=name,
        state_dim=A.shape[0],
        rhs=lambda x, t: frozen @ x,
        jac=lambda x, t: frozen,
        matrix=frozen,
    )


def close_loop(system: ControlSystem, controller: Controller) -> VectorField:
    """
    إغلاق الحلقة F(x,t) = f(x, u(x,t), t)

    The Jacobian uses the chain rule A + B·∂u/∂x when the controller has a
    state Jacobian, otherwise the closed loop is differenced directly.
    """
    probe = controller(np.zeros(system.state_dim), 0.0)
    if probe.shape != (system.control_dim,):
        raise DimensionMismatch(
            f"controller returns shape {probe.shape}, {system.name} expects ({system.control_dim},)"
        )

    def rhs(x, t):
        return system.f(x, controller(x, t), t)

    jac = None
    if controller.state_jacobian is not None:
        def jac(x, t):
            u = controller(x, t)
            return system.A(x, u, t) + system.B(x, u, t) @ controller.jacobian(x, t)

    return VectorField(name=f"{system.name}+{controller.name}", state_dim=system.state_dim, rhs=rhs, jac=jac)
