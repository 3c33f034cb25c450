"""
التكامل العددي التكيفي
Adaptive Runge-Kutta-Fehlberg 4(5) integration, forward sensitivities and
dense output
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from loguru import logger

from config.settings import settings
from src.core.errors import InvalidParameter, NonFiniteInput, NonFiniteState, StepLimitExceeded
from src.integration.interpolant import Interpolant
from src.systems.dynamics import VectorField, jacobian

OdeFn = Callable[[float, np.ndarray], np.ndarray]

# Fehlberg tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
# 4th order propagating weights
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
# difference between the 5th and 4th order weights
_E = np.array([1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
BLOWUP_BOUND = 1e10


@dataclass(frozen=True)
class IntegrationConfig:
    """إعدادات المكامل"""
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_step: float = 0.001
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "max_step", "max_steps"):
            if getattr(self, name) <= 0:
                raise InvalidParameter(f"IntegrationConfig.{name} must be positive")

    @classmethod
    def from_settings(cls) -> "IntegrationConfig":
        return cls(
            abs_tol=settings.INTEGRATION_ABS_TOL,
            rel_tol=settings.INTEGRATION_REL_TOL,
            max_step=settings.INTEGRATION_MAX_STEP,
            max_steps=settings.INTEGRATION_MAX_STEPS,
        )


def _rkf45(
    fun: OdeFn,
    y0: np.ndarray,
    t0: float,
    t1: float,
    cfg: IntegrationConfig,
    post_step: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    record: bool = False,
) -> Tuple[np.ndarray, List[float], List[np.ndarray], List[np.ndarray]]:
    """
    حلقة RKF45 الأساسية

    Returns the final state and, when ``record`` is set, the accepted knots
    with their states and right-hand sides.
    """
    if t1 < t0:
        raise InvalidParameter(f"integration requires t1 >= t0 (t0={t0}, t1={t1})")
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("initial state is not finite")

    def escaped(t_now):
        return NonFiniteState(
            f"solution left every finite bound at t={t_now}",
            initial_state=y0, initial_time=t0, time=t_now,
        )

    t = float(t0)
    f = np.asarray(fun(t, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise escaped(t)
    times, states, rates = ([t], [y.copy()], [f.copy()]) if record else ([], [], [])

    span = t1 - t0
    end_slack = 1e-14 * max(1.0, abs(t1))
    h = min(cfg.max_step, span)
    steps = 0
    k = np.empty((6,) + y.shape)

    while t1 - t > end_slack:
        if steps >= cfg.max_steps:
            raise StepLimitExceeded(f"exceeded {cfg.max_steps} steps at t={t}")
        h = min(h, cfg.max_step, t1 - t)
        if h <= end_slack * 1e-2:
            raise StepLimitExceeded(f"step size underflow at t={t}")

        k[0] = f
        for s in range(1, 6):
            ys = y + h * np.tensordot(_A[s], k[:s], axes=1)
            if not np.all(np.isfinite(ys)):
                k[s:] = np.nan
                break
            k[s] = fun(t + _C[s] * h, ys)
        steps += 1

        if not np.all(np.isfinite(k)):
            h *= MIN_FACTOR
            if h < 1e-12 * max(1.0, abs(t)):
                raise escaped(t)
            continue

        y_new = y + h * np.tensordot(_B4, k, axes=1)
        err_vec = h * np.tensordot(_E, k, axes=1)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) if err_vec.size else 0.0

        if err <= 1.0:
            t = t + h if t1 - (t + h) > end_slack else t1
            if post_step is not None:
                y_new = post_step(y_new)
            y = y_new
            if not np.all(np.isfinite(y)) or np.max(np.abs(y), initial=0.0) > BLOWUP_BOUND:
                raise escaped(t)
            f = np.asarray(fun(t, y), dtype=float)
            if not np.all(np.isfinite(f)):
                raise escaped(t)
            if record:
                times.append(t)
                states.append(y.copy())
                rates.append(f.copy())
        factor = MAX_FACTOR if err == 0.0 else SAFETY * err ** -0.2
        h *= min(MAX_FACTOR, max(MIN_FACTOR, factor))

    return y, times, states, rates


def flow(vector_field: VectorField, x0, t0: float, t1: float, cfg: Optional[IntegrationConfig] = None) -> np.ndarray:
    """
    Σ_(x0,t0)(t1)
    """
    cfg = cfg or IntegrationConfig.from_settings()
    y, *_ = _rkf45(lambda t, x: vector_field(x, t), np.asarray(x0, dtype=float), t0, t1, cfg)
    return y


def flow_sensitivity(
    vector_field: VectorField, x0, t0: float, t1: float, cfg: Optional[IntegrationConfig] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (Σ(t1), Φ) with Φ̇ = ∂F/∂x Φ, Φ(t0) = I, integrated jointly with the state.
    """
    cfg = cfg or IntegrationConfig.from_settings()
    x0 = np.asarray(x0, dtype=float)
    n = x0.size

    def augmented(t, z):
        x = z[:n]
        Phi = z[n:].reshape(n, n)
        return np.concatenate([vector_field(x, t), (jacobian(vector_field, x, t) @ Phi).ravel()])

    z0 = np.concatenate([x0, np.eye(n).ravel()])
    try:
        z, *_ = _rkf45(augmented, z0, t0, t1, cfg)
    except NonFiniteState as exc:
        raise NonFiniteState(str(exc), initial_state=x0, initial_time=t0, time=exc.time) from exc
    return z[:n], z[n:].reshape(n, n)


def solve_dense(
    fun: OdeFn,
    y0,
    t0: float,
    t1: float,
    cfg: Optional[IntegrationConfig] = None,
    post_step: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Interpolant:
    """Dense RKF45 solution of y' = fun(t, y) as a Hermite interpolant on the accepted steps."""
    cfg = cfg or IntegrationConfig.from_settings()
    if not t1 > t0:
        raise InvalidParameter(f"dense output requires t1 > t0 (t0={t0}, t1={t1})")
    _, times, states, rates = _rkf45(fun, np.asarray(y0, dtype=float), t0, t1, cfg, post_step=post_step, record=True)
    logger.debug(f"dense integration on [{t0}, {t1}] accepted {len(times) - 1} steps")
    return Interpolant(times, np.array(states), np.array(rates))


def integrate_dense(
    vector_field: VectorField, x0, t0: float, t1: float, cfg: Optional[IntegrationConfig] = None
) -> Interpolant:
    """الحل الكثيف لحقل متجهي"""
    return solve_dense(lambda t, x: vector_field(x, t), x0, t0, t1, cfg)
