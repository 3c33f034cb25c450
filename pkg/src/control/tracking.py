"""
متحكمات التتبع LQR
Time-varying LQR tracking, Riccati machinery and the n-link stabilizer
"""

from typing import Callable, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import linalg

from src.control.shape import QuadraticShape
from src.core.errors import DimensionMismatch, NoStabilizingGain, NotConverged
from src.core.numkernel import chol_lower, solve_spd, symmetrize
from src.integration.interpolant import MatrixInterpolant
from src.integration.odeint import IntegrationConfig, solve_dense
from src.systems.benchmarks import (
    GRAVITY,
    make_nlink_simplified,
    nlink_mass_derivative_times,
    nlink_mass_matrix,
    nlink_upright,
)
from src.systems.dynamics import ControlSystem, Controller
from src.trajectory.trajectory import constant_trajectory

MatrixFn = Callable[[float], np.ndarray]

KLEINMAN_MAX_ITER = 200
# relative change below which a non-decreasing step counts as rounding noise
KLEINMAN_STAGNATION = 1e-8
INITIAL_GAIN_SHIFT = 1.0


def care_residual(A, B, Q, R, S) -> np.ndarray:
    """AᵀS + SA − SBR⁻¹BᵀS + Q"""
    return A.T @ S + S @ A - S @ B @ solve_spd(R, B.T @ S) + Q


def lqr_gain(B, R, S) -> np.ndarray:
    """K = R⁻¹BᵀS"""
    return solve_spd(R, np.asarray(B).T @ S)


def _is_hurwitz(A) -> bool:
    return bool(np.max(np.linalg.eigvals(A).real) < 0.0)


def riccati_backward(
    A: MatrixFn,
    B: MatrixFn,
    Q,
    R,
    S_T,
    T: float,
    cfg: Optional[IntegrationConfig] = None,
    t0: float = 0.0,
) -> MatrixInterpolant:
    """
    حل معادلة ريكاتي التفاضلية للخلف

    −Ṡ = AᵀS + SA − SBR⁻¹BᵀS + Q, S(T) = S_T. Integrated in reversed time
    s = T − t with RKF45; S is symmetrized after every accepted step.
    """
    cfg = cfg or IntegrationConfig.from_settings()
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S_T = np.atleast_2d(np.asarray(S_T, dtype=float))
    for M in (Q, R, S_T):
        chol_lower(M)
    n = Q.shape[0]
    if S_T.shape != (n, n):
        raise DimensionMismatch(f"S_T has shape {S_T.shape}, expected {(n, n)}")

    def reversed_rhs(s, flat):
        t = T - s
        S = flat.reshape(n, n)
        At, Bt = A(t), B(t)
        return (At.T @ S + S @ At - S @ Bt @ solve_spd(R, Bt.T @ S) + Q).ravel()

    def project(flat):
        return symmetrize(flat.reshape(n, n)).ravel()

    logger.info(f"Integrating Riccati equation backward on [{t0}, {T}] (n={n})")
    reversed_solution = solve_dense(reversed_rhs, S_T.ravel(), 0.0, T - t0, cfg, post_step=project)
    return MatrixInterpolant(reversed_solution.reversed_time(T), n)


def _shifted_initial_gain(A, B) -> np.ndarray:
    """
    كسب مثبت ابتدائي

    With α exceeding the spectral abscissa of −A, −(A + αI) is Hurwitz and
    the Lyapunov solution Z of (A + αI)Z + Z(A + αI)ᵀ = 2BBᵀ is positive
    definite for controllable (A, B). K₀ = BᵀZ⁻¹ then gives
    (A − BK₀)Z + Z(A − BK₀)ᵀ = −2αZ, so A − BK₀ decays at rate α.
    """
    n = A.shape[0]
    eigenvalues = np.linalg.eigvals(A)
    if np.max(eigenvalues.real) < 0.0:
        return np.zeros((B.shape[1], n))
    alpha = max(0.0, float(np.max(-eigenvalues.real))) + INITIAL_GAIN_SHIFT
    shifted = A + alpha * np.eye(n)
    Z = linalg.solve_continuous_lyapunov(-shifted, -2.0 * B @ B.T)
    try:
        K0 = solve_spd(symmetrize(Z), B).T
    except np.linalg.LinAlgError as exc:
        raise NoStabilizingGain("initial gain search failed: (A, B) is not controllable") from exc
    if not _is_hurwitz(A - B @ K0):
        raise NoStabilizingGain("initial gain does not stabilize A − BK₀")
    return K0


def care_kleinman(
    A,
    B,
    Q,
    R,
    tol: float = 1e-13,
    max_iter: int = KLEINMAN_MAX_ITER,
    history: Optional[List[np.ndarray]] = None,
) -> np.ndarray:
    """
    معادلة ريكاتي الجبرية بطريقة كلاينمان

    Newton iteration on the CARE: each step solves the Lyapunov equation
    (A − BK)ᵀP + P(A − BK) = −(Q + KᵀRK) and sets K = R⁻¹BᵀP. From the
    first iterate on, P is non-increasing. Every iterate is appended to
    ``history`` when a list is given.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    chol_lower(Q)
    chol_lower(R)

    K = _shifted_initial_gain(A, B)
    P_prev = None
    last_change = np.inf
    q_scale = max(1.0, float(np.linalg.norm(Q)))
    for iteration in range(1, max_iter + 1):
        closed = A - B @ K
        P = symmetrize(linalg.solve_continuous_lyapunov(closed.T, -(Q + K.T @ R @ K)))
        K = lqr_gain(B, R, P)
        if history is not None:
            history.append(P)
        if P_prev is not None:
            change = float(np.linalg.norm(P - P_prev)) / max(1.0, float(np.linalg.norm(P)))
            # far from the solution the relative change may grow for many steps
            if change <= tol or (change <= KLEINMAN_STAGNATION and change >= last_change):
                break
            last_change = change
        P_prev = P
    else:
        raise NotConverged(f"Kleinman iteration did not converge in {max_iter} iterations")

    residual = float(np.linalg.norm(care_residual(A, B, Q, R, P)))
    if residual > 1e-8 * q_scale:
        raise NotConverged(f"CARE residual {residual:.3e} above tolerance after {iteration} iterations")
    logger.debug(f"Kleinman iteration converged in {iteration} iterations (residual {residual:.2e})")
    return P


def tvlqr(
    system: ControlSystem,
    trajectory,
    Q,
    R,
    S_T,
    cfg: Optional[IntegrationConfig] = None,
) -> Tuple[Controller, QuadraticShape]:
    """
    متحكم تتبع LQR متغير زمنياً

    u(x,t) = ũ(t) − R⁻¹B(t)ᵀS(t)(x − x̃(t)) with A(t), B(t) from linearizing
    the system along the trajectory.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if trajectory.state_dim != system.state_dim or trajectory.control_dim != system.control_dim:
        raise DimensionMismatch(f"trajectory dimensions do not match {system.name}")

    def A(t):
        return system.A(trajectory.state(t), trajectory.control(t), t)

    def B(t):
        return system.B(trajectory.state(t), trajectory.control(t), t)

    S = riccati_backward(A, B, Q, R, S_T, trajectory.T, cfg, t0=trajectory.t0)

    def gain(t):
        return lqr_gain(B(t), R, symmetrize(S(t)))

    def control(x, t):
        return trajectory.control(t) - gain(t) @ (x - trajectory.state(t))

    controller = Controller(control=control, state_jacobian=lambda x, t: -gain(t), name="tvlqr")
    return controller, QuadraticShape.from_interpolant(S, trajectory)


def nlink_lqr(n: int, g: float = GRAVITY, Q_n=None, R=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    LQR للنموذج المبسط عند الوضع العمودي

    Returns (A, B, K, S_n) for θ̈ = −M⁻¹h − u linearized at upright,
    with Q_n = 10nI and R = I by default.
    """
    simplified = make_nlink_simplified(n, g)
    x_up = nlink_upright(n)
    u0 = np.zeros(n)
    A = simplified.A(x_up, u0)
    B = simplified.B(x_up, u0)
    Q_n = 10.0 * n * np.eye(2 * n) if Q_n is None else np.atleast_2d(np.asarray(Q_n, dtype=float))
    R = np.eye(n) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    S_n = care_kleinman(A, B, Q_n, R)
    return A, B, lqr_gain(B, R, S_n), S_n


def nlink_controller(n: int, g: float = GRAVITY, Q_n=None, R=None, T: float = 1.0) -> Tuple[Controller, QuadraticShape]:
    """
    متحكم مثبت للبندول متعدد الوصلات

    The simplified-model law u_s = −KΔ is transferred to the full model as
    u = −M(θ)·u_s = M(θ)KΔ, which reproduces θ̈ = −M⁻¹h − u_s exactly.
    The shape is P(x) = ΔᵀS_nΔ, constant in time.
    """
    _, _, K, S_n = nlink_lqr(n, g, Q_n, R)
    x_up = nlink_upright(n)

    def control(x, t):
        return nlink_mass_matrix(x[:n]) @ (K @ (x - x_up))

    def state_jacobian(x, t):
        theta = x[:n]
        v = K @ (x - x_up)
        J = nlink_mass_matrix(theta) @ K
        J[:, :n] += nlink_mass_derivative_times(theta, v)
        return J

    controller = Controller(control=control, state_jacobian=state_jacobian, name=f"nlink{n}_lqr")
    trajectory = constant_trajectory(x_up, np.zeros(n), T)
    return controller, QuadraticShape.constant_shape(S_n, trajectory)
