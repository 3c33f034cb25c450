"""
أنظمة المقارنة المعيارية
Benchmark systems: inverted pendulum, quadcopter and the n-link pendulum
"""

from typing import Tuple

import numpy as np

from src.core.errors import InvalidParameter
from src.core.numkernel import solve_spd
from src.systems.dynamics import ControlSystem, VectorField, linear_field

GRAVITY = 9.81


# ============================================================
# البندول المقلوب
# ============================================================

def make_pendulum(m: float = 1.0, l: float = 0.5, g: float = GRAVITY, b: float = 0.1) -> ControlSystem:
    """
    θ̈ = (g/l) sinθ − bθ̇/(ml²) + u/(ml²)

    θ = 0 is the upright (unstable) equilibrium.
    """
    if m <= 0 or l <= 0:
        raise InvalidParameter(f"pendulum mass and length must be positive (m={m}, l={l})")
    inertia = m * l * l

    def rhs(x, u, t):
        theta, omega = x
        return np.array([omega, g / l * np.sin(theta) - b * omega / inertia + u[0] / inertia])

    def jac_x(x, u, t):
        return np.array([[0.0, 1.0], [g / l * np.cos(x[0]), -b / inertia]])

    def jac_u(x, u, t):
        return np.array([[0.0], [1.0 / inertia]])

    return ControlSystem(
        name="pendulum", state_dim=2, control_dim=1, rhs=rhs, jac_x=jac_x, jac_u=jac_u,
        params={"m": m, "l": l, "g": g, "b": b},
    )


# ============================================================
# الطائرة الرباعية
# ============================================================

def make_quadcopter(m: float = 1.0, g: float = GRAVITY) -> ControlSystem:
    """
    State (x, y, z, ψ, θ, φ, ẋ, ẏ, ż, ψ̇, θ̇, φ̇), controls (u₁..u₄).

    m ẍ = u₁(sinφ sinψ + cosφ cosψ sinθ)
    m ÿ = u₁(cosφ sinθ sinψ − cosψ sinφ)
    m z̈ = u₁ cosθ cosφ − m g
    m ψ̈ = u₂,  m θ̈ = u₃,  m φ̈ = u₄
    """
    if m <= 0:
        raise InvalidParameter(f"quadcopter mass must be positive (m={m})")

    def thrust_directions(psi, theta, phi):
        sps, cps = np.sin(psi), np.cos(psi)
        sth, cth = np.sin(theta), np.cos(theta)
        sph, cph = np.sin(phi), np.cos(phi)
        return np.array([
            sph * sps + cph * cps * sth,
            cph * sth * sps - cps * sph,
            cth * cph,
        ])

    def rhs(x, u, t):
        psi, theta, phi = x[3:6]
        acc = u[0] / m * thrust_directions(psi, theta, phi)
        acc[2] -= g
        return np.concatenate([x[6:12], acc, u[1:4] / m])

    def jac_x(x, u, t):
        psi, theta, phi = x[3:6]
        sps, cps = np.sin(psi), np.cos(psi)
        sth, cth = np.sin(theta), np.cos(theta)
        sph, cph = np.sin(phi), np.cos(phi)
        k = u[0] / m
        J = np.zeros((12, 12))
        J[0:6, 6:12] = np.eye(6)
        # d(acc)/d(ψ, θ, φ)
        J[6, 3:6] = k * np.array([sph * cps - cph * sps * sth, cph * cps * cth, cph * sps - sph * cps * sth])
        J[7, 3:6] = k * np.array([cph * sth * cps + sps * sph, cph * cth * sps, -sph * sth * sps - cps * cph])
        J[8, 3:6] = k * np.array([0.0, -sth * cph, -cth * sph])
        return J

    def jac_u(x, u, t):
        psi, theta, phi = x[3:6]
        J = np.zeros((12, 4))
        J[6:9, 0] = thrust_directions(psi, theta, phi) / m
        J[9:12, 1:4] = np.eye(3) / m
        return J

    return ControlSystem(
        name="quadcopter", state_dim=12, control_dim=4, rhs=rhs, jac_x=jac_x, jac_u=jac_u,
        params={"m": m, "g": g},
    )


def quadcopter_hover(m: float = 1.0, g: float = GRAVITY, position=(0.0, 0.0, 0.0)) -> Tuple[np.ndarray, np.ndarray]:
    """نقطة التحويم (x_eq, u_eq)"""
    x_eq = np.zeros(12)
    x_eq[0:3] = position
    return x_eq, np.array([m * g, 0.0, 0.0, 0.0])


# ============================================================
# البندول متعدد الوصلات
# ============================================================

def _check_links(n: int) -> None:
    if int(n) != n or n < 1:
        raise InvalidParameter(f"link count must be a positive integer, got {n}")


def _link_weights(n: int) -> np.ndarray:
    """m_jk = n − max(j,k) (0-based): number of point masses beyond both links"""
    idx = np.arange(n)
    return (n - np.maximum.outer(idx, idx)).astype(float)


def nlink_upright(n: int) -> np.ndarray:
    """(π/2, …, π/2, 0, …, 0)"""
    _check_links(n)
    return np.concatenate([np.full(n, np.pi / 2), np.zeros(n)])


def nlink_mass_matrix(theta: np.ndarray) -> np.ndarray:
    """M(θ)_jk = m_jk cos(θ_j − θ_k)"""
    theta = np.asarray(theta, dtype=float)
    diff = np.subtract.outer(theta, theta)
    return _link_weights(theta.size) * np.cos(diff)


def nlink_bias(theta: np.ndarray, omega: np.ndarray, g: float = GRAVITY) -> np.ndarray:
    """
    h(θ, θ̇): velocity-product and gravity terms of the Lagrangian.

    h_j = Σ_k m_jk sin(θ_j − θ_k) θ̇_k² + g (n − j) cos θ_j
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    W = _link_weights(n) * np.sin(np.subtract.outer(theta, theta))
    return W @ (np.asarray(omega, dtype=float) ** 2) + g * (n - np.arange(n)) * np.cos(theta)


def nlink_energy(x: np.ndarray, g: float = GRAVITY) -> float:
    """الطاقة الميكانيكية الكلية T + V"""
    x = np.asarray(x, dtype=float)
    n = x.size // 2
    theta, omega = x[:n], x[n:]
    kinetic = 0.5 * omega @ nlink_mass_matrix(theta) @ omega
    potential = g * np.sum((n - np.arange(n)) * np.sin(theta))
    return float(kinetic + potential)


def nlink_mass_derivative_times(theta: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix D with D[:, i] = (∂M/∂θ_i) v."""
    n = theta.size
    W = _link_weights(n) * np.sin(np.subtract.outer(theta, theta))
    return -np.diag(W @ v) + W * v[None, :]


def _acceleration_jacobians(theta, omega, accel, g) -> Tuple[np.ndarray, np.ndarray]:
    """
    ∂a/∂θ, ∂a/∂θ̇ for a = M(θ)⁻¹(u − h(θ, θ̇)) given a already evaluated.
    """
    n = theta.size
    weights = _link_weights(n)
    diff = np.subtract.outer(theta, theta)
    C = weights * np.cos(diff)
    W = weights * np.sin(diff)
    w2 = omega ** 2
    dh_dtheta = np.diag(C @ w2 - g * (n - np.arange(n)) * np.sin(theta)) - C * w2[None, :]
    dh_domega = 2.0 * W * omega[None, :]
    M = C
    da_dtheta = -solve_spd(M, nlink_mass_derivative_times(theta, accel) + dh_dtheta)
    da_domega = -solve_spd(M, dh_domega)
    return da_dtheta, da_domega


def make_nlink(n: int, g: float = GRAVITY) -> ControlSystem:
    """
    M(θ) θ̈ + h(θ, θ̇) = u with unit masses and lengths.

    Angles are absolute, measured from the positive horizontal axis, so the
    upright equilibrium is θᵢ = π/2.
    """
    _check_links(n)

    def rhs(x, u, t):
        theta, omega = x[:n], x[n:]
        accel = solve_spd(nlink_mass_matrix(theta), u - nlink_bias(theta, omega, g))
        return np.concatenate([omega, accel])

    def jac_x(x, u, t):
        theta, omega = x[:n], x[n:]
        accel = solve_spd(nlink_mass_matrix(theta), u - nlink_bias(theta, omega, g))
        da_dtheta, da_domega = _acceleration_jacobians(theta, omega, accel, g)
        return np.block([[np.zeros((n, n)), np.eye(n)], [da_dtheta, da_domega]])

    def jac_u(x, u, t):
        return np.vstack([np.zeros((n, n)), solve_spd(nlink_mass_matrix(x[:n]), np.eye(n))])

    return ControlSystem(
        name=f"nlink{n}", state_dim=2 * n, control_dim=n, rhs=rhs, jac_x=jac_x, jac_u=jac_u,
        params={"n": n, "g": g},
    )


def make_nlink_simplified(n: int, g: float = GRAVITY) -> ControlSystem:
    """θ̈ = −M(θ)⁻¹ h(θ, θ̇) − u"""
    _check_links(n)

    def drift(x):
        theta, omega = x[:n], x[n:]
        return -solve_spd(nlink_mass_matrix(theta), nlink_bias(theta, omega, g))

    def rhs(x, u, t):
        return np.concatenate([x[n:], drift(x) - u])

    def jac_x(x, u, t):
        theta, omega = x[:n], x[n:]
        da_dtheta, da_domega = _acceleration_jacobians(theta, omega, drift(x), g)
        return np.block([[np.zeros((n, n)), np.eye(n)], [da_dtheta, da_domega]])

    def jac_u(x, u, t):
        return np.vstack([np.zeros((n, n)), -np.eye(n)])

    return ControlSystem(
        name=f"nlink_simplified{n}", state_dim=2 * n, control_dim=n, rhs=rhs, jac_x=jac_x, jac_u=jac_u,
        params={"n": n, "g": g},
    )


# ============================================================
# التناقص القياسي
# ============================================================

def make_scalar_decay(rate: float = 1.0) -> VectorField:
    """ẋ = −rate·x"""
    if rate <= 0:
        raise InvalidParameter(f"decay rate must be positive, got {rate}")
    return linear_field(np.array([[-rate]]), name="scalar_decay")
