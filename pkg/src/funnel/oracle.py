"""
المرجع الدقيق للأنظمة الخطية
Exact funnel levels for linear systems by propagating the goal ellipsoid
with the state-transition matrix
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger

from src.core.errors import DimensionMismatch, InvalidParameter
from src.core.numkernel import check_symmetric, chol_lower, gen_eig_max, mat_exp, solve_spd, symmetrize

# r² of the reference hypersphere for the n-link goal
NLINK_GOAL_RADIUS_SQUARED = 0.025


@dataclass(frozen=True)
class EllipsoidSet:
    """
    قطع ناقص {x : (x − c)ᵀQ⁻¹(x − c) ≤ 1}
    """
    center: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        Q = check_symmetric(self.Q, "Q")
        chol_lower(Q)
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if center.size != Q.shape[0]:
            raise DimensionMismatch(f"center has {center.size} entries, Q is {Q.shape}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "center", center)

    @classmethod
    def from_level_set(cls, S, level: float, center=None) -> "EllipsoidSet":
        """{(x − c)ᵀS(x − c) ≤ level} as an EllipsoidSet"""
        S = check_symmetric(S, "S")
        if not level > 0:
            raise InvalidParameter(f"level must be positive, got {level}")
        center = np.zeros(S.shape[0]) if center is None else center
        return cls(center, symmetrize(level * solve_spd(S, np.eye(S.shape[0]))))

    def contains(self, x, slack: float = 0.0) -> bool:
        d = np.asarray(x, dtype=float) - self.center
        return float(d @ solve_spd(self.Q, d)) <= 1.0 + slack


def propagate_ellipsoid(A, E: EllipsoidSet, t: float) -> EllipsoidSet:
    """
    صورة القطع الناقص تحت التدفق الخطي

    Q(t) = e^{At} Q e^{Aᵀt}; the center moves with e^{At}.
    """
    Phi = mat_exp(A, t)
    if Phi.shape[0] != E.Q.shape[0]:
        raise DimensionMismatch(f"A is {Phi.shape}, ellipsoid is {E.Q.shape}")
    return EllipsoidSet(Phi @ E.center, symmetrize(Phi @ E.Q @ Phi.T))


def optimal_rho_sequence(A, S, E_T: EllipsoidSet, grid) -> np.ndarray:
    """
    المستويات المثلى ρᵢ

    ρᵢ is the largest ρ with {xᵀSx ≤ ρ} ⊆ E(−(T − tᵢ)). With W = e^{A(T−tᵢ)}
    the pulled-back ellipsoid is {x : xᵀWᵀQ_T⁻¹Wx ≤ 1}, so
    ρᵢ = 1 / λ_max(S⁻¹ WᵀQ_T⁻¹W). Each level is computed directly from its
    own transition matrix.
    """
    S = check_symmetric(S, "S")
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if np.any(np.diff(grid) <= 0):
        raise InvalidParameter("grid must be strictly increasing")
    if np.linalg.norm(E_T.center) > 0:
        raise InvalidParameter("goal ellipsoid must be centered at the equilibrium")
    Q_inv = symmetrize(solve_spd(E_T.Q, np.eye(E_T.Q.shape[0])))
    T = grid[-1]
    levels = np.empty(grid.size)
    for i, t in enumerate(grid):
        W = mat_exp(A, T - t)
        levels[i] = 1.0 / gen_eig_max(symmetrize(W.T @ Q_inv @ W), S)
    logger.debug(f"oracle levels on {grid.size} times: ρ(0) = {levels[0]:.6g}, ρ(T) = {levels[-1]:.6g}")
    return levels


def volume_matched_level(S, radius: float = NLINK_GOAL_RADIUS_SQUARED, radius_reading: str = "squared") -> float:
    """
    مستوى الهدف المطابق للحجم

    The level ρ for which {xᵀSx ≤ ρ} has the volume of a ball of radius r in
    dim(S) dimensions: ρ = r²·(det S)^{1/dim}. ``radius`` is r² under the
    "squared" reading and r under the "plain" one.
    """
    S = check_symmetric(S, "S")
    if radius_reading == "squared":
        r_squared = radius
    elif radius_reading == "plain":
        r_squared = radius ** 2
    else:
        raise InvalidParameter(f"radius_reading must be 'squared' or 'plain', got {radius_reading!r}")
    L = chol_lower(S)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    return float(r_squared * np.exp(log_det / S.shape[0]))
