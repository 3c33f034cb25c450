"""
نواة الجبر الخطي
Dense linear-algebra kernels: matrix exponential, Cholesky, symmetric
eigenvalues and SPD solves.

All functions are pure and take/return numpy arrays.
"""

from typing import Tuple

import numpy as np
from scipy import linalg

from src.core.errors import (
    NonFiniteInput,
    NonSquareMatrix,
    NonSymmetricMatrix,
    NotPositiveDefinite,
)

SYMMETRY_TOL = 1e-12


def as_square(A, name: str = "matrix") -> np.ndarray:
    """تحويل إلى مصفوفة مربعة منتهية"""
    M = np.atleast_2d(np.asarray(A, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSquareMatrix(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    return M


def check_symmetric(S, name: str = "matrix") -> np.ndarray:
    """التحقق من التماثل دون فرضه"""
    M = as_square(S, name)
    scale = max(1.0, float(np.max(np.abs(M))))
    asym = float(np.max(np.abs(M - M.T)))
    if asym > SYMMETRY_TOL * scale:
        raise NonSymmetricMatrix(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    return M


def symmetrize(S) -> np.ndarray:
    """(S + Sᵀ)/2"""
    M = np.asarray(S, dtype=float)
    return 0.5 * (M + M.T)


def mat_exp(A, t: float = 1.0) -> np.ndarray:
    """
    e^{At}

    scipy's ``expm`` is the scaling-and-squaring algorithm with a diagonal
    Padé approximant of order up to 13.
    """
    M = as_square(A, "A")
    if not np.isfinite(t):
        raise NonFiniteInput("t must be finite")
    if t == 0.0:
        return np.eye(M.shape[0])
    return linalg.expm(M * t)


def chol_lower(S) -> np.ndarray:
    """عامل شوليسكي السفلي L بحيث LLᵀ = S"""
    M = check_symmetric(S, "S")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix is not positive definite: {exc}") from exc


def sym_eig_max(S) -> Tuple[float, np.ndarray]:
    """أكبر قيمة ذاتية ومتجهها الذاتي"""
    M = check_symmetric(S, "S")
    values, vectors = np.linalg.eigh(M)
    v = vectors[:, -1]
    return float(values[-1]), v / np.linalg.norm(v)


def gen_eig_max(Q, S) -> float:
    """
    λ_max(S⁻¹Q), computed as λ_max(L⁻¹QL⁻ᵀ) with LLᵀ = S.

    This is the largest value of xᵀQx on {xᵀSx = 1}.
    """
    Qm = check_symmetric(Q, "Q")
    L = chol_lower(S)
    if Qm.shape != L.shape:
        raise NonSquareMatrix(f"Q {Qm.shape} and S {L.shape} differ in size")
    W = linalg.solve_triangular(L, Qm, lower=True)
    C = linalg.solve_triangular(L, W.T, lower=True)
    return float(np.linalg.eigvalsh(symmetrize(C))[-1])


def solve_spd(S, b) -> np.ndarray:
    """حل S x = b لمصفوفة موجبة التحديد"""
    L = chol_lower(S)
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != L.shape[0]:
        raise NonSquareMatrix(f"right-hand side has {rhs.shape[0]} rows, expected {L.shape[0]}")
    return linalg.cho_solve((L, True), rhs)


def is_positive_definite(S) -> bool:
    try:
        chol_lower(symmetrize(S))
    except (NotPositiveDefinite, NonFiniteInput):
        return False
    return True
