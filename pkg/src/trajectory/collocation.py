"""
توليد المسارات بالتجميع المباشر
Direct trapezoidal collocation for minimum-effort reference trajectories
"""

from typing import Optional

import numpy as np
from loguru import logger

from src.core.errors import DimensionMismatch, InvalidParameter, NotConverged
from src.optimization.multistart import multistart
from src.optimization.nlp import Constraint, ConstraintKind, NlpProblem, Sense
from src.systems.dynamics import ControlSystem
from src.trajectory.trajectory import Trajectory

DEFECT_TOL = 1e-6
# grids at least this fine are warm-started from a grid REFINE_FACTOR times coarser
REFINE_MIN_SEGMENTS = 60
REFINE_FACTOR = 10
REFINE_COARSE_MIN = 10


class _Layout:
    """ترتيب متغيرات القرار z = (x₀ … x_N, u₀ … u_N)"""

    def __init__(self, n: int, m: int, N: int):
        self.n, self.m, self.N = n, m, N
        self.state_size = (N + 1) * n
        self.size = self.state_size + (N + 1) * m

    def split(self, z: np.ndarray):
        X = z[: self.state_size].reshape(self.N + 1, self.n)
        U = z[self.state_size:].reshape(self.N + 1, self.m)
        return X, U

    def join(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(X), np.ravel(U)])

    def x_slice(self, i: int) -> slice:
        return slice(i * self.n, (i + 1) * self.n)

    def u_slice(self, i: int) -> slice:
        start = self.state_size + i * self.m
        return slice(start, start + self.m)


def collocation_trajectory(
    system: ControlSystem,
    x0,
    xT,
    T: float,
    N: int,
    effort_weight: float = 1.0,
    starts: int = 3,
    perturbation: float = 0.05,
    seed: int = 0,
    tol: float = 1e-8,
    initial_guess: Optional[Trajectory] = None,
    refine: bool = True,
) -> Trajectory:
    """
    مسار بأقل جهد بين x0 و xT

    min effort_weight·Σ‖uᵢ‖²Δt over knot states and controls subject to
    trapezoidal defects xᵢ₊₁ − xᵢ − Δt/2 (fᵢ + fᵢ₊₁) = 0 and the boundary
    conditions. Starts are the straight-line guess (or ``initial_guess``)
    with seeded Gaussian perturbations. Without ``initial_guess``, fine
    grids start from the solution on a coarser grid when ``refine`` is set.
    """
    if N < 2:
        raise InvalidParameter(f"collocation needs at least 2 segments, got {N}")
    if T <= 0 or effort_weight <= 0:
        raise InvalidParameter("horizon and effort weight must be positive")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    xT = np.asarray(xT, dtype=float).reshape(-1)
    n, m = system.state_dim, system.control_dim
    if x0.size != n or xT.size != n:
        raise DimensionMismatch(f"boundary states must have {n} entries")

    layout = _Layout(n, m, N)
    times = np.linspace(0.0, T, N + 1)
    dt = T / N

    def objective(z):
        _, U = layout.split(z)
        grad = np.zeros_like(z)
        grad[layout.state_size:] = 2.0 * effort_weight * dt * np.ravel(U)
        return effort_weight * dt * float(np.sum(U * U)), grad

    def defects(z):
        X, U = layout.split(z)
        F = np.array([system.f(X[i], U[i], times[i]) for i in range(N + 1)])
        A = [system.A(X[i], U[i], times[i]) for i in range(N + 1)]
        B = [system.B(X[i], U[i], times[i]) for i in range(N + 1)]
        values = (X[1:] - X[:-1] - 0.5 * dt * (F[:-1] + F[1:])).ravel()
        jac = np.zeros((N * n, layout.size))
        eye = np.eye(n)
        for i in range(N):
            rows = slice(i * n, (i + 1) * n)
            jac[rows, layout.x_slice(i)] = -eye - 0.5 * dt * A[i]
            jac[rows, layout.x_slice(i + 1)] = eye - 0.5 * dt * A[i + 1]
            jac[rows, layout.u_slice(i)] = -0.5 * dt * B[i]
            jac[rows, layout.u_slice(i + 1)] = -0.5 * dt * B[i + 1]
        return values, jac

    def boundary(z):
        X, _ = layout.split(z)
        jac = np.zeros((2 * n, layout.size))
        jac[:n, layout.x_slice(0)] = np.eye(n)
        jac[n:, layout.x_slice(N)] = np.eye(n)
        return np.concatenate([X[0] - x0, X[N] - xT]), jac

    problem = NlpProblem(
        dimension=layout.size,
        objective=objective,
        sense=Sense.MINIMIZE,
        constraints=[
            Constraint(defects, ConstraintKind.EQUALITY, "defects"),
            Constraint(boundary, ConstraintKind.EQUALITY, "boundary"),
        ],
        name=f"collocation[{system.name}]",
    )

    if initial_guess is None and refine and N >= REFINE_MIN_SEGMENTS:
        coarse_segments = max(REFINE_COARSE_MIN, N // REFINE_FACTOR)
        logger.info(f"Warm-starting {system.name} collocation from {coarse_segments} segments")
        try:
            initial_guess = collocation_trajectory(
                system, x0, xT, T, coarse_segments, effort_weight, starts, perturbation, seed, tol,
            )
        except NotConverged as exc:
            logger.warning(f"Coarse collocation failed ({exc}); using the straight-line guess")

    if initial_guess is not None:
        guess = layout.join(
            np.array([initial_guess.state(t) for t in times]),
            np.array([initial_guess.control(t) for t in times]),
        )
    else:
        weights = (times / T)[:, None]
        guess = layout.join((1.0 - weights) * x0 + weights * xT, np.zeros((N + 1, m)))

    def sampler(rng):
        if perturbation == 0:
            return guess.copy()
        return guess + perturbation * rng.standard_normal(guess.size)

    logger.info(f"Collocating {system.name} trajectory: T={T}, N={N}, {layout.size} variables")
    result = multistart(problem, sampler, stall=starts, seed=seed, tol=tol, max_starts=starts)
    if result.violation > DEFECT_TOL:
        raise NotConverged(f"collocation did not reach violation {DEFECT_TOL:g} (best {result.violation:.3e})")

    X, U = layout.split(result.x)
    defect = float(np.max(np.abs(defects(result.x)[0])))
    logger.info(f"Collocation finished: effort {result.value:.6g}, max defect {defect:.3e}")
    return Trajectory(times, X, U, system, max_defect=defect)
