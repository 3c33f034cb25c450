"""
حل مسائل البرمجة غير الخطية
Local solver for smooth constrained NLPs: augmented Lagrangian outer loop
with BFGS (strong-Wolfe line search) inner minimization
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import minimize

from config.settings import settings
from src.core.errors import InvalidParameter, NonFiniteProblem

ValueGrad = Tuple[float, np.ndarray]
ConstraintEval = Tuple[np.ndarray, np.ndarray]

INITIAL_PENALTY = 10.0
PENALTY_GROWTH = 10.0
MAX_PENALTY = 1e12
# violation must shrink by this factor per outer iteration, else the penalty grows
VIOLATION_DECREASE = 0.25


class Sense(Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class ConstraintKind(Enum):
    INEQUALITY = "inequality"  # g(x) <= 0
    EQUALITY = "equality"      # h(x) = 0


class NlpStatus(Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration_limit"
    INFEASIBLE = "infeasible"


@dataclass
class Constraint:
    """
    قيد أملس

    ``fun(x)`` returns (values, jacobian): values has shape (p,) and the
    jacobian (p, n). Scalar constraints may return a float and a gradient.
    """
    fun: Callable[[np.ndarray], Tuple]
    kind: ConstraintKind = ConstraintKind.INEQUALITY
    name: str = ""

    def evaluate(self, x: np.ndarray) -> ConstraintEval:
        values, jac = self.fun(x)
        values = np.atleast_1d(np.asarray(values, dtype=float))
        jac = np.asarray(jac, dtype=float).reshape(values.size, x.size)
        return values, jac


@dataclass
class NlpProblem:
    """مسألة برمجة غير خطية معرفة باستدعاءات"""
    dimension: int
    objective: Callable[[np.ndarray], ValueGrad]
    sense: Sense = Sense.MINIMIZE
    constraints: List[Constraint] = field(default_factory=list)
    name: str = "nlp"

    def evaluate_objective(self, x: np.ndarray) -> ValueGrad:
        value, grad = self.objective(x)
        return float(value), np.asarray(grad, dtype=float).reshape(self.dimension)


@dataclass
class NlpResult:
    """نتيجة الحل المحلي"""
    x: np.ndarray
    value: float
    status: NlpStatus
    kkt_residual: float
    violation: float
    multipliers: List[np.ndarray] = field(default_factory=list)
    outer_iterations: int = 0
    solves: int = 1

    @property
    def converged(self) -> bool:
        return self.status == NlpStatus.CONVERGED


def constraint_violation(problem: NlpProblem, x: np.ndarray) -> float:
    worst = 0.0
    for constraint in problem.constraints:
        values, _ = constraint.evaluate(x)
        if constraint.kind == ConstraintKind.INEQUALITY:
            worst = max(worst, float(np.max(np.maximum(values, 0.0), initial=0.0)))
        else:
            worst = max(worst, float(np.max(np.abs(values), initial=0.0)))
    return worst


def _check_start(problem: NlpProblem, x0: np.ndarray) -> None:
    value, grad = problem.evaluate_objective(x0)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteProblem(f"{problem.name}: objective is not finite at the start point")
    for constraint in problem.constraints:
        values, jac = constraint.evaluate(x0)
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(jac))):
            raise NonFiniteProblem(f"{problem.name}: constraint '{constraint.name}' is not finite at the start point")


def solve_local(
    problem: NlpProblem,
    x0,
    tol: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_inner: Optional[int] = None,
) -> NlpResult:
    """
    حل محلي بطريقة لاغرانج المعززة

    Terminates when the scaled KKT residual and the constraint violation
    are both at most ``tol``, or after ``max_outer`` outer iterations.
    Iteration limits are reported in the status, never raised.
    """
    tol = settings.NLP_TOL_STRICT if tol is None else tol
    max_outer = settings.NLP_MAX_OUTER if max_outer is None else max_outer
    max_inner = settings.NLP_MAX_INNER if max_inner is None else max_inner
    if tol <= 0:
        raise InvalidParameter(f"tolerance must be positive, got {tol}")

    x = np.array(x0, dtype=float).reshape(problem.dimension)
    _check_start(problem, x)

    sign = -1.0 if problem.sense == Sense.MAXIMIZE else 1.0
    multipliers = [np.zeros(c.evaluate(x)[0].size) for c in problem.constraints]
    mu = INITIAL_PENALTY
    previous_violation = np.inf
    status = NlpStatus.ITERATION_LIMIT
    kkt = np.inf
    violation = np.inf

    def merit(z):
        f, g = problem.evaluate_objective(z)
        total = sign * f
        grad = sign * g
        for constraint, lam in zip(problem.constraints, multipliers):
            values, jac = constraint.evaluate(z)
            if constraint.kind == ConstraintKind.INEQUALITY:
                shifted = np.maximum(lam / mu + values, 0.0)
                total += 0.5 * mu * float(shifted @ shifted - (lam / mu) @ (lam / mu))
                grad = grad + mu * (jac.T @ shifted)
            else:
                total += float(lam @ values) + 0.5 * mu * float(values @ values)
                grad = grad + jac.T @ (lam + mu * values)
        if not (np.isfinite(total) and np.all(np.isfinite(grad))):
            return np.inf, np.zeros_like(z)
        return total, grad

    outer = 0
    for outer in range(1, max_outer + 1):
        inner = minimize(merit, x, jac=True, method="BFGS", options={"maxiter": max_inner, "gtol": tol})
        if np.all(np.isfinite(inner.x)):
            x = inner.x

        f, g = problem.evaluate_objective(x)
        stationarity = sign * g
        complementarity = 0.0
        violation = 0.0
        for i, constraint in enumerate(problem.constraints):
            values, jac = constraint.evaluate(x)
            if constraint.kind == ConstraintKind.INEQUALITY:
                multipliers[i] = np.maximum(multipliers[i] + mu * values, 0.0)
                violation = max(violation, float(np.max(np.maximum(values, 0.0), initial=0.0)))
                complementarity = max(complementarity, float(np.max(np.abs(multipliers[i] * values), initial=0.0)))
            else:
                multipliers[i] = multipliers[i] + mu * values
                violation = max(violation, float(np.max(np.abs(values), initial=0.0)))
            stationarity = stationarity + jac.T @ multipliers[i]

        scale = max(1.0, float(np.max(np.abs(g), initial=0.0)))
        kkt = max(float(np.max(np.abs(stationarity), initial=0.0)) / scale, complementarity / scale)
        logger.trace(f"{problem.name}: outer {outer} f={f:.6g} kkt={kkt:.2e} viol={violation:.2e} mu={mu:.1e}")

        if kkt <= tol and violation <= tol:
            status = NlpStatus.CONVERGED
            break
        if violation > VIOLATION_DECREASE * previous_violation:
            mu = min(mu * PENALTY_GROWTH, MAX_PENALTY)
        previous_violation = violation

    if status != NlpStatus.CONVERGED and violation > max(1e2 * tol, 1e-6):
        status = NlpStatus.INFEASIBLE

    value, _ = problem.evaluate_objective(x)
    return NlpResult(
        x=x,
        value=value,
        status=status,
        kkt_residual=kkt,
        violation=violation,
        multipliers=[m.copy() for m in multipliers],
        outer_iterations=outer,
    )


def fd_gradient_check(fun: Callable[[np.ndarray], ValueGrad], x: np.ndarray, step: float = 1e-6) -> float:
    """الخطأ النسبي بين التدرج التحليلي والفروق المركزية"""
    x = np.asarray(x, dtype=float)
    _, grad = fun(x)
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step * max(1.0, abs(x[i]))
        fd[i] = (fun(x + e)[0] - fun(x - e)[0]) / (2.0 * e[i])
    return float(np.linalg.norm(grad - fd) / max(1.0, np.linalg.norm(fd)))
