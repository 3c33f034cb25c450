"""
بناء القمع
Backward funnel sweep: goal level, reach falsification with shrinking and
the derivative check, one interval at a time
"""

import time
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from loguru import logger
from scipy.linalg import eigh, solve_triangular
from scipy.optimize import brentq

from src.control.shape import QuadraticShape
from src.core.errors import FunnelForgeError, GoalExcludesTrajectoryEnd, RhoUnderflow, SynthesisError
from src.core.numkernel import chol_lower, gen_eig_max
from src.funnel.falsifiers import derivative_check, falsify_reach, shrink_reach
from src.funnel.funnel import RHO_FLOOR, Funnel, FunnelSpec, Goal
from src.optimization.multistart import run_indexed

CONCENTRIC_TOL = 1e-12

funnel_log = logger.bind(funnel="sweep")


@dataclass
class IntervalTrace:
    """سجل فترة واحدة من المسح"""
    k: int
    t_start: float
    t_end: float
    initial_rho: float
    rho: float = 0.0
    reach_solves: int = 0
    reach_counterexamples: int = 0
    escapes: int = 0
    derivative_solves: int = 0
    derivative_shrinks: int = 0
    wall_time: float = 0.0

    @property
    def solves(self) -> int:
        return self.reach_solves + self.derivative_solves


@dataclass
class SynthesisReport:
    """تقرير البناء"""
    goal_level: float = 0.0
    intervals: List[IntervalTrace] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def total_solves(self) -> int:
        return sum(i.solves for i in self.intervals)

    @property
    def total_counterexamples(self) -> int:
        return sum(i.reach_counterexamples + i.derivative_shrinks for i in self.intervals)

    def to_records(self) -> List[dict]:
        return [asdict(i) for i in sorted(self.intervals, key=lambda i: i.k)]


def _max_convex_quadratic_on_ball(H: np.ndarray, b: np.ndarray, constant: float, radius: float) -> float:
    """
    max yᵀHy + 2bᵀy + const over ‖y‖ ≤ r for H ⪰ 0

    The maximum lies on the sphere and solves the secular equation
    ‖(νI − H)⁻¹b‖ = r with ν ≥ λ_max(H).
    """
    if radius <= 0:
        return constant
    lam, V = eigh(H)
    beta = V.T @ b
    top = lam[-1]
    is_top = top - lam <= 1e-12 * max(1.0, abs(top))
    beta_top = float(np.linalg.norm(beta[is_top]))

    def value(y):
        return float(y @ H @ y + 2.0 * b @ y + constant)

    # hard case: b has no component along the top eigenspace
    if beta_top <= 1e-14 * max(1.0, float(np.linalg.norm(b))):
        z = np.zeros_like(beta)
        z[~is_top] = beta[~is_top] / (top - lam[~is_top])
        rest = float(np.linalg.norm(z))
        if rest <= radius:
            z[np.flatnonzero(is_top)[0]] = np.sqrt(radius ** 2 - rest ** 2)
            return value(V @ z)

    def excess(nu):
        return float(np.linalg.norm(beta / (nu - lam))) - radius

    # excess(lo) ≥ 0 ≥ excess(hi)
    lo = top + max(beta_top, 1e-300) / radius
    hi = top + max(float(np.linalg.norm(b)), 1e-300) / radius
    if excess(lo) <= 0:
        nu = lo
    elif excess(hi) >= 0:
        nu = hi
    else:
        nu = brentq(excess, lo, hi, xtol=1e-14, rtol=1e-14)
    return value(V @ (beta / (nu - lam)))


def goal_level(shape: QuadraticShape, goal: Goal) -> float:
    """
    أكبر مستوى ρ_N بحيث {P(x − x̃(T), T) ≤ ρ_N} ⊆ 𝒢

    Concentric case: c_G / λ_max(S⁻¹Q_G). Offset centres: bisection on ρ
    with an exact maximization of the goal quadratic over the ellipsoid.
    """
    T = shape.domain[1]
    S = shape.S(T)
    center = shape.center(T)
    if goal.value(center) >= goal.level:
        raise GoalExcludesTrajectoryEnd(
            f"x̃(T) has goal value {goal.value(center):.6g} ≥ c_G = {goal.level:.6g}"
        )
    concentric = goal.level / gen_eig_max(goal.Q, S)
    offset = center - goal.center
    if np.linalg.norm(offset) <= CONCENTRIC_TOL * max(1.0, float(np.linalg.norm(center))):
        return concentric

    # x − x_G = δ + L⁻ᵀy with ‖y‖² ≤ ρ
    L = chol_lower(S)
    W = solve_triangular(L.T, np.eye(L.shape[0]), lower=False)
    H = W.T @ goal.Q @ W
    b = W.T @ goal.Q @ offset
    constant = float(offset @ goal.Q @ offset)

    def slack(rho):
        return _max_convex_quadratic_on_ball(H, b, constant, np.sqrt(rho)) - goal.level

    if slack(concentric) <= 0:
        return concentric
    rho = brentq(slack, 0.0, concentric, xtol=1e-15, rtol=1e-13)
    while slack(rho) > 0:
        rho *= 1.0 - 1e-12
    return float(rho)


def _reach_phase(spec: FunnelSpec, k: int, rho_k: float, rho_next: float, trace: IntervalTrace) -> float:
    """
    Falsify/shrink until τ₁ consecutive solves find no counterexample.
    Speculative batches of ``threads`` solves are judged in attempt order
    and the tail after a counterexample is discarded.
    """
    stalls = 0
    attempt = 0
    while stalls < spec.tau1:
        batch = list(range(attempt, attempt + min(spec.threads, spec.tau1 - stalls)))
        results = run_indexed(lambda i: falsify_reach(spec, k, rho_k, rho_next, attempt=i), batch, spec.threads)
        for index, counterexample in zip(batch, results):
            attempt = index + 1
            trace.reach_solves += 1
            if counterexample is None:
                stalls += 1
                continue
            trace.reach_counterexamples += 1
            trace.escapes += int(counterexample.escaped)
            try:
                rho_k = shrink_reach(spec, k, counterexample, rho_k, rho_next)
            except FunnelForgeError as exc:
                raise SynthesisError(str(exc), k=k, nlp="shrink") from exc
            if rho_k < RHO_FLOOR:
                raise RhoUnderflow(f"ρ_{k} = {rho_k:.3e} fell below {RHO_FLOOR:g} during reach shrinking")
            stalls = 0
            break
    return rho_k


def synthesize(spec: FunnelSpec) -> Funnel:
    """
    بناء القمع بالمسح العكسي

    Returns the funnel with its SynthesisReport attached as ``report``.
    Lower-level failures are raised as SynthesisError naming the interval
    and NLP.
    """
    started = time.perf_counter()
    levels = np.empty(spec.grid.size)
    report = SynthesisReport()
    levels[-1] = report.goal_level = goal_level(spec.shape, spec.goal)
    logger.info(
        f"Synthesizing funnel over {spec.intervals} intervals on [{spec.grid[0]}, {spec.T}] "
        f"(ρ_N = {levels[-1]:.6g}, derivative check {'on' if spec.derivative_check else 'off'})"
    )

    for k in range(spec.intervals - 1, -1, -1):
        interval_started = time.perf_counter()
        rho_next = levels[k + 1]
        trace = IntervalTrace(k=k, t_start=float(spec.grid[k]), t_end=float(spec.grid[k + 1]), initial_rho=spec.c * rho_next)
        nlp = "reach"
        try:
            rho_k = _reach_phase(spec, k, trace.initial_rho, rho_next, trace)
            if spec.derivative_check:
                nlp = "derivative"
                rho_k = derivative_check(spec, k, rho_k, rho_next, trace)
        except (RhoUnderflow, SynthesisError):
            raise
        except FunnelForgeError as exc:
            raise SynthesisError(str(exc), k=k, nlp=nlp) from exc
        if rho_k < RHO_FLOOR:
            raise RhoUnderflow(f"ρ_{k} = {rho_k:.3e} fell below {RHO_FLOOR:g}")

        levels[k] = trace.rho = rho_k
        trace.wall_time = time.perf_counter() - interval_started
        report.intervals.append(trace)
        funnel_log.info(
            f"k={k} ρ={rho_k:.10g} reach {trace.reach_counterexamples}/{trace.reach_solves} "
            f"derivative shrinks {trace.derivative_shrinks}/{trace.derivative_solves}"
        )

    report.wall_time = time.perf_counter() - started
    logger.info(f"Funnel synthesized in {report.wall_time:.2f}s: ρ(0) = {levels[0]:.6g}, {report.total_solves} solves")
    return Funnel(spec.grid, levels, spec.shape, report=report)
