"""
مسائل التزييف
The three falsification NLPs of the funnel sweep: reach falsification,
reach shrinking and the discrete derivative check, plus the a-posteriori
audit built on them
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger

from src.core.errors import InfeasibleStart, NonFiniteState, RhoUnderflow
from src.funnel.funnel import RHO_FLOOR, Funnel, FunnelSpec
from src.integration.odeint import flow, flow_sensitivity
from src.optimization.multistart import Where, restart_rng, run_indexed, sample_ellipsoid
from src.optimization.nlp import Constraint, ConstraintKind, NlpProblem, Sense, solve_local

# restart streams, one per NLP, so their draws never overlap
STREAM_REACH = 1
STREAM_DERIVATIVE = 3
STREAM_AUDIT_REACH = 11
STREAM_AUDIT_DERIVATIVE = 13


@dataclass
class Counterexample:
    """
    مثال مضاد

    ``value`` is the NLP objective at ``x`` in original units; a flow that
    escapes to infinity is recorded with ``value = inf`` and ``escaped``.
    """
    x: np.ndarray
    value: float
    nlp: str
    escaped: bool = False


@dataclass
class AuditInterval:
    k: int
    reach_counterexamples: int = 0
    derivative_counterexamples: int = 0
    knot_violations: int = 0
    solves: int = 0


@dataclass
class AuditResult:
    """نتيجة التدقيق اللاحق"""
    intervals: List[AuditInterval] = field(default_factory=list)

    @property
    def total_counterexamples(self) -> int:
        return sum(a.reach_counterexamples + a.derivative_counterexamples for a in self.intervals)

    @property
    def passed(self) -> bool:
        return self.total_counterexamples == 0 and not any(a.knot_violations for a in self.intervals)


def _endpoint_value(spec: FunnelSpec, k: int, x: np.ndarray):
    """(P(Σ(x) − x̃(t_{k+1}), t_{k+1}), ∇ₓ) via forward sensitivities"""
    t0, t1 = spec.grid[k], spec.grid[k + 1]
    end, Phi = flow_sensitivity(spec.vector_field, x, t0, t1, spec.cfg)
    value, grad_end = spec.shape.value_grad(end, t1)
    return value, Phi.T @ grad_end


def _reach_problem(spec: FunnelSpec, k: int, rho_k: float, rho_next: float) -> NlpProblem:
    """
    max P(Σ(x) − x̃(t_{k+1})) / ρ_{k+1}  s.t.  P(x − x̃(t_k)) / ρ_k ≤ 1
    """
    t0 = spec.grid[k]

    def objective(x):
        try:
            value, grad = _endpoint_value(spec, k, x)
        except NonFiniteState:
            # escapes from inside the cross-section are counterexamples
            if spec.shape.value(x, t0) <= rho_k * (1.0 + spec.nlp_tol):
                raise
            return np.inf, np.zeros_like(x)
        return value / rho_next, grad / rho_next

    def inside(x):
        value, grad = spec.shape.value_grad(x, t0)
        return value / rho_k - 1.0, grad / rho_k

    return NlpProblem(
        dimension=spec.vector_field.state_dim,
        objective=objective,
        sense=Sense.MAXIMIZE,
        constraints=[Constraint(inside, ConstraintKind.INEQUALITY, "inside")],
        name=f"reach[k={k}]",
    )


def falsify_reach(spec: FunnelSpec, k: int, rho_k: float, rho_next: float, attempt: int = 0, stream: int = STREAM_REACH) -> Optional[Counterexample]:
    """
    محاولة تزييف واحدة لشرط الوصول

    One local solve from an interior sample of {P(x − x̃(t_k)) ≤ ρ_k}.
    Returns the solution when its flow endpoint leaves {P ≤ ρ_{k+1}}.
    """
    t0 = spec.grid[k]
    rng = restart_rng(spec.seed, attempt, stream, k)
    x0 = sample_ellipsoid(spec.shape.S(t0), rho_k, spec.shape.center(t0), Where.INTERIOR, rng)
    try:
        result = solve_local(_reach_problem(spec, k, rho_k, rho_next), x0, tol=spec.nlp_tol)
    except NonFiniteState as exc:
        logger.debug(f"reach[k={k}]: flow escaped from a state inside the cross-section")
        return Counterexample(exc.initial_state, np.inf, "reach", escaped=True)

    value = result.value * rho_next
    feasible = result.violation <= spec.nlp_tol
    if feasible and value > rho_next:
        return Counterexample(result.x, value, "reach")
    return None


def shrink_reach(spec: FunnelSpec, k: int, counterexample: Counterexample, rho_k: float, rho_next: float) -> float:
    """
    تقليص ρ_k بعد مثال مضاد

    Solves min P(x − x̃(t_k)) s.t. P(Σ(x) − x̃(t_{k+1})) ≥ ρ_{k+1} from the
    counterexample and returns γ₁ times the smallest level found, capped
    below the current ρ_k.
    """
    t0 = spec.grid[k]
    x_star = np.asarray(counterexample.x, dtype=float)
    best = spec.shape.value(x_star, t0)

    if not counterexample.escaped:
        start_value, _ = _endpoint_value(spec, k, x_star)
        if start_value < rho_next * (1.0 - spec.nlp_tol):
            raise InfeasibleStart(
                f"shrink[k={k}]: start reaches level {start_value:.6g} below ρ_(k+1) = {rho_next:.6g}"
            )

        def objective(x):
            value, grad = spec.shape.value_grad(x, t0)
            return value / rho_k, grad / rho_k

        def exits(x):
            value, grad = _endpoint_value(spec, k, x)
            return 1.0 - value / rho_next, -grad / rho_next

        problem = NlpProblem(
            dimension=x_star.size,
            objective=objective,
            sense=Sense.MINIMIZE,
            constraints=[Constraint(exits, ConstraintKind.INEQUALITY, "exits")],
            name=f"shrink[k={k}]",
        )
        try:
            result = solve_local(problem, x_star, tol=spec.nlp_tol)
        except NonFiniteState as exc:
            # an escaping state satisfies the exit constraint trivially
            best = min(best, spec.shape.value(exc.initial_state, t0))
        else:
            if result.violation <= spec.nlp_tol:
                best = min(best, result.value * rho_k)

    shrunk = min(spec.gamma1 * best, spec.gamma1 * rho_k)
    logger.debug(f"shrink[k={k}]: ρ_k {rho_k:.6g} -> {shrunk:.6g}")
    return shrunk


def _derivative_problem(spec: FunnelSpec, t: float, level: float) -> NlpProblem:
    """
    max Ṗ(x − x̃(t), t) / ρᴵ(t)  s.t.  P(x − x̃(t), t) / ρᴵ(t) = 1
    """
    def objective(x):
        value, grad = spec.shape.rate_grad(spec.vector_field, x, t)
        return value / level, grad / level

    def on_boundary(x):
        value, grad = spec.shape.value_grad(x, t)
        return value / level - 1.0, grad / level

    return NlpProblem(
        dimension=spec.vector_field.state_dim,
        objective=objective,
        sense=Sense.MAXIMIZE,
        constraints=[Constraint(on_boundary, ConstraintKind.EQUALITY, "boundary")],
        name=f"derivative[t={t:.6g}]",
    )


def falsify_derivative(
    spec: FunnelSpec, k: int, j: int, rho_k: float, rho_next: float, attempt: int = 0, stream: int = STREAM_DERIVATIVE
) -> Optional[Counterexample]:
    """
    محاولة تزييف واحدة لشرط المشتقة عند العينة j من الفترة k

    Counterexample iff max Ṗ > ρ̇ᴵ − ε on {P = ρᴵ(t_{k,j})}.
    """
    t0, t1 = spec.grid[k], spec.grid[k + 1]
    t = float(spec.sample_times(k)[j])
    rate = (rho_next - rho_k) / (t1 - t0)
    level = rho_k + rate * (t - t0)
    rng = restart_rng(spec.seed, attempt, stream, k, j)
    x0 = sample_ellipsoid(spec.shape.S(t), level, spec.shape.center(t), Where.BOUNDARY, rng)
    result = solve_local(_derivative_problem(spec, t, level), x0, tol=spec.nlp_tol)

    value = result.value * level
    if result.violation <= spec.nlp_tol and value > rate - spec.derivative_margin:
        return Counterexample(result.x, value, "derivative")
    return None


def derivative_check(spec: FunnelSpec, k: int, rho_k: float, rho_next: float, trace=None) -> float:
    """
    فحص شرط المشتقة المتقطع

    For every sample time a counterexample shrinks ρ_k by γ₂ and restarts
    the check from the first sample with all stall counters reset. The
    level is accepted once every sample has τ₂ consecutive clean solves.
    """
    samples = spec.sample_times(k).size
    attempt = 0
    restart = True
    while restart:
        restart = False
        for j in range(samples):
            stalls = 0
            while stalls < spec.tau2 and not restart:
                batch = list(range(attempt, attempt + min(spec.threads, spec.tau2 - stalls)))
                results = run_indexed(
                    lambda i: falsify_derivative(spec, k, j, rho_k, rho_next, attempt=i), batch, spec.threads
                )
                for index, counterexample in zip(batch, results):
                    attempt = index + 1
                    if trace is not None:
                        trace.derivative_solves += 1
                    if counterexample is None:
                        stalls += 1
                        continue
                    rho_k *= spec.gamma2
                    if rho_k < RHO_FLOOR:
                        raise RhoUnderflow(f"ρ_{k} = {rho_k:.3e} fell below {RHO_FLOOR:g} in the derivative check")
                    if trace is not None:
                        trace.derivative_shrinks += 1
                    restart = True
                    break
            if restart:
                break
    return rho_k


def audit_funnel(
    spec: FunnelSpec,
    funnel: Funnel,
    n_solves: int = 200,
    derivative: Optional[bool] = None,
    knot_samples: int = 0,
) -> AuditResult:
    """
    تدقيق لاحق للقمع

    Runs ``n_solves`` seeded reach falsifications per interval at the final
    levels (and as many derivative falsifications per sample time when the
    derivative condition is audited) and counts counterexamples. With
    ``knot_samples`` > 0 the boundary of every knot level is also flowed
    forward and checked against the next level.
    """
    derivative = spec.derivative_check if derivative is None else derivative
    audit = AuditResult()
    for k in range(spec.intervals):
        rho_k, rho_next = funnel.levels[k], funnel.levels[k + 1]
        entry = AuditInterval(k=k)
        reach = run_indexed(
            lambda i: falsify_reach(spec, k, rho_k, rho_next, attempt=i, stream=STREAM_AUDIT_REACH),
            list(range(n_solves)),
            spec.threads,
        )
        entry.reach_counterexamples = sum(c is not None for c in reach)
        entry.solves += n_solves
        if derivative:
            for j in range(spec.sample_times(k).size):
                found = run_indexed(
                    lambda i: falsify_derivative(spec, k, j, rho_k, rho_next, attempt=i, stream=STREAM_AUDIT_DERIVATIVE),
                    list(range(n_solves)),
                    spec.threads,
                )
                entry.derivative_counterexamples += sum(c is not None for c in found)
                entry.solves += n_solves
        if knot_samples:
            entry.knot_violations = knot_membership_violations(spec, funnel, k, samples=knot_samples)
        if entry.reach_counterexamples or entry.derivative_counterexamples or entry.knot_violations:
            logger.warning(
                f"audit[k={k}]: {entry.reach_counterexamples} reach, "
                f"{entry.derivative_counterexamples} derivative counterexamples and "
                f"{entry.knot_violations} knot violations"
            )
        audit.intervals.append(entry)
    logger.info(f"Audit finished: {audit.total_counterexamples} counterexamples over {spec.intervals} intervals")
    return audit


def knot_membership_violations(spec: FunnelSpec, funnel: Funnel, k: int, samples: int = 1000, slack: float = 1e-6) -> int:
    """عدد عينات حدود {P = ρ_k} التي تخرج من {P ≤ ρ_{k+1}} عند t_{k+1}"""
    t0, t1 = spec.grid[k], spec.grid[k + 1]
    rho_k, rho_next = funnel.levels[k], funnel.levels[k + 1]
    violations = 0
    for i in range(samples):
        rng = restart_rng(spec.seed, i, STREAM_AUDIT_REACH, k, 99)
        x = sample_ellipsoid(spec.shape.S(t0), rho_k, spec.shape.center(t0), Where.BOUNDARY, rng)
        try:
            end = flow(spec.vector_field, x, t0, t1, spec.cfg)
        except NonFiniteState:
            violations += 1
            continue
        if spec.shape.value(end, t1) > rho_next * (1.0 + slack):
            violations += 1
    return violations
