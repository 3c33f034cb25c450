"""
تشغيل التجارب
Builds closed-loop systems, shapes and goals from an ExperimentConfig and
runs synthesis, oracle and comparison experiments
"""

import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from src.control.shape import QuadraticShape
from src.control.tracking import nlink_controller, nlink_lqr, tvlqr
from src.core.errors import ConfigError, NonlinearSystemError
from src.experiments.config import ExperimentConfig, to_matrix
from src.funnel.falsifiers import AuditResult, audit_funnel
from src.funnel.funnel import Funnel, FunnelSpec, Goal
from src.funnel.oracle import EllipsoidSet, optimal_rho_sequence, volume_matched_level
from src.funnel.synthesis import synthesize
from src.integration.odeint import IntegrationConfig
from src.systems.benchmarks import (
    GRAVITY,
    make_nlink,
    make_pendulum,
    make_quadcopter,
    make_scalar_decay,
    quadcopter_hover,
)
from src.systems.dynamics import ControlSystem, VectorField, close_loop, linear_field
from src.trajectory.collocation import collocation_trajectory
from src.trajectory.trajectory import constant_trajectory, load_trajectory

AUDIT_KNOT_SAMPLES_PER_SOLVE = 5


@dataclass
class Experiment:
    """
    تجربة جاهزة للتشغيل

    Everything a funnel run needs except the time grid, which depends on
    the step being swept.
    """
    config: ExperimentConfig
    vector_field: VectorField
    shape: QuadraticShape
    trajectory: object
    goal: Goal
    integration: IntegrationConfig

    @property
    def is_linear(self) -> bool:
        return self.vector_field.is_linear and self.shape.constant is not None

    def funnel_spec(self, step: Optional[float] = None, derivative_check: Optional[bool] = None) -> FunnelSpec:
        algo = self.config.algorithm
        return FunnelSpec(
            vector_field=self.vector_field,
            shape=self.shape,
            grid=self.config.grid.times(step),
            goal=self.goal,
            c=algo.c,
            gamma1=algo.gamma1,
            gamma2=algo.gamma2,
            tau1=algo.tau1,
            tau2=algo.tau2,
            derivative_check=algo.derivative_check if derivative_check is None else derivative_check,
            derivative_samples=algo.derivative_samples,
            derivative_margin=algo.derivative_margin,
            derivative_anchor=algo.derivative_anchor,
            seed=self.config.seed,
            cfg=self.integration,
            nlp_tol=algo.nlp_tol,
            threads=self.config.threads,
        )


def integration_config(config: ExperimentConfig) -> IntegrationConfig:
    section = config.integration
    return IntegrationConfig(
        abs_tol=section.abs_tol, rel_tol=section.rel_tol, max_step=section.max_step, max_steps=section.max_steps
    )


def _build_tracking(config: ExperimentConfig, system: ControlSystem, trajectory):
    n, m = system.state_dim, system.control_dim
    Q = to_matrix(config.lqr.Q, n, np.eye(n))
    R = to_matrix(config.lqr.R, m, np.eye(m))
    S_T = to_matrix(config.lqr.S_T, n, Q)
    controller, shape = tvlqr(system, trajectory, Q, R, S_T, integration_config(config))
    return close_loop(system, controller), shape


def _reference(config: ExperimentConfig, system: ControlSystem, x_eq, u_eq):
    source = config.trajectory
    T = config.grid.T
    if source.source == "constant":
        return constant_trajectory(x_eq, u_eq, T, system)
    if source.source == "file":
        trajectory = load_trajectory(source.path, system)
        if abs(trajectory.T - T) > 1e-9 * max(1.0, T) or abs(trajectory.t0) > 1e-12:
            raise ConfigError(f"trajectory file spans [{trajectory.t0}, {trajectory.T}], grid spans [0, {T}]")
        return trajectory
    return collocation_trajectory(
        system,
        source.x0,
        source.xT,
        T,
        source.segments,
        effort_weight=source.effort_weight,
        starts=source.starts,
        seed=config.seed,
    )


def _build_goal(config: ExperimentConfig, shape: QuadraticShape, center_T: np.ndarray) -> Goal:
    goal = config.goal
    S_T = shape.S(shape.domain[1])
    n = S_T.shape[0]
    if goal.rule == "volume_matching":
        level = volume_matched_level(S_T, goal.radius, goal.radius_reading)
        return Goal(center=center_T, Q=S_T, level=level)
    center = center_T if goal.center is None else np.asarray(goal.center, dtype=float)
    return Goal(center=center, Q=to_matrix(goal.Q, n, S_T), level=goal.level)


def build_experiment(config: ExperimentConfig) -> Experiment:
    """بناء النظام المغلق والشكل والهدف من الإعدادات"""
    family, links = config.system.family, config.system.links
    params = dict(config.system.params)
    g = params.pop("g", GRAVITY)
    T = config.grid.T
    integration = integration_config(config)
    logger.info(f"Building experiment '{config.name}' for system {config.system.name}")

    try:
        if family == "scalar_decay":
            field = make_scalar_decay(**params)
            trajectory = constant_trajectory(np.zeros(1), np.zeros(0), T)
            shape = QuadraticShape.constant_shape(to_matrix(config.lqr.S_T, 1, np.eye(1)), trajectory)
        elif family == "nlink_linearized":
            A, B, K, S_n = nlink_lqr(links, g, _optional_matrix(config.lqr.Q, 2 * links), _optional_matrix(config.lqr.R, links))
            field = linear_field(A - B @ K, name=config.system.name)
            trajectory = constant_trajectory(np.zeros(2 * links), np.zeros(links), T)
            shape = QuadraticShape.constant_shape(S_n, trajectory)
        elif family == "nlink":
            controller, shape = nlink_controller(
                links, g, _optional_matrix(config.lqr.Q, 2 * links), _optional_matrix(config.lqr.R, links), T
            )
            field = close_loop(make_nlink(links, g), controller)
            trajectory = shape.trajectory
        elif family == "pendulum":
            system = make_pendulum(g=g, **params)
            trajectory = _reference(config, system, np.zeros(2), np.zeros(1))
            field, shape = _build_tracking(config, system, trajectory)
        else:
            system = make_quadcopter(g=g, **params)
            trajectory = _reference(config, system, *quadcopter_hover(m=system.params["m"], g=g))
            field, shape = _build_tracking(config, system, trajectory)
    except TypeError as exc:
        raise ConfigError(f"unsupported parameter for {config.system.name}: {exc}") from exc

    goal = _build_goal(config, shape, trajectory.state(T))
    return Experiment(config, field, shape, trajectory, goal, integration)


def _optional_matrix(spec, n: int) -> Optional[np.ndarray]:
    return None if spec is None else to_matrix(spec, n)


@dataclass
class SynthesisRun:
    step: float
    funnel: Funnel
    wall_time: float
    audit: Optional[AuditResult] = None


def run_synthesis(experiment: Experiment, step: Optional[float] = None, derivative_check: Optional[bool] = None) -> SynthesisRun:
    """تشغيل بناء القمع لخطوة زمنية واحدة"""
    step = experiment.config.grid.step if step is None else step
    spec = experiment.funnel_spec(step, derivative_check)
    started = time.perf_counter()
    funnel = synthesize(spec)
    run = SynthesisRun(step=step, funnel=funnel, wall_time=time.perf_counter() - started)
    if experiment.config.audit_solves > 0:
        solves = experiment.config.audit_solves
        run.audit = audit_funnel(spec, funnel, solves, knot_samples=AUDIT_KNOT_SAMPLES_PER_SOLVE * solves)
    return run


def run_oracle(experiment: Experiment, step: Optional[float] = None) -> Funnel:
    """
    المستويات الدقيقة لنظام خطي

    Raises NonlinearSystemError for systems without a constant matrix.
    """
    if not experiment.is_linear:
        raise NonlinearSystemError(f"oracle requires a linear system, got {experiment.config.system.name}")
    grid = experiment.config.grid.times(step)
    goal = experiment.goal
    if np.linalg.norm(goal.center - experiment.trajectory.state(grid[-1])) > 0:
        raise ConfigError("oracle goal must be centered at the equilibrium")
    E_T = EllipsoidSet.from_level_set(goal.Q, goal.level)
    levels = optimal_rho_sequence(experiment.vector_field.matrix, experiment.shape.constant, E_T, grid)
    return Funnel(grid, levels, experiment.shape)


def run_compare(experiment: Experiment, step: Optional[float] = None) -> Tuple[pd.DataFrame, SynthesisRun, Funnel]:
    """مقارنة المستويات المزيفة بالمستويات الدقيقة"""
    if not experiment.is_linear:
        raise NonlinearSystemError(f"comparison requires a linear system, got {experiment.config.system.name}")
    oracle = run_oracle(experiment, step)
    run = run_synthesis(experiment, step)
    return pd.DataFrame({
        "t": oracle.times,
        "rho_falsifier": run.funnel.levels,
        "rho_oracle": oracle.levels,
        "ratio": run.funnel.levels / oracle.levels,
    }), run, oracle
