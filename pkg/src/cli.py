"""
واجهة سطر الأوامر
funnel-forge command line: synthesize, oracle, compare and trajgen
"""

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger

from config.logging_config import LoggingConfig
from config.settings import settings
from src.core.errors import ConfigError, FunnelForgeError, NonlinearSystemError
from src.experiments.config import ExperimentConfig, load_config
from src.experiments.reports import funnel_summary, plot_funnel, write_summary, write_table
from src.experiments.runner import build_experiment, run_compare, run_oracle, run_synthesis

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SYNTHESIS = 2
EXIT_NONLINEAR = 3


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.no_derivative_check:
        overrides["algorithm"] = {"derivative_check": False}
    return overrides


def _base_summary(command: str, config: ExperimentConfig) -> Dict[str, Any]:
    return {
        "command": command,
        "app": settings.APP_NAME,
        "version": settings.VERSION,
        "seed": config.seed,
        "config": config.model_dump(mode="json"),
    }


def cmd_synthesize(config: ExperimentConfig, out: Path) -> int:
    """بناء القمع لكل خطوة زمنية مطلوبة"""
    experiment = build_experiment(config)
    steps = config.grid.all_steps()
    summary = _base_summary("synthesize", config)
    rows: List[Dict[str, Any]] = []
    for h in steps:
        run = run_synthesis(experiment, h)
        name = "funnel.csv" if len(steps) == 1 else f"funnel_h{h:g}.csv"
        run.funnel.to_csv(out / name)
        row = {"step": h, "file": name, "wall_time": run.wall_time, **funnel_summary(run.funnel)}
        if run.audit is not None:
            row["audit"] = {
                "solves_per_interval": config.audit_solves,
                "counterexamples": run.audit.total_counterexamples,
                "knot_violations": sum(a.knot_violations for a in run.audit.intervals),
                "passed": run.audit.passed,
                "per_interval": [vars(a) for a in run.audit.intervals],
            }
        rows.append(row)
        if config.plot:
            plot_funnel(out / name.replace(".csv", ".svg"), run.funnel, title=f"{config.name} (h = {h:g})")

    summary["runs"] = rows
    first = rows[0]
    for key in ("rho0", "sum_levels", "integrated_volume", "wall_time"):
        summary[key] = first[key]
    write_summary(out / "summary.json", summary)
    logger.info(f"synthesize finished: ρ(0) = {first['rho0']:.6g}")
    return EXIT_OK


def cmd_oracle(config: ExperimentConfig, out: Path) -> int:
    """المستويات الدقيقة لنظام خطي"""
    if not config.system.is_linear:
        raise NonlinearSystemError(f"oracle requires a linear system, got {config.system.name}")
    experiment = build_experiment(config)
    started = time.perf_counter()
    oracle = run_oracle(experiment)
    oracle.to_csv(out / "oracle.csv")
    summary = _base_summary("oracle", config)
    summary.update(funnel_summary(oracle))
    summary["wall_time"] = time.perf_counter() - started
    write_summary(out / "summary.json", summary)
    if config.plot:
        plot_funnel(out / "oracle.svg", oracle, title=f"{config.name} oracle")
    return EXIT_OK


def cmd_compare(config: ExperimentConfig, out: Path) -> int:
    """مقارنة المزيف بالمرجع الدقيق"""
    if not config.system.is_linear:
        raise NonlinearSystemError(f"compare requires a linear system, got {config.system.name}")
    experiment = build_experiment(config)
    frame, run, oracle = run_compare(experiment)
    write_table(out / "compare.csv", frame)
    summary = _base_summary("compare", config)
    summary.update({
        "derivative_check": config.algorithm.derivative_check,
        "rho0_falsifier": run.funnel.rho0,
        "rho0_oracle": oracle.rho0,
        "max_ratio": float(np.max(frame["ratio"])),
        "mean_ratio": float(np.mean(frame["ratio"])),
        "wall_time": run.wall_time,
        "falsifier": funnel_summary(run.funnel),
    })
    write_summary(out / "summary.json", summary)
    if config.plot:
        plot_funnel(out / "compare.svg", run.funnel, reference=oracle, title=f"{config.name} vs oracle")
    return EXIT_OK


def cmd_trajgen(config: ExperimentConfig, out: Path) -> int:
    """توليد المسار المرجعي وحفظه"""
    if config.trajectory.source != "generate":
        raise ConfigError("trajgen requires trajectory.source = 'generate'")
    if config.system.family not in ("pendulum", "quadcopter"):
        raise ConfigError(f"trajgen supports pendulum and quadcopter, got {config.system.name}")
    experiment = build_experiment(config)
    trajectory = experiment.trajectory
    trajectory.to_csv(out / "trajectory.csv")
    summary = _base_summary("trajgen", config)
    summary.update({
        "knots": int(trajectory.times.size),
        "max_defect": trajectory.max_defect,
        "endpoint_error": float(np.max(np.abs(trajectory.states[-1] - np.asarray(config.trajectory.xT)))),
    })
    write_summary(out / "summary.json", summary)
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "trajgen": cmd_trajgen,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="funnel-forge", description="Funnel synthesis by falsification")
    parser.add_argument("--log-level", default=None, help="مستوى التسجيل (DEBUG, INFO, ...)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        cmd = sub.add_parser(name, help=(handler.__doc__ or "").strip())
        cmd.add_argument("--config", required=True, type=Path, help="ملف إعدادات التجربة (JSON)")
        cmd.add_argument("--out", required=True, type=Path, help="مجلد المخرجات")
        cmd.add_argument("--seed", type=int, default=None, help="البذرة الرئيسية")
        cmd.add_argument("--threads", type=int, default=None, help="عدد خيوط البدء المتعدد")
        cmd.add_argument("--no-derivative-check", action="store_true", help="تعطيل فحص المشتقة")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    LoggingConfig.setup(
        log_level=args.log_level or settings.LOG_LEVEL,
        log_dir=settings.LOG_DIR if settings.LOG_TO_FILE else None,
        max_file_size=settings.MAX_LOG_SIZE,
        retention=settings.LOG_RETENTION,
    )
    log = LoggingConfig.get_logger(args.command)

    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        log.error(str(exc))
        return EXIT_CONFIG

    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](config, args.out)
    except NonlinearSystemError as exc:
        log.error(str(exc))
        return EXIT_NONLINEAR
    except ConfigError as exc:
        log.error(str(exc))
        return EXIT_CONFIG
    except FunnelForgeError as exc:
        log.error(f"{args.command} failed: {exc}")
        return EXIT_SYNTHESIS


if __name__ == "__main__":
    sys.exit(main())
