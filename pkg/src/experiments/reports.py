"""
مخرجات التجارب
Experiment artifacts: summary.json, CSV tables and SVG funnel figures
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402

from src.funnel.funnel import Funnel, funnel_volume  # noqa: E402
from src.trajectory.trajectory import CSV_FLOAT_FORMAT  # noqa: E402

PLOT_STYLE = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "figure.figsize": (6.4, 4.8),
    # fixed ids keep SVG output byte-identical between runs
    "svg.hashsalt": "funnel-forge",
}


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_summary(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    """كتابة summary.json"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote summary to {path}")
    return path


def write_table(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    return path


def funnel_summary(funnel: Funnel) -> Dict[str, Any]:
    """ملخص القمع: ρ(0) ومجموع المستويات والحجم المتكامل"""
    sum_levels, volume = funnel_volume(funnel)
    summary = {
        "rho0": funnel.rho0,
        "rhoT": float(funnel.levels[-1]),
        "sum_levels": sum_levels,
        "integrated_volume": volume,
        "intervals": len(funnel) - 1,
    }
    if funnel.report is not None:
        summary["goal_level"] = funnel.report.goal_level
        summary["nlp_solves"] = funnel.report.total_solves
        summary["counterexamples"] = funnel.report.total_counterexamples
        summary["synthesis_wall_time"] = funnel.report.wall_time
        summary["trace"] = funnel.report.to_records()
    return summary


def plot_funnel(path: Union[str, Path], funnel: Funnel, reference: Optional[Funnel] = None, title: str = "") -> Path:
    """
    رسم القمع بصيغة SVG

    Top panel: ρᴵ(t) (and the reference levels when given). Bottom panel:
    cross-section volume per grid time.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(PLOT_STYLE):
        fig, (ax_rho, ax_vol) = plt.subplots(2, 1, sharex=True)
        ax_rho.plot(funnel.times, funnel.levels, label="falsifier")
        if reference is not None:
            ax_rho.plot(reference.times, reference.levels, linestyle="--", label="oracle")
            ax_rho.legend()
        ax_rho.set_ylabel(r"$\rho(t)$")
        if title:
            ax_rho.set_title(title)

        frame = funnel.to_frame()
        ax_vol.plot(frame["t"], frame["cross_section_volume"], color="tab:green")
        ax_vol.set_ylabel("cross-section volume")
        ax_vol.set_xlabel("t")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"Wrote funnel figure to {path}")
    return path
