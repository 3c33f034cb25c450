"""
اختبارات إعدادات التجارب والمخرجات
"""

import json
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from config.logging_config import LoggingConfig
from config.settings import Settings
from src.control.shape import QuadraticShape
from src.core.errors import ConfigError
from src.experiments.config import GridConfig, load_config, parse_config, to_matrix
from src.experiments.reports import funnel_summary, plot_funnel, write_summary
from src.funnel.funnel import Funnel
from src.trajectory.trajectory import constant_trajectory

REPO_ROOT = Path(__file__).resolve().parents[2]


def scalar_data(**sections):
    data = {
        "system": {"name": "scalar_decay"},
        "goal": {"rule": "explicit", "level": 1.0},
        "grid": {"T": 1.0, "step": 0.1},
    }
    data.update(sections)
    return data


class TestParseConfig:
    """اختبارات التحقق من الإعدادات"""

    def test_defaults(self):
        config = parse_config(scalar_data())
        assert config.algorithm.c == 1.5
        assert config.algorithm.gamma1 == 0.9999
        assert config.algorithm.gamma2 == 0.999
        assert config.algorithm.tau1 == 10
        assert config.algorithm.tau2 == 30
        assert config.algorithm.derivative_check is True
        assert config.algorithm.derivative_samples == 1
        assert config.algorithm.derivative_anchor == "end"
        assert config.trajectory.source == "constant"
        assert config.threads == 1

    @pytest.mark.parametrize("data", [
        scalar_data(system={"name": "double_pendulum"}),
        scalar_data(system={"name": "nlink0"}),
        scalar_data(goal={"rule": "explicit"}),
        scalar_data(algorithm={"c": 1.0}),
        scalar_data(algorithm={"gamma1": 1.0}),
        scalar_data(algorithm={"tau2": 0}),
        scalar_data(grid={"T": 1.0, "step": 2.0}),
        scalar_data(grid={"T": 1.0, "steps": []}),
        scalar_data(trajectory={"source": "generate"}),
        scalar_data(trajectory={"source": "file"}),
        scalar_data(unknown_section={}),
        scalar_data(threads=0),
        scalar_data(algorithm={"derivative_anchor": "middle"}),
    ], ids=[
        "unknown_system", "zero_links", "missing_level", "c", "gamma1", "tau2",
        "step_exceeds_horizon", "empty_steps", "generate_without_endpoints", "file_without_path",
        "extra_key", "threads", "derivative_anchor",
    ])
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            parse_config(data)

    def test_overrides_merge_sections(self):
        data = scalar_data(algorithm={"tau1": 4})
        config = parse_config(data, {"seed": 7, "algorithm": {"derivative_check": False}})
        assert config.seed == 7
        assert config.algorithm.tau1 == 4
        assert config.algorithm.derivative_check is False

    @pytest.mark.parametrize("name, family, links, linear", [
        ("nlink_linearized3", "nlink_linearized", 3, True),
        ("nlink2", "nlink", 2, False),
        ("pendulum", "pendulum", None, False),
        ("scalar_decay", "scalar_decay", None, True),
    ])
    def test_system_names(self, name, family, links, linear):
        system = parse_config(scalar_data(system={"name": name})).system
        assert system.family == family
        assert system.links == links
        assert system.is_linear is linear


class TestGridAndMatrices:
    """اختبارات الشبكة الزمنية والمصفوفات"""

    def test_grid_times(self):
        grid = GridConfig(T=1.0, step=0.025)
        times = grid.times()
        assert times.size == 41
        assert times[0] == 0.0 and times[-1] == 1.0

    def test_grid_rounds_interval_count(self):
        assert np.allclose(GridConfig(T=1.0, step=0.3).times(), [0.0, 1 / 3, 2 / 3, 1.0])

    def test_step_sweep(self):
        grid = GridConfig(T=1.0, steps=[0.1, 0.05])
        assert grid.all_steps() == [0.1, 0.05]
        assert grid.times(0.05).size == 21

    def test_scalar_matrix(self):
        assert np.array_equal(to_matrix([2.0], 3), 2.0 * np.eye(3))

    def test_diagonal_matrix(self):
        assert np.array_equal(to_matrix([1.0, 2.0], 2), np.diag([1.0, 2.0]))

    def test_full_matrix(self):
        assert np.array_equal(to_matrix([[1.0, 0.5], [0.5, 1.0]], 2), [[1.0, 0.5], [0.5, 1.0]])

    def test_default(self):
        assert np.array_equal(to_matrix(None, 2, np.eye(2)), np.eye(2))

    def test_errors(self):
        with pytest.raises(ConfigError):
            to_matrix([1.0, 2.0, 3.0], 2)
        with pytest.raises(ConfigError):
            to_matrix(None, 2)


class TestLoadConfig:
    """اختبارات تحميل الملفات"""

    def test_bundled_scalar_config(self):
        config = load_config(REPO_ROOT / "config" / "experiments" / "scalar_decay.json")
        assert config.system.name == "scalar_decay"
        assert config.grid.step == 0.1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_non_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config(path)


class TestSettings:
    """اختبارات الإعدادات العامة"""

    def test_links_from_string(self):
        assert Settings(REPRODUCE_LINKS="1, 3,5").REPRODUCE_LINKS == [1, 3, 5]

    def test_defaults(self):
        settings = Settings()
        assert settings.NLP_TOL == 1e-6
        assert settings.NLP_TOL_STRICT == 1e-8
        assert settings.DEFAULT_THREADS >= 1


class TestLogging:
    """اختبارات التسجيل"""

    @pytest.fixture
    def log_dir(self, tmp_path):
        LoggingConfig.setup(log_level="INFO", log_dir=str(tmp_path))
        yield tmp_path
        logger.remove()
        LoggingConfig.setup(log_level="WARNING", log_dir=None)

    def test_funnel_sink_receives_bound_records_only(self, log_dir):
        logger.bind(funnel="sweep").info("k=3 rho=0.5")
        logger.info("unrelated message")
        content = (log_dir / "funnel.log").read_text(encoding="utf-8")
        assert "k=3 rho=0.5" in content
        assert "unrelated message" not in content
        assert "unrelated message" in (log_dir / "app.log").read_text(encoding="utf-8")

    def test_get_logger_binds_context(self):
        records = []
        sink = logger.add(lambda message: records.append(message.record), level="INFO")
        try:
            LoggingConfig.get_logger("oracle").info("levels ready")
        finally:
            logger.remove(sink)
        assert records[-1]["extra"]["context"] == "oracle"
        assert "funnel" not in records[-1]["extra"]


class TestReports:
    """اختبارات المخرجات"""

    @pytest.fixture
    def funnel(self):
        shape = QuadraticShape.constant_shape(np.eye(2), constant_trajectory(np.zeros(2), [], 1.0))
        return Funnel(np.linspace(0.0, 1.0, 5), [2.0, 1.8, 1.5, 1.2, 1.0], shape)

    def test_write_summary(self, tmp_path):
        path = write_summary(tmp_path / "summary.json", {
            "rho0": np.float64(1.5),
            "levels": np.array([1.0, 2.0]),
            "count": np.int64(3),
            "ratio": float("inf"),
        })
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data == {"count": 3, "levels": [1.0, 2.0], "ratio": "inf", "rho0": 1.5}

    def test_funnel_summary(self, funnel):
        summary = funnel_summary(funnel)
        assert summary["rho0"] == 2.0
        assert summary["rhoT"] == 1.0
        assert summary["sum_levels"] == pytest.approx(7.5)
        assert summary["intervals"] == 4
        assert "trace" not in summary

    def test_svg_is_deterministic(self, funnel, tmp_path):
        first = plot_funnel(tmp_path / "a.svg", funnel, title="run")
        second = plot_funnel(tmp_path / "b.svg", funnel, title="run")
        assert first.read_bytes() == second.read_bytes()
        assert first.read_bytes().lstrip().startswith(b"<?xml")
