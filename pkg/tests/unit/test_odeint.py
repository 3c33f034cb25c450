"""
اختبارات المكامل العددي
"""

import numpy as np
import pytest

from src.control.tracking import nlink_controller
from src.core.errors import InvalidParameter, NonFiniteState, OutsideDomain
from src.core.numkernel import mat_exp
from src.integration.interpolant import Interpolant
from src.integration.odeint import IntegrationConfig, flow, flow_sensitivity, integrate_dense
from src.systems.benchmarks import (
    make_nlink,
    make_pendulum,
    make_quadcopter,
    make_scalar_decay,
    nlink_upright,
    quadcopter_hover,
)
from src.systems.dynamics import Controller, VectorField, close_loop, linear_field


def decay_field() -> VectorField:
    return linear_field(np.array([[-1.0]]), name="decay")


class TestFlow:
    """اختبارات التدفق"""

    def test_zero_field(self):
        x0 = np.array([1.0, -2.0])
        assert np.array_equal(flow(linear_field(np.zeros((2, 2))), x0, 0.0, 1.0), x0)

    def test_exponential_decay(self):
        assert abs(flow(decay_field(), [1.0], 0.0, 1.0)[0] - 0.3678794412) < 1e-8

    def test_harmonic_oscillator_period(self):
        """العودة إلى نقطة البداية بعد دورة كاملة"""
        field = linear_field(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert np.allclose(flow(field, [1.0, 0.0], 0.0, 2 * np.pi), [1.0, 0.0], atol=1e-6)

    def test_semigroup(self):
        field = close_loop(make_pendulum(), Controller(control=lambda x, t: np.array([-8.0 * x[0] - 2.0 * x[1]])))
        x0 = np.array([0.3, -0.2])
        direct = flow(field, x0, 0.0, 1.0)
        split = flow(field, flow(field, x0, 0.0, 0.4), 0.4, 1.0)
        assert np.allclose(direct, split, atol=1e-8)

    def test_smaller_max_step_is_not_worse(self):
        field = linear_field(np.array([[0.0, 1.0], [-4.0, -0.5]]))
        x0 = np.array([1.0, 0.0])
        exact = mat_exp(field.matrix, 2.0) @ x0
        coarse = flow(field, x0, 0.0, 2.0, IntegrationConfig(abs_tol=1e-6, rel_tol=1e-6, max_step=0.02))
        fine = flow(field, x0, 0.0, 2.0, IntegrationConfig(abs_tol=1e-6, rel_tol=1e-6, max_step=0.01))
        assert np.linalg.norm(fine - exact) <= np.linalg.norm(coarse - exact) + 1e-12

    def test_blow_up_is_typed(self):
        """ẋ = x² ينفجر قبل t = 1"""
        field = VectorField(name="quadratic", state_dim=1, rhs=lambda x, t: x * x, jac=lambda x, t: np.array([[2.0 * x[0]]]))
        with pytest.raises(NonFiniteState) as info:
            flow(field, [1.0], 0.0, 2.0)
        assert np.array_equal(info.value.initial_state, [1.0])

    def test_backwards_interval_rejected(self):
        with pytest.raises(InvalidParameter):
            flow(decay_field(), [1.0], 1.0, 0.0)

    def test_invalid_config(self):
        with pytest.raises(InvalidParameter):
            IntegrationConfig(max_step=0.0)


class TestSensitivity:
    """اختبارات مصفوفة الحساسية"""

    def test_zero_field_identity(self):
        _, Phi = flow_sensitivity(linear_field(np.zeros((3, 3))), np.ones(3), 0.0, 1.0)
        assert np.array_equal(Phi, np.eye(3))

    def test_linear_matches_exponential(self):
        A = np.array([[0.0, 1.0], [-2.0, -0.3]])
        _, Phi = flow_sensitivity(linear_field(A), [0.5, 0.5], 0.0, 1.5)
        assert np.allclose(Phi, mat_exp(A, 1.5), atol=1e-6)

    @pytest.mark.parametrize("A", [
        np.array([[-0.5]]),
        np.array([[0.1, 2.0], [-1.0, -0.7]]),
        np.array([[-1.0, 0.2, 0.0], [0.0, 0.3, 1.0], [0.5, 0.0, -0.4]]),
    ])
    def test_abel_liouville(self, A):
        """det Φ = exp(∫ tr A dt)"""
        _, Phi = flow_sensitivity(linear_field(A), np.ones(A.shape[0]), 0.0, 1.0)
        assert np.linalg.det(Phi) == pytest.approx(np.exp(np.trace(A)), rel=1e-5)

    def test_pendulum_matches_fd(self):
        """Φ يطابق يعقوبي التدفق بالفروق المركزية"""
        field = close_loop(make_pendulum(), Controller(
            control=lambda x, t: np.array([-8.0 * x[0] - 2.0 * x[1]]),
            state_jacobian=lambda x, t: np.array([[-8.0, -2.0]]),
        ))
        x0 = np.array([0.2, -0.1])
        end, Phi = flow_sensitivity(field, x0, 0.0, 0.5)
        assert np.allclose(end, flow(field, x0, 0.0, 0.5), atol=1e-10)
        step = 1e-5
        fd = np.column_stack([
            (flow(field, x0 + step * e, 0.0, 0.5) - flow(field, x0 - step * e, 0.0, 0.5)) / (2 * step)
            for e in np.eye(2)
        ])
        assert np.linalg.norm(Phi - fd) <= 1e-4 * np.linalg.norm(fd)


def sensitivity_case(name: str):
    """(الحقل، مركز العينات) لكل نظام مرجعي"""
    if name == "scalar_decay":
        return make_scalar_decay(), np.zeros(1)
    if name == "pendulum":
        return close_loop(make_pendulum(), Controller(
            control=lambda x, t: np.array([-8.0 * x[0] - 2.0 * x[1]]),
            state_jacobian=lambda x, t: np.array([[-8.0, -2.0]]),
        )), np.zeros(2)
    if name == "quadcopter":
        x_eq, u_eq = quadcopter_hover()
        return close_loop(make_quadcopter(), Controller(
            control=lambda x, t: u_eq,
            state_jacobian=lambda x, t: np.zeros((4, 12)),
        )), x_eq
    controller, _ = nlink_controller(2)
    return close_loop(make_nlink(2), controller), nlink_upright(2)


@pytest.mark.slow
class TestSensitivityAcrossSystems:
    """Φ يطابق الفروق المركزية عند 25 نقطة عشوائية لكل نظام"""

    @pytest.mark.parametrize("name", ["scalar_decay", "pendulum", "quadcopter", "nlink2"])
    def test_matches_fd(self, name):
        field, center = sensitivity_case(name)
        cfg = IntegrationConfig(abs_tol=1e-12, rel_tol=1e-12, max_step=0.001)
        rng = np.random.default_rng(7)
        step, t1 = 1e-5, 0.2
        for _ in range(25):
            x0 = center + 0.3 * rng.standard_normal(center.size)
            _, Phi = flow_sensitivity(field, x0, 0.0, t1, cfg)
            fd = np.column_stack([
                (flow(field, x0 + step * e, 0.0, t1, cfg) - flow(field, x0 - step * e, 0.0, t1, cfg)) / (2 * step)
                for e in np.eye(center.size)
            ])
            assert np.linalg.norm(Phi - fd) <= 1e-4 * np.linalg.norm(fd)


class TestDenseOutput:
    """اختبارات المخرجات الكثيفة"""

    def test_zero_field_constant(self):
        dense = integrate_dense(linear_field(np.zeros((2, 2))), [1.0, 2.0], 0.0, 1.0)
        assert np.allclose(dense(0.37), [1.0, 2.0])

    def test_interior_accuracy(self):
        dense = integrate_dense(decay_field(), [1.0], 0.0, 1.0)
        assert abs(dense(0.5)[0] - np.exp(-0.5)) < 1e-6
        assert abs(dense(0.3337)[0] - np.exp(-0.3337)) < 1e-6

    def test_knots_are_exact(self):
        dense = integrate_dense(decay_field(), [1.0], 0.0, 0.2)
        for i in (0, 3, len(dense.times) - 1):
            assert np.array_equal(dense(dense.times[i]), dense.values[i])

    def test_outside_domain(self):
        dense = integrate_dense(decay_field(), [1.0], 0.0, 0.1)
        with pytest.raises(OutsideDomain):
            dense(0.5)


class TestInterpolant:
    """اختبارات مستوفي هيرميت"""

    def test_cubic_is_reproduced(self):
        """كثير حدود تكعيبي يُستعاد بدقة"""
        times = np.array([0.0, 0.5, 1.0, 2.0])
        interp = Interpolant(times, times ** 3, 3 * times ** 2)
        assert interp(1.5)[0] == pytest.approx(1.5 ** 3)
        assert interp.derivative(0.25)[0] == pytest.approx(3 * 0.25 ** 2)

    def test_reversed_time(self):
        times = np.linspace(0.0, 1.0, 5)
        interp = Interpolant(times, times ** 2, 2 * times)
        reversed_interp = interp.reversed_time(1.0)
        assert reversed_interp(0.25)[0] == pytest.approx(0.75 ** 2)
        assert reversed_interp.derivative(0.25)[0] == pytest.approx(-1.5)

    def test_rejects_unordered_knots(self):
        with pytest.raises(InvalidParameter):
            Interpolant([0.0, 1.0, 0.5], [0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
