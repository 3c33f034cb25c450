"""
الاستيفاء التكعيبي
Piecewise cubic Hermite interpolants for dense output
"""

from typing import Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from src.core.errors import DimensionMismatch, InvalidParameter, OutsideDomain

# tolerance on domain checks, relative to the span
DOMAIN_SLACK = 1e-9


class Interpolant:
    """
    مستوفٍ هيرميت تكعيبي متعدد الأبعاد

    Knot times must be strictly increasing. Evaluation at a knot returns the
    stored value bit-for-bit; between knots the scipy Hermite spline is used.
    """

    def __init__(self, times, values, derivatives):
        self.times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        derivatives = np.asarray(derivatives, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
            derivatives = derivatives[:, None]
        if self.times.ndim != 1 or self.times.size < 2:
            raise InvalidParameter("an interpolant needs at least two knots")
        if values.shape != derivatives.shape or values.shape[0] != self.times.size:
            raise DimensionMismatch(
                f"knots {self.times.shape}, values {values.shape} and derivatives {derivatives.shape} disagree"
            )
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParameter("knot times must be strictly increasing")

        self.values = values
        self.derivatives = derivatives
        self._spline = CubicHermiteSpline(self.times, values, derivatives, axis=0, extrapolate=True)
        self._slack = DOMAIN_SLACK * max(1.0, self.times[-1] - self.times[0])

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def _check(self, t: float) -> None:
        if not (self.times[0] - self._slack <= t <= self.times[-1] + self._slack):
            raise OutsideDomain(f"t={t} outside interpolant domain [{self.times[0]}, {self.times[-1]}]")

    def _knot_index(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t))
        if i < self.times.size and self.times[i] == t:
            return i
        return -1

    def __call__(self, t: float) -> np.ndarray:
        self._check(t)
        i = self._knot_index(t)
        if i >= 0:
            return self.values[i].copy()
        return np.asarray(self._spline(t), dtype=float)

    def derivative(self, t: float) -> np.ndarray:
        self._check(t)
        i = self._knot_index(t)
        if i >= 0:
            return self.derivatives[i].copy()
        return np.asarray(self._spline(t, 1), dtype=float)

    def reversed_time(self, total: float) -> "Interpolant":
        """Re-parametrize s ↦ t = total − s (derivatives change sign)."""
        return Interpolant(total - self.times[::-1], self.values[::-1], -self.derivatives[::-1])


class MatrixInterpolant:
    """
    مستوفٍ لمصفوفات n×n مخزنة كمتجهات مسطحة
    """

    def __init__(self, inner: Interpolant, n: int):
        if inner.dim != n * n:
            raise DimensionMismatch(f"flattened dimension {inner.dim} is not {n}x{n}")
        self.inner = inner
        self.n = n

    @property
    def domain(self) -> Tuple[float, float]:
        return self.inner.domain

    @property
    def times(self) -> np.ndarray:
        return self.inner.times

    def __call__(self, t: float) -> np.ndarray:
        return self.inner(t).reshape(self.n, self.n)

    def derivative(self, t: float) -> np.ndarray:
        return self.inner.derivative(t).reshape(self.n, self.n)
