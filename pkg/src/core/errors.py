"""
الأخطاء المعرفة
Typed errors shared by every funnel-forge module
"""

from typing import Optional

import numpy as np


class FunnelForgeError(Exception):
    """الخطأ الأساسي"""


class InvalidParameter(FunnelForgeError, ValueError):
    """معامل خارج النطاق المسموح"""


class DimensionMismatch(FunnelForgeError, ValueError):
    """أبعاد غير متوافقة"""


class NonSquareMatrix(DimensionMismatch):
    """مصفوفة غير مربعة"""


class NonFiniteInput(FunnelForgeError, ValueError):
    """مدخلات تحتوي NaN أو Inf"""


class NonSymmetricMatrix(FunnelForgeError, ValueError):
    """مصفوفة غير متماثلة"""


class NotPositiveDefinite(FunnelForgeError, np.linalg.LinAlgError):
    """مصفوفة ليست موجبة التحديد"""


class OutsideDomain(FunnelForgeError, ValueError):
    """زمن خارج مجال الاستيفاء"""


class StepLimitExceeded(FunnelForgeError, RuntimeError):
    """تجاوز الحد الأقصى لخطوات التكامل"""


class NonFiniteState(FunnelForgeError, ArithmeticError):
    """
    انفجار الحل العددي

    The flow started at ``initial_state`` / ``initial_time`` left every finite
    bound before ``time``. Falsifiers treat this as a counterexample with
    objective +inf.
    """

    def __init__(
        self,
        message: str,
        initial_state: Optional[np.ndarray] = None,
        initial_time: float = 0.0,
        time: float = 0.0,
    ):
        super().__init__(message)
        self.initial_state = None if initial_state is None else np.array(initial_state, dtype=float)
        self.initial_time = initial_time
        self.time = time


class NoStabilizingGain(FunnelForgeError, RuntimeError):
    """تعذر إيجاد كسب مثبت ابتدائي"""


class NotConverged(FunnelForgeError, RuntimeError):
    """لم تتقارب الخوارزمية"""


class NonFiniteProblem(FunnelForgeError, ArithmeticError):
    """دالة الهدف أو القيد غير منتهية عند نقطة البداية"""


class InfeasibleStart(FunnelForgeError, ValueError):
    """نقطة البداية تنتهك القيد"""


class GoalExcludesTrajectoryEnd(FunnelForgeError, ValueError):
    """نهاية المسار المرجعي خارج منطقة الهدف"""


class RhoUnderflow(FunnelForgeError, ArithmeticError):
    """مستوى القمع أصغر من الحد الأدنى"""


class SynthesisError(FunnelForgeError, RuntimeError):
    """
    فشل في بناء القمع

    Wraps a lower-level failure with the interval index and the NLP that
    was running when it happened.
    """

    def __init__(self, message: str, k: int, nlp: str):
        super().__init__(f"interval k={k}, NLP '{nlp}': {message}")
        self.k = k
        self.nlp = nlp


class ConfigError(FunnelForgeError, ValueError):
    """خطأ في إعدادات التجربة"""


class NonlinearSystemError(FunnelForgeError, ValueError):
    """العملية تتطلب نظاماً خطياً"""
