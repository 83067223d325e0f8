"""Pointwise kernel evaluation.

All variants are evaluated in log2-space: the power factors become a
weighted sum of ``log2|x_i|`` and the Zygmund bracket
``[|x1||x2|/|x3| + |x3|/(|x1||x2|)]`` becomes ``|u| + log2(1 + 2^{-2|u|})``
with ``u = log2|x1| + log2|x2| - log2|x3|``.  Nothing overflows before the
final ``exp2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .params import ConstraintViolation, OperatorParams, ThreeParamExponents, validate_three_param

# |log2 V| beyond this is flushed to 0 / inf and flagged
FLUSH_LOG2 = 500.0


class SingularPoint(ValueError):
    pass


class Variant(enum.Enum):
    ALPHA_BETA = "V_alpha_beta"
    ALPHA_BETA_THETA = "V_alpha_beta_theta"
    THREE_PARAM = "V_three_param"
    ONE_D = "I_alpha_1d"


@dataclass(frozen=True)
class KernelSpec:
    variant: Variant
    alpha: float = 0.0
    beta: float = 0.0
    theta: float = 1.0
    exps: ThreeParamExponents | None = None

    def __post_init__(self):
        v = self.variant
        if v in (Variant.ALPHA_BETA, Variant.ALPHA_BETA_THETA):
            a, b, t = self.alpha, self.beta, self.theta
            if v is Variant.ALPHA_BETA and t != 1.0:
                raise ConstraintViolation("theta = 1 for V_alpha_beta")
            if not -1 < a < 1:
                raise ConstraintViolation("-1 < alpha < 1", f"alpha={a}")
            if not -1 < b < 1:
                raise ConstraintViolation("-1 < beta < 1", f"beta={b}")
            if not a + b > 0:
                raise ConstraintViolation("alpha + beta > 0")
            if not t >= 0:
                raise ConstraintViolation("theta >= 0", f"theta={t}")
        elif v is Variant.THREE_PARAM:
            if self.exps is None:
                raise ConstraintViolation("three-parameter kernel needs exponents")
            validate_three_param(self.exps)
        elif v is Variant.ONE_D:
            if not 0 < self.alpha < 1:
                raise ConstraintViolation("0 < alpha < 1", f"alpha={self.alpha}")

    @classmethod
    def main(cls, alpha: float, beta: float) -> "KernelSpec":
        return cls(Variant.ALPHA_BETA, alpha, beta, 1.0)

    @classmethod
    def with_theta(cls, alpha: float, beta: float, theta: float) -> "KernelSpec":
        return cls(Variant.ALPHA_BETA_THETA, alpha, beta, float(theta))

    @classmethod
    def from_params(cls, params: OperatorParams, theta: float | None = None) -> "KernelSpec":
        if theta is None:
            theta = params.theta
        if theta == 1.0:
            return cls.main(params.alpha, params.beta)
        return cls.with_theta(params.alpha, params.beta, theta)

    @classmethod
    def three_param(cls, exps: ThreeParamExponents) -> "KernelSpec":
        return cls(Variant.THREE_PARAM, exps=exps)

    @classmethod
    def one_d(cls, alpha: float) -> "KernelSpec":
        return cls(Variant.ONE_D, alpha=alpha)

    @property
    def ndim(self) -> int:
        return 1 if self.variant is Variant.ONE_D else 3

    @property
    def zygmund(self) -> bool:
        return self.variant in (Variant.ALPHA_BETA, Variant.ALPHA_BETA_THETA)

    @property
    def dilation_exponent(self) -> float:
        """``V(tau_s x) = 2^{s * e} V(x)`` with ``e = 2 - alpha - beta``."""
        return 2.0 - self.alpha - self.beta


def log2_bracket(l1, l2, l3):
    """log2 of ``|x1||x2|/|x3| + |x3|/(|x1||x2|)`` from the coordinate logs."""
    u = np.abs(l1 + l2 - l3)
    return u + np.log2(1.0 + np.exp2(-2.0 * u))


def _log2_abs(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    if np.any(ax == 0):
        raise SingularPoint("kernel evaluated on a coordinate hyperplane")
    return np.log2(ax)


def kernel_log2(spec: KernelSpec, x) -> np.ndarray:
    """log2 of the kernel value at one or many points (last axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    if spec.variant is Variant.ONE_D:
        return (spec.alpha - 1.0) * _log2_abs(x)
    lg = _log2_abs(x)
    l1, l2, l3 = lg[..., 0], lg[..., 1], lg[..., 2]
    if spec.variant is Variant.THREE_PARAM:
        a1, a2, a3 = spec.exps.as_tuple()
        return (a1 - 1) * l1 + (a2 - 1) * l2 + (a3 - 1) * l3 - log2_bracket(l1, l2, l3)
    out = (spec.alpha - 1.0) * (l1 + l2) + (spec.beta - 1.0) * l3
    if spec.theta != 0:
        out = out - spec.theta * log2_bracket(l1, l2, l3)
    return out


def _exp2_flushed(lv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flags = np.abs(lv) > FLUSH_LOG2
    val = np.exp2(np.clip(lv, -FLUSH_LOG2, FLUSH_LOG2))
    val = np.where(lv > FLUSH_LOG2, np.inf, np.where(lv < -FLUSH_LOG2, 0.0, val))
    return val, flags


def eval_kernel(spec: KernelSpec, x, return_flags: bool = False):
    """Kernel value(s).  With ``return_flags`` also returns the flush mask."""
    lv = kernel_log2(spec, x)
    val, flags = _exp2_flushed(np.asarray(lv))
    if np.ndim(val) == 0:
        val, flags = float(val), bool(flags)
    return (val, flags) if return_flags else val


def tau(s: int, x) -> np.ndarray:
    """``tau_s x = (x1, 2^-s x2, 2^-s x3)``."""
    x = np.asarray(x, dtype=float)
    t = np.array([1.0, 2.0 ** -s, 2.0 ** -s])
    return x * t


def kernel_dilation_factor(spec: KernelSpec, s: int, x) -> tuple:
    """``(V(tau_s x), 2^{s(1-alpha)} 2^{s(1-beta)} V(x))``; equal for Zygmund kernels."""
    if not spec.zygmund:
        raise ValueError("dilation identity only applies to Zygmund kernels")
    lhs = eval_kernel(spec, tau(s, x))
    rhs = np.exp2(s * spec.dilation_exponent) * eval_kernel(spec, x)
    return lhs, rhs


def kernel_pointwise_compare(params: OperatorParams, vartheta: float, x) -> tuple:
    """``(V^{ab}(x), V^{ab,vartheta}(x))``; the first never exceeds the second when ``vartheta <= 1``."""
    if not 0 < vartheta <= 1:
        raise ValueError("comparison needs 0 < vartheta <= 1")
    main = KernelSpec.main(params.alpha, params.beta)
    aux = KernelSpec.with_theta(params.alpha, params.beta, vartheta)
    return eval_kernel(main, x), eval_kernel(aux, x)


class Bounds(NamedTuple):
    lower: float
    upper: float


def _factor_range(e: float) -> tuple[float, float]:
    """Range of ``t^e`` for ``t`` in [1, 2]."""
    return (2.0 ** e, 1.0) if e < 0 else (1.0, 2.0 ** e)


def _bracket_ratio(c: float, k: int) -> float:
    """``(c 2^k + 1/(c 2^k)) / (2^k + 2^-k)`` without overflow."""
    w = 2.0 ** (-2 * abs(k))
    if k >= 0:
        return (c + w / c) / (1.0 + w)
    return (w * c + 1.0 / c) / (w + 1.0)


def shell_reference_log2(spec: KernelSpec, ell: int, j: int, k: int) -> float:
    """log2 of ``2^{j(a-1)} 2^{(j-l)(a-1)} 2^{(2j-l-k)(b-1)} [2^k + 2^-k]^{-theta}``."""
    a, b, t = spec.alpha, spec.beta, spec.theta
    lb = abs(k) + np.log2(1.0 + 2.0 ** (-2 * abs(k)))
    return j * (a - 1) + (j - ell) * (a - 1) + (2 * j - ell - k) * (b - 1) - t * lb


def shell_comparability_bounds(spec: KernelSpec, shell) -> Bounds:
    """Rigorous bounds on ``V(x - y) / reference`` over ``y`` in the shell.

    Inside the shell ``|x_i - y_i| = 2^{e_i} t_i`` with ``t_i`` in [1, 2), so the
    power part moves by ``t1^{a-1} t2^{a-1} t3^{b-1}`` and the bracket
    argument is ``2^k c`` with ``c = t1 t2 / t3`` in (1/2, 4).
    """
    if not spec.zygmund:
        raise ValueError("shell bounds are defined for Zygmund kernels")
    k = int(shell[2])
    a, b, t = spec.alpha, spec.beta, spec.theta
    lo, hi = 1.0, 1.0
    for e in (a - 1, a - 1, b - 1):
        fl, fh = _factor_range(e)
        lo, hi = lo * fl, hi * fh
    if t != 0:
        r_ends = [_bracket_ratio(0.5, k), _bracket_ratio(4.0, k)]
        r_max = max(r_ends)
        if -2 <= k <= 1:  # u = 1 lies inside [2^{k-1}, 2^{k+2}]
            r_min = 2.0 / (2.0 ** k + 2.0 ** -k)
        else:
            r_min = min(r_ends)
        lo *= r_max ** -t
        hi *= r_min ** -t
    return Bounds(lo, hi)


def generic_comparability_ratio(spec: KernelSpec) -> float:
    """``2^{2|a-1| + |b-1| + 3 theta}``: the shell-independent width bound."""
    return 2.0 ** (2 * abs(spec.alpha - 1) + abs(spec.beta - 1) + 3 * spec.theta)
