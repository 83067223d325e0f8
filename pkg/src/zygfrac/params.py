"""Operator exponents and their admissibility region.

The main operator takes exponents ``alpha`` (shared by the first two
coordinates) and ``beta`` (third coordinate), a bracket exponent ``theta``
and a pair of Lebesgue exponents ``p < q``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

HOMOGENEITY_TOL = 1e-12


class ConstraintViolation(ValueError):
    """Raised when a parameter tuple leaves the admissible region."""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        msg = f"constraint violated: {constraint}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InfeasibleRegion(ValueError):
    pass


@dataclass(frozen=True)
class OperatorParams:
    alpha: float
    beta: float
    theta: float = 1.0
    p: float = 2.0
    q: float = 4.0

    @property
    def homogeneity_gap(self) -> float:
        return (self.alpha + self.beta) / 2 - (1 / self.p - 1 / self.q)

    @property
    def homogeneous(self) -> bool:
        return abs(self.homogeneity_gap) <= HOMOGENEITY_TOL

    @classmethod
    def homogeneous_from(cls, alpha: float, beta: float, q: float, theta: float = 1.0) -> "OperatorParams":
        """Build the tuple whose ``p`` solves the homogeneity relation exactly."""
        inv_p = (alpha + beta) / 2 + 1 / q
        if not 0 < inv_p < 1:
            raise ConstraintViolation("1 < p < inf", f"1/p = {inv_p}")
        return cls(alpha, beta, theta, 1 / inv_p, q)

    def with_p(self, p: float) -> "OperatorParams":
        return replace(self, p=p)

    def to_record(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "theta": self.theta, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class ThreeParamExponents:
    alpha1: float
    alpha2: float
    alpha3: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha1, self.alpha2, self.alpha3)


def _check(ok: bool, constraint: str, detail: str = "") -> None:
    if not ok:
        raise ConstraintViolation(constraint, detail)


def validate(params: OperatorParams) -> OperatorParams:
    """Return ``params`` unchanged if admissible, else raise on the first failed inequality."""
    a, b, t, p, q = params.alpha, params.beta, params.theta, params.p, params.q
    _check(-1 < a < 1, "-1 < alpha < 1", f"alpha={a}")
    _check(-1 < b < 1, "-1 < beta < 1", f"beta={b}")
    _check(a + b > 0, "alpha + beta > 0", f"alpha+beta={a + b}")
    _check(t > 0, "theta > 0", f"theta={t}")
    if t <= 1:
        _check(-t < b < t, "-theta < beta < theta (theta <= 1)", f"beta={b}, theta={t}")
    _check(1 < p < float("inf"), "1 < p < inf", f"p={p}")
    _check(1 < q < float("inf"), "1 < q < inf", f"q={q}")
    _check(p < q, "p < q", f"p={p}, q={q}")
    return params


def validate_three_param(exps: ThreeParamExponents) -> ThreeParamExponents:
    a1, a2, a3 = exps.as_tuple()
    for name, v in (("alpha1", a1), ("alpha2", a2), ("alpha3", a3)):
        _check(-1 < v < 1, f"-1 < {name} < 1", f"{name}={v}")
    _check(a1 + a3 > 0, "alpha1 + alpha3 > 0")
    _check(a2 + a3 > 0, "alpha2 + alpha3 > 0")
    return exps


def vartheta_interval(params: OperatorParams) -> tuple[float, float]:
    """Open interval of bracket exponents admissible for the auxiliary kernel.

    The two requirements are ``alpha - t > 0`` and
    ``1/p - 2/q - alpha + t > 0``.
    """
    lower = max(0.0, params.alpha - (1 / params.p - 2 / params.q))
    return lower, params.alpha


def compute_vartheta(params: OperatorParams, require_prop_one: bool = True) -> float:
    """Midpoint of the feasible interval when ``alpha > 0``; ``1.0`` otherwise."""
    if require_prop_one:
        _check(params.homogeneous, "homogeneity (alpha+beta)/2 = 1/p - 1/q",
               f"gap={params.homogeneity_gap:.3e}")
        q = params.q
        _check(abs(q - round(q)) < 1e-12, "q integer", f"q={q}")
        _check((round(q) - 2) * (params.alpha + params.beta) / 2 >= 1 - 1e-12,
               "(q-2)(alpha+beta)/2 >= 1")
    if params.alpha <= 0:
        return 1.0
    lo, hi = vartheta_interval(params)
    if not hi > lo:
        raise InfeasibleRegion(f"empty vartheta interval ({lo}, {hi})")
    return 0.5 * (lo + hi)


def sigma(params: OperatorParams) -> float:
    return min(params.alpha + params.beta, 2 / params.q)
