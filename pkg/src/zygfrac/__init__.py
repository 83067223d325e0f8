"""Numerical study of fractional integrals with Zygmund-dilation kernels."""

from .params import OperatorParams, ThreeParamExponents, compute_vartheta, validate
from .fields import FunctionField, QuadratureGrid, make_field
from .kernels import KernelSpec, eval_kernel
from .operators import OperatorInstance, apply, decompose

__all__ = [
    "OperatorParams", "ThreeParamExponents", "compute_vartheta", "validate",
    "FunctionField", "QuadratureGrid", "make_field",
    "KernelSpec", "eval_kernel",
    "OperatorInstance", "apply", "decompose",
]
