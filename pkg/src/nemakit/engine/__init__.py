from . import kernels, ops
from .gradcheck import GradCheckReport, gradient_check
from .tensor import Parameter, Tensor, default_dtype, no_grad, precision, set_default_dtype

__all__ = [
    "GradCheckReport",
    "Parameter",
    "Tensor",
    "default_dtype",
    "gradient_check",
    "kernels",
    "no_grad",
    "ops",
    "precision",
    "set_default_dtype",
]
