"""Dense-tensor arithmetic with reverse-mode differentiation."""

from ddvm.numeric.field import DenseField
from ddvm.numeric.gradcheck import GradCheckReport, ParamGradient, grad_check
from ddvm.numeric.ops import conv2d, conv_output_size, group_norm, linear
from ddvm.numeric.tensor import (
    DiffGraph,
    Tensor,
    abs_smooth,
    absolute,
    as_tensor,
    binary,
    concat,
    current_graph,
    elementwise,
    exp,
    get_default_dtype,
    log,
    matmul,
    no_grad,
    power,
    reduce_mean,
    reduce_sum,
    reshape,
    set_default_dtype,
    silu,
    softmax,
    sqrt,
    square,
    stop_gradient,
    transpose,
    upsample_nearest,
)

__all__ = [
    "DenseField", "DiffGraph", "GradCheckReport", "ParamGradient", "Tensor",
    "abs_smooth", "absolute", "as_tensor", "binary", "concat", "conv2d", "conv_output_size",
    "current_graph", "elementwise", "exp", "get_default_dtype", "grad_check", "group_norm",
    "linear", "log", "matmul", "no_grad", "power", "reduce_mean", "reduce_sum", "reshape",
    "set_default_dtype", "silu", "softmax", "sqrt", "square", "stop_gradient",
    "transpose", "upsample_nearest",
]
