"""Loop-nest tensorizing compiler: Python veneer over the C++ core."""

from ._tzc import (
    ComputeOp,
    Intrinsic,
    builtin_names,
    conv2d_tdsl,
    conv3d_tdsl,
    eval_reference,
    inspect,
    intrinsic,
    matmul_tdsl,
    parse_compute,
    tensorize,
    tune,
    verify,
)

__all__ = [
    "ComputeOp",
    "Intrinsic",
    "builtin_names",
    "conv2d_tdsl",
    "conv3d_tdsl",
    "eval_reference",
    "inspect",
    "intrinsic",
    "matmul_tdsl",
    "parse_compute",
    "tensorize",
    "tune",
    "verify",
]

__version__ = "0.1.0"
