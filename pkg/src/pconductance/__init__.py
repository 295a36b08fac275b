"""p-conductance learning: measure mincut programs on weighted graphs,
a semismooth Newton augmented Lagrangian solver, duality validators, and a
CLI experiment harness."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
