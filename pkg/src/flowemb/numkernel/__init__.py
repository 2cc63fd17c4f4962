"""Numeric foundations: dense matrices, deterministic RNG, reverse-mode autodiff."""
from flowemb.numkernel import autodiff
from flowemb.numkernel.autodiff import Param, Tape, Var, grad
from flowemb.numkernel.matrix import Matrix, matmul, softmax, sym_eig
from flowemb.numkernel.rng import Rng

__all__ = [
    "Matrix",
    "matmul",
    "softmax",
    "sym_eig",
    "Rng",
    "Param",
    "Tape",
    "Var",
    "grad",
    "autodiff",
]
