"""Closed-form second-order PDE filtering on Cartesian product graphs."""

from .engine import CosineKernel, apply_cosine_filter, apply_heat_filter, cosine_kernel, solve_sotpdeg
from .errors import (
    InvalidArgumentError,
    NumericPreconditionError,
    ParseError,
    ResourceLimitError,
    SotpdegError,
)
from .graph import (
    FactorGraph,
    ProductSpectrum,
    SpectralBasis,
    build_gaussian_kernel_graph,
    build_path_graph,
    dense_product_laplacian,
    eigendecompose,
    product_spectrum,
)
from .kernels import BACKEND
from .model import ModelConfig, SoTPDEGModel, TrainConfig, load_checkpoint, save_checkpoint
from .tensor import TensorSignal

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CosineKernel",
    "FactorGraph",
    "InvalidArgumentError",
    "ModelConfig",
    "NumericPreconditionError",
    "ParseError",
    "ProductSpectrum",
    "ResourceLimitError",
    "SoTPDEGModel",
    "SotpdegError",
    "SpectralBasis",
    "TensorSignal",
    "TrainConfig",
    "apply_cosine_filter",
    "apply_heat_filter",
    "build_gaussian_kernel_graph",
    "build_path_graph",
    "cosine_kernel",
    "dense_product_laplacian",
    "eigendecompose",
    "load_checkpoint",
    "product_spectrum",
    "save_checkpoint",
    "solve_sotpdeg",
]
