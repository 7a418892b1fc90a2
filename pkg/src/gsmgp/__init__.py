"""Gaussian-process regression for time series with grid spectral mixture kernels."""
from ._backend import BACKEND
from .gp import TimeSeries, mse, nll, nll_gradient, posterior
from .kernels import GridSpec, GsmModel, SubKernelGrid, generate_grids

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "TimeSeries", "mse", "nll", "nll_gradient", "posterior",
    "GridSpec", "GsmModel", "SubKernelGrid", "generate_grids", "__version__",
]
