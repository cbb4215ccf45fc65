"""Spline gridding for Fourier reconstruction from parallel-beam projections."""
import os

_threads = os.environ.get("SPLINE_RADON_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .special_functions import SplineParams, bessel_k, fundamental_solution  # noqa: E402
from .knots import KnotSet, lattice_knots, jittered_knots, polar_grid, PolarGridSpec  # noqa: E402
from .spline_interp import interpolate, solve_lagrangian, LagrangianSpline, Interpolant  # noqa: E402
from .radon import Phantom, Ellipse, Sinogram, sinogram_analytic, fbp_reconstruct  # noqa: E402
from .fourier_algorithm import GriddingConfig, reconstruct, RunReport  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "SplineParams",
    "bessel_k",
    "fundamental_solution",
    "KnotSet",
    "lattice_knots",
    "jittered_knots",
    "polar_grid",
    "PolarGridSpec",
    "interpolate",
    "solve_lagrangian",
    "LagrangianSpline",
    "Interpolant",
    "Phantom",
    "Ellipse",
    "Sinogram",
    "sinogram_analytic",
    "fbp_reconstruct",
    "GriddingConfig",
    "reconstruct",
    "RunReport",
]
