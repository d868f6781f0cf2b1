"""Random walks killed at square-root boundaries: special functions,
exponents, Monte Carlo survival, and the harmonic function W."""

import os

# prefer OpenMP, then the portable work queue, for numba's parallel loops
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

__version__ = "0.1.0"

from .exponent_solver import ExponentSolveResult, c_of_p, p_of_c  # noqa: E402
from .rng import SeedSpec  # noqa: E402
from .special_fn import (QuadratureConfig, SpaceTimePoint, eval_psi, eval_V,  # noqa: E402
                         eval_V_clipped, dV_dt, dV_dx, psi)
from .walk_model import Boundary, IncrementDistribution  # noqa: E402

__all__ = [
    "Boundary", "ExponentSolveResult", "IncrementDistribution", "QuadratureConfig",
    "SeedSpec", "SpaceTimePoint", "c_of_p", "dV_dt", "dV_dx", "eval_V", "eval_V_clipped",
    "eval_psi", "p_of_c", "psi", "__version__",
]
