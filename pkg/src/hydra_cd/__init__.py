"""hydra-cd: distributed randomized coordinate descent on a simulated cluster."""

from importlib.metadata import version

__version__ = version("hydra-cd")

def _check_deps():
    try:
        import numpy
        import scipy
    except Exception as e:
        raise RuntimeError(
            "Required dependencies could not be imported.\n"
            "Try:\n"
            "  pip install -U numpy scipy\n"
        ) from e

    np_v = tuple(map(int, numpy.__version__.split(".")[:2]))
    sp_v = tuple(map(int, scipy.__version__.split(".")[:2]))

    # csc_array and Philox(counter=...) need these
    if np_v < (1, 24) or sp_v < (1, 11):
        raise RuntimeError(
            "Incompatible environment detected:\n"
            f"numpy {numpy.__version__} / scipy {scipy.__version__}; need numpy >= 1.24 and scipy >= 1.11\n\n"
            "Fix:\n"
            "  pip install -U numpy scipy\n"
        )

_check_deps()

from .engine import HydraSolver, RunConfig, RunTrace, run
from .errors import HydraError
from .eso import StepsizeInfo, compute_stepsize_info
from .generator import CertifiedInstance, GeneratorSpec, gen_block_angular, gen_lasso_certified
from .loss import LossKind
from .matrix import Partition, SparseMatrix, contiguous_partition, load_matrix_market
from .problem import ProblemInstance, objective
from .regularizer import RegKind, SeparableReg

__all__ = [
    "HydraSolver",
    "RunConfig",
    "RunTrace",
    "run",
    "HydraError",
    "StepsizeInfo",
    "compute_stepsize_info",
    "CertifiedInstance",
    "GeneratorSpec",
    "gen_block_angular",
    "gen_lasso_certified",
    "LossKind",
    "Partition",
    "SparseMatrix",
    "contiguous_partition",
    "load_matrix_market",
    "ProblemInstance",
    "objective",
    "RegKind",
    "SeparableReg",
]
