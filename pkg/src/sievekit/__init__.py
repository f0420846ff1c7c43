"""sievekit: lattice sieving for SVP, adaptive CVP and CVP with preprocessing."""

from .adaptive import solve_cvp_adaptive
from .cvpp import CvppParams, PreprocessedList, min_alpha, preprocess, reduce_target, solve
from .enumeration import babai_nearest_plane, enumerate_cvp, enumerate_svp
from .errors import (CertificationError, DomainError, FormatError, InputError, ListStarvationError,
                     OracleCapError, SievekitError, WrongLatticeError)
from .lattice import Basis, LatticeVector, gaussian_heuristic_lambda1, gram_schmidt, random_lattice
from .sieve import gauss_sieve, relaxed_gauss_sieve, run_nv_sieve

__version__ = "0.1.0"

__all__ = [
    "Basis", "LatticeVector", "CvppParams", "PreprocessedList",
    "random_lattice", "gram_schmidt", "gaussian_heuristic_lambda1",
    "enumerate_svp", "enumerate_cvp", "babai_nearest_plane",
    "gauss_sieve", "relaxed_gauss_sieve", "run_nv_sieve", "solve_cvp_adaptive",
    "preprocess", "reduce_target", "solve", "min_alpha",
    "SievekitError", "InputError", "DomainError", "FormatError", "OracleCapError",
    "ListStarvationError", "CertificationError", "WrongLatticeError",
]
