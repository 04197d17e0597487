"""Exact and certified computations for quantized cat maps on the noncommutative torus."""

__version__ = "0.1.0"

from .arith import IntMatrix, QuadNumber, aperiodicity_check, reduce_mod2, spectral_data
from .bicharacter import BicharacterSpec, ThetaSpec, admissible_thetas, decay_table
from .entropy import Channel, Partition, StateDensity, convergence_report, relative_entropy
from .errors import CatlabError
from .horizon import Window, certificate_n0, sum_bijection
from .ncpoly import NCPolynomial, WindowMatrix, i_X, j_X, sigma_nk

__all__ = [
    "BicharacterSpec", "CatlabError", "Channel", "IntMatrix", "NCPolynomial", "Partition",
    "QuadNumber", "StateDensity", "ThetaSpec", "Window", "WindowMatrix", "admissible_thetas",
    "aperiodicity_check", "certificate_n0", "convergence_report", "decay_table", "i_X", "j_X",
    "reduce_mod2", "relative_entropy", "sigma_nk", "spectral_data", "sum_bijection",
]
