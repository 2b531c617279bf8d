"""Completion-time and error statistics of probabilistic processes as absorbing Markov chains."""

__version__ = "0.1.0"

from .counting import (
    ErrorDistribution,
    attach_counter,
    error_pmf,
    heralded_error,
    joint_error_pmf,
    nonheralded_error,
)
from .lumping import Partition, check_lumpable, count_partition, lump, lumped_section_matrix
from .markov import (
    CountedMatrix,
    Edge,
    ProcessGraph,
    build_process,
    completion_pmf,
    compose_and,
    compose_or,
    compose_seq,
    load_graph,
    pmf_by_power,
    rescale_timing,
)
from .pgf import PoleSet, Polynomial, RationalFunction, cdf, mean, pgf, pmf, poles_and_residues, variance
from .poly import Poly

__all__ = [
    "__version__",
    "Poly",
    "Edge",
    "ProcessGraph",
    "CountedMatrix",
    "build_process",
    "load_graph",
    "compose_or",
    "compose_and",
    "compose_seq",
    "rescale_timing",
    "completion_pmf",
    "pmf_by_power",
    "Partition",
    "count_partition",
    "check_lumpable",
    "lump",
    "lumped_section_matrix",
    "Polynomial",
    "RationalFunction",
    "PoleSet",
    "pgf",
    "poles_and_residues",
    "pmf",
    "cdf",
    "mean",
    "variance",
    "ErrorDistribution",
    "attach_counter",
    "error_pmf",
    "joint_error_pmf",
    "heralded_error",
    "nonheralded_error",
]
