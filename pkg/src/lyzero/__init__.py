"""Exact partition polynomials, zero-free strip certificates and complex
Glauber dynamics for hypergraph colourings and CNF formulas."""

__version__ = "0.1.0"

from .exact import PartitionPolynomial, factorized_partition_poly, brute_force_partition_poly
from .model import AtomicCsp, CnfFormula, Hypergraph, ProjectionScheme, load_instance

__all__ = [
    "AtomicCsp", "CnfFormula", "Hypergraph", "PartitionPolynomial", "ProjectionScheme",
    "brute_force_partition_poly", "factorized_partition_poly", "load_instance",
]
