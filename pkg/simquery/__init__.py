"""Similarity-graph approximation from a limited number of edge queries.

Sampling schemes (uniform, adaptive, CLUS2K), cut and spectral
approximation checks, query-budget calculators and the purity experiments
built on them.
"""

from simquery.graph import ClusterStructure, CutSpec, Graph, laplacian, min_cut
from simquery.sampling import QueryOracle, SampledGraph

__all__ = [
    "ClusterStructure",
    "CutSpec",
    "Graph",
    "QueryOracle",
    "SampledGraph",
    "laplacian",
    "min_cut",
]
