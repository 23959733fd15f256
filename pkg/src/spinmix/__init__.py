"""Glauber dynamics on sparse random-graph Ising models: generation,
heavy-ball decomposition, exact small-system oracles, spectral and
covariance certification, and stochastic-localization checks."""

__version__ = "0.1.0"

from .config import ExperimentConfig, GeneratorSpec, build_graph, build_model
from .decompose import excise, verify_near_forest, verify_pseudorandom
from .generate import CenteredInteraction, gen_sbm, random_signing
from .graphs import Graph, from_edge_arrays, read_edgelist, write_edgelist
from .ising import IsingModel, SpinConfig, glauber_step, run_chain
from .oracle import ExactOracle, exact_oracle_build
from .rng import RngSeed

__all__ = [
    "__version__",
    "CenteredInteraction", "ExactOracle", "ExperimentConfig", "GeneratorSpec",
    "Graph", "IsingModel", "RngSeed", "SpinConfig",
    "build_graph", "build_model", "exact_oracle_build", "excise",
    "from_edge_arrays", "gen_sbm", "glauber_step", "random_signing",
    "read_edgelist", "run_chain", "verify_near_forest",
    "verify_pseudorandom", "write_edgelist",
]
