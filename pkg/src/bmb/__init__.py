"""Posterior inference for the Markov blanket of query variables in a
Gaussian graphical model, with a rank-copula extension for mixed data.
"""

__version__ = "0.1.0"

from .copula import CopulaConfig, MixedDataTable, run_copula_chain
from .diagnostics import (
    ChainSeries,
    autocorrelation,
    effective_sample_size,
    geweke_z,
)
from .linalg import DataMatrix, PartitionedCov, SpdMatrix, partition_scatter
from .rng import RngStream
from .sampler import ChainConfig, ChainOutput, HyperParams, run_chain
from .synthetic import (
    BlanketEstimate,
    GraphSpec,
    GroundTruth,
    ScoreReport,
    gen_precision,
    score,
    simulate_data,
    threshold_blanket,
)

__all__ = [
    "BlanketEstimate",
    "ChainConfig",
    "ChainOutput",
    "ChainSeries",
    "CopulaConfig",
    "DataMatrix",
    "GraphSpec",
    "GroundTruth",
    "HyperParams",
    "MixedDataTable",
    "PartitionedCov",
    "RngStream",
    "ScoreReport",
    "SpdMatrix",
    "autocorrelation",
    "effective_sample_size",
    "gen_precision",
    "geweke_z",
    "partition_scatter",
    "run_chain",
    "run_copula_chain",
    "score",
    "simulate_data",
    "threshold_blanket",
    "__version__",
]
