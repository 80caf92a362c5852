"""DDP-GP mixture models for semi-competing risks with principal-stratum
estimands, baselines and a simulation harness."""
from .data import Dataset, DataValidationError, ingest_csv, make_dataset
from .gibbs import ChainConfig, PosteriorChain, SamplerError, run_chain, run_chains
from .model import Hyperparameters, empirical_bayes_init

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "DataValidationError",
    "Dataset",
    "Hyperparameters",
    "PosteriorChain",
    "SamplerError",
    "empirical_bayes_init",
    "ingest_csv",
    "make_dataset",
    "run_chain",
    "run_chains",
]
