"""
pycorv.nmf - Bayesian Poisson NMF sampled with mirror or CoRV SGLD
"""

from .dataset import (
    Entries, RATINGS_FORMATS, RatingsDataset, Split, generate_synthetic, load_ratings_csv,
    write_ratings_csv,
)
from .model import (
    FactorState, Minibatch, full_batch, gradient_h, gradient_w, init_factors, nmf_step_corv,
    nmf_step_mirror, nmf_stochastic_gradient, sample_minibatch,
)
from .snapshot import load_factors, save_factors
from .training import (
    PredictiveAccumulator, RMSEPoint, TrainingResult, iterations_to_reach, predict_rmse, train_nmf,
)

__all__ = [
    "Entries", "RATINGS_FORMATS", "RatingsDataset", "Split", "generate_synthetic",
    "load_ratings_csv", "write_ratings_csv",
    "FactorState", "Minibatch", "full_batch", "gradient_h", "gradient_w", "init_factors",
    "nmf_step_corv", "nmf_step_mirror", "nmf_stochastic_gradient", "sample_minibatch",
    "load_factors", "save_factors",
    "PredictiveAccumulator", "RMSEPoint", "TrainingResult", "iterations_to_reach",
    "predict_rmse", "train_nmf",
]
