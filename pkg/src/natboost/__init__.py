"""Natural-gradient boosting for probabilistic regression with leaf-clipped trees."""

from .boosting import (
    BoostConfig,
    BoostModel,
    fit,
    load_model,
    predict_dist,
    predict_original,
    save_model,
    select_stages,
)
from .data import Dataset, ScalerStats, SplitSpec, load_csv
from .distribution import NormalParams, natural_gradient, nll_score
from .evaluation import run_benchmark, run_trial

__version__ = "0.1.0"

__all__ = [
    "BoostConfig", "BoostModel", "Dataset", "NormalParams", "ScalerStats", "SplitSpec",
    "fit", "load_csv", "load_model", "natural_gradient", "nll_score", "predict_dist",
    "predict_original", "run_benchmark", "run_trial", "save_model", "select_stages",
]
