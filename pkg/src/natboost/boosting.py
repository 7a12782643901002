"""Natural-gradient boosting of a Normal distribution with tree base learners."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from itertools import islice
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Dataset, ScalerStats
from .distribution import (
    SIGMA_FLOOR,
    GradPair,
    NormalParams,
    mean_nll,
    natural_gradient,
    nll_score,
)
from .tree import DEPTH_CLIPPED, GROWTH_MODES, LEAF_CLIPPED, RegressionTree, grow_tree, presort

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is unreadable, truncated, or of an unsupported version."""


@dataclass(frozen=True)
class BoostConfig:
    learning_rate: float = 0.04
    n_estimators: int = 500
    max_leaves: int = 31
    min_samples_leaf: int = 1
    growth_mode: str = LEAF_CLIPPED
    max_depth: int = 3
    line_search_max_halvings: int = 16

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.growth_mode not in GROWTH_MODES:
            raise ValueError(f"growth_mode must be one of {GROWTH_MODES}")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.line_search_max_halvings < 0:
            raise ValueError("line_search_max_halvings must be >= 0")

    def replace(self, **changes) -> "BoostConfig":
        return BoostConfig(**{**asdict(self), **changes})

    @classmethod
    def from_dict(cls, d: dict) -> "BoostConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class Stage:
    mu_tree: RegressionTree
    log_sigma_tree: RegressionTree
    scaling: float


@dataclass(frozen=True)
class BoostModel:
    mu0: float
    log_sigma0: float
    stages: tuple[Stage, ...]
    scaler: ScalerStats
    config: BoostConfig
    # mean training NLL before any stage and after each accepted stage
    train_loss: tuple[float, ...] = field(default=(), compare=False)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def n_features(self) -> int:
        return self.scaler.feature_means.shape[0]


def fit_initial(y) -> tuple[float, float]:
    """Marginal maximum-likelihood Normal fit: ``(mean, log std)``, std floored at 1e-6."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot initialise from an empty target vector")
    std = float(np.std(y))
    return float(np.mean(y)), math.log(max(std, SIGMA_FLOOR))


def line_search(params: NormalParams, direction: GradPair, y, max_halvings: int = 16) -> float:
    """Largest ``rho`` in ``{1, 1/2, ..., 2**-max_halvings}`` that strictly lowers the mean NLL.

    The step taken is ``params - rho * direction``; returns 0.0 if no
    candidate improves.
    """
    base = mean_nll(params, y)
    rho = 1.0
    for _ in range(max_halvings + 1):
        if mean_nll(params.step(direction, rho), y) < base:
            return rho
        rho *= 0.5
    return 0.0


def fit(train: Dataset, config: BoostConfig = BoostConfig(),
        scaler: Optional[ScalerStats] = None, callback=None) -> BoostModel:
    """Boost on (already standardized) training data.

    ``scaler`` is stored on the model for later mapping back to original
    units; it is not applied here. ``callback(k, params)`` is invoked with
    the training-set params after each accepted stage ``k`` (1-based).
    """
    X = train.features
    y = train.targets
    if scaler is None:
        scaler = ScalerStats.identity(train.n_features)
    mu0, ls0 = fit_initial(y)
    n = train.n_rows
    mu = np.full(n, mu0)
    log_sigma = np.full(n, ls0)
    order = presort(X)
    lr = config.learning_rate
    losses = [mean_nll(NormalParams(mu, log_sigma), y)]
    stages = []

    for t in range(config.n_estimators):
        params = NormalParams(mu, log_sigma)
        grad = natural_gradient(params, y)
        trees = [
            grow_tree(X, g, config.growth_mode, config.max_leaves, config.max_depth,
                      config.min_samples_leaf, order)
            for g in (grad.d_mu, grad.d_log_sigma)
        ]
        d_mu = trees[0].predict(X)
        d_ls = trees[1].predict(X)
        # search along the learning-rate-scaled step so the accepted update
        # itself is guaranteed to lower the training score
        rho = line_search(params, GradPair(lr * d_mu, lr * d_ls), y,
                          config.line_search_max_halvings)
        if rho == 0.0:
            logger.info("stopping at stage %d: no step size improves the training score", t)
            break
        scale = lr * rho
        mu = mu - scale * d_mu
        log_sigma = log_sigma - scale * d_ls
        losses.append(mean_nll(NormalParams(mu, log_sigma), y))
        stages.append(Stage(trees[0], trees[1], rho))
        if callback is not None:
            callback(len(stages), NormalParams(mu, log_sigma))

    return BoostModel(mu0, ls0, tuple(stages), scaler, config, tuple(losses))


def iter_staged(model: BoostModel, X):
    """Yield standardized-unit params after 0, 1, ..., n_stages stages."""
    X = _check_features(model, X)
    n = X.shape[0]
    mu = np.full(n, model.mu0)
    log_sigma = np.full(n, model.log_sigma0)
    yield NormalParams(mu, log_sigma)
    lr = model.config.learning_rate
    for stage in model.stages:
        scale = lr * stage.scaling
        mu = mu - scale * stage.mu_tree.predict(X)
        log_sigma = log_sigma - scale * stage.log_sigma_tree.predict(X)
        yield NormalParams(mu, log_sigma)


def _check_features(model: BoostModel, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        found = X.shape[1] if X.ndim == 2 else "non-matrix input"
        raise ValueError(f"model expects {model.n_features} features, found {found}")
    return X


def predict_dist(model: BoostModel, X, stages: Optional[int] = None) -> NormalParams:
    """Predicted Normal params (standardized target units) using the first ``stages`` stages."""
    if stages is None:
        stages = model.n_stages
    if not 0 <= stages <= model.n_stages:
        raise ValueError(f"stages must be in [0, {model.n_stages}], got {stages}")
    return next(islice(iter_staged(model, X), stages, None))


def predict_original(model: BoostModel, X_raw, stages: Optional[int] = None):
    """Mean and scale in original target units for unstandardized features."""
    Z = model.scaler.transform_features(X_raw)
    params = predict_dist(model, Z, stages)
    s = model.scaler.target_std
    return params.mu * s + model.scaler.target_mean, params.sigma * s


def staged_nll(model: BoostModel, val: Dataset) -> np.ndarray:
    """Mean validation NLL for every prefix ``0..n_stages`` in one forward sweep."""
    if val.n_rows == 0:
        raise ValueError("validation set is empty")
    return np.array([float(np.mean(nll_score(p, val.targets)))
                     for p in iter_staged(model, val.features)])


def select_stages(model: BoostModel, val: Dataset) -> int:
    """Stage count with the lowest validation NLL; ties go to the smaller count."""
    return int(np.argmin(staged_nll(model, val)))


def model_to_dict(model: BoostModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "scaler": model.scaler.to_dict(),
        "initial": {"mu0": model.mu0, "log_sigma0": model.log_sigma0},
        "stages": [
            {"mu_tree": s.mu_tree.to_dict(),
             "log_sigma_tree": s.log_sigma_tree.to_dict(),
             "scaling": s.scaling}
            for s in model.stages
        ],
    }


def model_from_dict(d: dict) -> BoostModel:
    if not isinstance(d, dict):
        raise ModelFormatError("model file must contain a JSON object")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r} "
                               f"(expected {FORMAT_VERSION})")
    try:
        config = BoostConfig.from_dict(d["config"])
        scaler = ScalerStats.from_dict(d["scaler"])
        stages = []
        for s in d["stages"]:
            scaling = float(s["scaling"])
            if not 0.0 <= scaling <= 1.0:
                raise ModelFormatError(f"stage scaling {scaling} outside [0, 1]")
            stages.append(Stage(RegressionTree.from_dict(s["mu_tree"]),
                                RegressionTree.from_dict(s["log_sigma_tree"]), scaling))
        if len(stages) > config.n_estimators:
            raise ModelFormatError("model has more stages than n_estimators")
        return BoostModel(float(d["initial"]["mu0"]), float(d["initial"]["log_sigma0"]),
                          tuple(stages), scaler, config)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model: {exc!r}") from exc


def dumps_model(model: BoostModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def save_model(model: BoostModel, path) -> None:
    Path(path).write_text(dumps_model(model))


def load_model(path) -> BoostModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(d)


__all__ = [
    "BoostConfig", "BoostModel", "Stage", "ModelFormatError", "LEAF_CLIPPED", "DEPTH_CLIPPED",
    "fit_initial", "line_search", "fit", "predict_dist", "predict_original", "iter_staged",
    "staged_nll", "select_stages", "save_model", "load_model", "dumps_model",
    "model_to_dict", "model_from_dict",
]
