"""Normal output distribution in the (mean, log-scale) parametrization.

Provides the negative log-likelihood score, its gradient, the Fisher
information and the natural gradient used as the boosting direction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class NormalParams:
    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        log_sigma = np.atleast_1d(np.asarray(self.log_sigma, dtype=np.float64))
        if mu.shape != log_sigma.shape or mu.ndim != 1:
            raise ValueError("mu and log_sigma must be 1-D vectors of equal length")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_sigma", log_sigma)

    def __len__(self):
        return self.mu.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def step(self, direction: "GradPair", scale: float) -> "NormalParams":
        """Return ``self - scale * direction``."""
        return NormalParams(self.mu - scale * direction.d_mu,
                            self.log_sigma - scale * direction.d_log_sigma)


@dataclass(frozen=True)
class GradPair:
    d_mu: np.ndarray
    d_log_sigma: np.ndarray

    def __post_init__(self):
        d_mu = np.asarray(self.d_mu, dtype=np.float64)
        d_ls = np.asarray(self.d_log_sigma, dtype=np.float64)
        if d_mu.shape != d_ls.shape:
            raise ValueError("gradient components must have equal length")
        object.__setattr__(self, "d_mu", d_mu)
        object.__setattr__(self, "d_log_sigma", d_ls)

    def as_matrix(self) -> np.ndarray:
        """Stack into an ``(n, 2)`` array, columns (mu, log_sigma)."""
        return np.column_stack([self.d_mu, self.d_log_sigma])


def _check(params: NormalParams, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.shape != params.mu.shape:
        raise ValueError(f"length mismatch: {params.mu.shape[0]} params vs {y.shape[0]} targets")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(params.mu))
            and np.all(np.isfinite(params.log_sigma))):
        raise ValueError("non-finite input to Normal score")
    return y


def nll_score(params: NormalParams, y, sigma_floor: float = SIGMA_FLOOR) -> np.ndarray:
    """Per-example negative log-likelihood in nats.

    The scale is clamped from below at ``sigma_floor``.
    """
    y = _check(params, y)
    log_sigma = params.log_sigma
    floor = math.log(sigma_floor)
    if np.any(log_sigma < floor):
        logger.debug("clamping %d scale values to sigma floor %g",
                     int(np.sum(log_sigma < floor)), sigma_floor)
        log_sigma = np.maximum(log_sigma, floor)
    z = (y - params.mu) * np.exp(-log_sigma)
    return log_sigma + HALF_LOG_2PI + 0.5 * z * z


def mean_nll(params: NormalParams, y, sigma_floor: float = SIGMA_FLOOR) -> float:
    return float(np.mean(nll_score(params, y, sigma_floor)))


def nll_gradient(params: NormalParams, y) -> GradPair:
    y = _check(params, y)
    inv_var = np.exp(-2.0 * params.log_sigma)
    diff = params.mu - y
    return GradPair(diff * inv_var, 1.0 - diff * diff * inv_var)


def fisher_information(params: NormalParams) -> np.ndarray:
    """Per-example Fisher matrices, shape ``(n, 2, 2)``."""
    n = len(params)
    F = np.zeros((n, 2, 2))
    F[:, 0, 0] = np.exp(-2.0 * params.log_sigma)
    F[:, 1, 1] = 2.0
    return F


def natural_gradient(params: NormalParams, y) -> GradPair:
    """Inverse-Fisher-preconditioned gradient, in closed form."""
    y = _check(params, y)
    diff = params.mu - y
    inv_var = np.exp(-2.0 * params.log_sigma)
    return GradPair(diff, 0.5 * (1.0 - diff * diff * inv_var))
