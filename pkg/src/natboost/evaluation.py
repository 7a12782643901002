"""Repeated-split benchmark protocol: RMSE, NLL and average training time."""

from __future__ import annotations

import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .boosting import BoostConfig, BoostModel, fit, predict_dist, select_stages
from .data import Dataset, ScalerStats, SplitSpec, apply_scaler, fit_scaler, split
from .distribution import SIGMA_FLOOR, NormalParams, nll_score

logger = logging.getLogger(__name__)

# NLL in original units is computed two ways; they must agree this closely
NLL_CROSSCHECK_TOL = 1e-10


@dataclass(frozen=True)
class TrialResult:
    rmse: float
    nll: float
    selected_M: int
    train_seconds: float
    seed: int
    refit_stages: int = -1


@dataclass(frozen=True)
class AggregateResult:
    rmse_mean: float
    rmse_std: Optional[float]
    nll_mean: float
    nll_std: Optional[float]
    att_seconds: float
    trials: int
    per_trial: tuple[TrialResult, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_trial"] = [asdict(t) for t in self.per_trial]
        return d


def rmse(mu, y) -> float:
    mu = np.asarray(mu, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if mu.shape != y.shape:
        raise ValueError(f"length mismatch: {mu.shape} vs {y.shape}")
    return float(np.sqrt(np.mean((mu - y) ** 2)))


def nll_original_units(params_std: NormalParams, y_original, scaler: ScalerStats) -> float:
    """Mean NLL of original-unit targets under the de-standardized predictive distribution."""
    y_original = np.asarray(y_original, dtype=np.float64)
    if y_original.shape != params_std.mu.shape:
        raise ValueError(f"length mismatch: {params_std.mu.shape} vs {y_original.shape}")
    s = scaler.target_std
    log_s = math.log(s)
    direct = NormalParams(params_std.mu * s + scaler.target_mean, params_std.log_sigma + log_s)
    nll_direct = float(np.mean(nll_score(direct, y_original, SIGMA_FLOOR * s)))
    y_std = scaler.transform_targets(y_original)
    nll_shifted = float(np.mean(nll_score(params_std, y_std))) + log_s
    if abs(nll_direct - nll_shifted) > NLL_CROSSCHECK_TOL * max(1.0, abs(nll_direct)):
        raise ArithmeticError(
            f"NLL change-of-variables check failed: {nll_direct!r} vs {nll_shifted!r}")
    return nll_direct


def _standardized(ds: Dataset, idx, scaler: ScalerStats) -> Dataset:
    return apply_scaler(ds.subset(idx), scaler)


@dataclass(frozen=True)
class ProtocolFit:
    model: BoostModel
    selected_M: int
    train_seconds: float
    fit_indices: np.ndarray
    test_indices: np.ndarray


def select_and_refit(ds: Dataset, config: BoostConfig, seed: int,
                     test_fraction: float = 0.1, validation_fraction: float = 0.2) -> ProtocolFit:
    """Fit on the train fold, pick M on validation NLL, refit train+validation with M stages.

    ``train_seconds`` covers both fits and nothing else.
    """
    train_idx, val_idx, test_idx = split(ds, SplitSpec(test_fraction, validation_fraction, seed))

    scaler = fit_scaler(ds, train_idx)
    train = _standardized(ds, train_idx, scaler)
    val = _standardized(ds, val_idx, scaler)
    t0 = time.perf_counter()
    model = fit(train, config, scaler)
    elapsed = time.perf_counter() - t0
    selected = select_stages(model, val)

    fit_idx = np.sort(np.concatenate([train_idx, val_idx]))
    full_scaler = fit_scaler(ds, fit_idx)
    full = _standardized(ds, fit_idx, full_scaler)
    t0 = time.perf_counter()
    refit = fit(full, config.replace(n_estimators=selected), full_scaler)
    elapsed += time.perf_counter() - t0
    if refit.n_stages < selected:
        logger.info("refit stopped early at %d of %d stages", refit.n_stages, selected)
    return ProtocolFit(refit, selected, elapsed, fit_idx, test_idx)


def run_trial(ds: Dataset, config: BoostConfig = BoostConfig(), seed: int = 0,
              test_fraction: float = 0.1, validation_fraction: float = 0.2) -> TrialResult:
    """One protocol repeat scored on its held-out test rows, in original target units."""
    pf = select_and_refit(ds, config, seed, test_fraction, validation_fraction)
    scaler = pf.model.scaler
    test = ds.subset(pf.test_indices)
    params = predict_dist(pf.model, scaler.transform_features(test.features))
    return TrialResult(
        rmse=rmse(scaler.inverse_targets(params.mu), test.targets),
        nll=nll_original_units(params, test.targets, scaler),
        selected_M=pf.selected_M,
        train_seconds=pf.train_seconds,
        seed=seed,
        refit_stages=pf.model.n_stages,
    )


def aggregate(results: Sequence[TrialResult]) -> AggregateResult:
    if not results:
        raise ValueError("no trial results to aggregate")
    # statistics works in exact rationals: identical trials give std exactly 0
    r = [t.rmse for t in results]
    nll = [t.nll for t in results]
    many = len(results) > 1
    return AggregateResult(
        rmse_mean=float(statistics.mean(r)),
        rmse_std=float(statistics.stdev(r)) if many else None,
        nll_mean=float(statistics.mean(nll)),
        nll_std=float(statistics.stdev(nll)) if many else None,
        att_seconds=float(statistics.mean(t.train_seconds for t in results)),
        trials=len(results),
        per_trial=tuple(results),
    )


def _trial_job(args):
    return run_trial(*args)


def run_benchmark(ds: Dataset, config: BoostConfig = BoostConfig(), trials: int = 20,
                  base_seed: int = 0, jobs: int = 1, seeds: Optional[Sequence[int]] = None,
                  progress=None) -> AggregateResult:
    """Run ``trials`` protocol repeats with seeds ``base_seed, base_seed+1, ...``.

    ``seeds`` overrides the seed list. ``progress`` is called with each
    finished :class:`TrialResult`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if seeds is None:
        seeds = range(base_seed, base_seed + trials)
    jobs_args = [(ds, config, int(s)) for s in seeds]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_trial_job, jobs_args):
                results.append(res)
                if progress:
                    progress(res)
    else:
        for args in jobs_args:
            res = _trial_job(args)
            results.append(res)
            if progress:
                progress(res)
    return aggregate(results)


def benchmark_report(dataset: str, ds: Dataset, config: BoostConfig, result: AggregateResult) -> dict:
    """Results JSON document for one benchmark invocation."""
    body = result.to_dict()
    per_trial = body.pop("per_trial")
    return {
        "dataset": dataset,
        "n_rows": ds.n_rows,
        "config": asdict(config),
        **body,
        "per_trial": per_trial,
    }


def format_row(dataset: str, n_rows: int, result: AggregateResult) -> str:
    """Table-style line: ``name & N & rmse ± std & nll ± std & ATT``."""
    def pm(mean, std):
        return f"{mean:.2f} ± {'NA' if std is None else f'{std:.2f}'}"
    return (f"{dataset} & {n_rows} & {pm(result.rmse_mean, result.rmse_std)} & "
            f"{pm(result.nll_mean, result.nll_std)} & {result.att_seconds:.2f}s")
