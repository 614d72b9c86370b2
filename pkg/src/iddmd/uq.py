"""Bagged ensembles: refit on random column subsets of the global regression."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fit import FitConfig, IdDmdModel, RankError, build_regression, fit_regression

__all__ = ["BagConfig", "EnsembleSummary", "run_seed", "bag_columns", "bagged_ensemble", "ensemble_statistics"]

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def run_seed(seed: int, run: int) -> int:
    """Per-replicate seed derived from the base seed and run index."""
    return _splitmix64((int(seed) + int(run)) & _MASK64)


@dataclass(frozen=True)
class BagConfig:
    n_runs: int = 30
    column_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be positive")
        if not 0 < self.column_fraction <= 1:
            raise ValueError("column_fraction must lie in (0, 1]")


def bag_columns(n: int, bag: BagConfig, run: int) -> np.ndarray:
    """Sorted column indices of replicate ``run`` (all columns when the fraction is 1)."""
    if bag.column_fraction >= 1.0:
        return np.arange(n)
    k = int(math.floor(bag.column_fraction * n))
    rng = np.random.default_rng(run_seed(bag.seed, run))
    return np.sort(rng.choice(n, size=k, replace=False))


def bagged_ensemble(snapshots, fit_cfg: FitConfig, bag: BagConfig, threads: int = 1) -> list[IdDmdModel]:
    """Fit ``bag.n_runs`` models, each on a random subset of the aligned ``(Z, Xi)`` columns."""
    reg, alpha = build_regression(snapshots, fit_cfg)
    k = int(math.floor(bag.column_fraction * reg.n)) if bag.column_fraction < 1 else reg.n
    need = fit_cfg.rank_xi or 1
    if k < need:
        raise RankError(f"{k} sampled columns cannot support rank_xi={need}")
    obs = fit_cfg.observables if fit_cfg.observables is not None and not fit_cfg.observables.is_identity else None

    def one(run):
        sub = reg if bag.column_fraction >= 1.0 else reg.subset(bag_columns(reg.n, bag, run))
        return fit_regression(sub, alpha, snapshots.dt, fit_cfg, obs, snapshots.param_names)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(bag.n_runs)))
    return [one(r) for r in range(bag.n_runs)]


@dataclass
class EnsembleSummary:
    """Replicate statistics of a scalar or array-valued query."""

    values: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    p05: np.ndarray
    p95: np.ndarray
    failures: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def ensemble_statistics(ensemble: Sequence[IdDmdModel], query: Callable[[IdDmdModel], object]) -> EnsembleSummary:
    """Mean, sample std (n-1 divisor) and 5/95 percentiles of ``query`` over replicates.

    Replicates whose query raises are recorded in ``failures`` and excluded.
    """
    if not ensemble:
        raise ValueError("empty ensemble")
    vals, failures = [], {}
    for i, model in enumerate(ensemble):
        try:
            vals.append(np.asarray(query(model), dtype=float))
        except Exception as exc:  # noqa: BLE001 - per-replicate failure is data
            failures[i] = repr(exc)
    if not vals:
        raise RuntimeError(f"query failed on every replicate: {failures}")
    v = np.stack(vals)
    # shift by the first replicate so identical replicates give exactly zero spread
    d = v - v[0]
    std = d.std(axis=0, ddof=1) if v.shape[0] > 1 else np.zeros(v.shape[1:])
    return EnsembleSummary(
        values=v,
        mean=v[0] + d.mean(axis=0),
        std=std,
        p05=np.percentile(v, 5, axis=0),
        p95=np.percentile(v, 95, axis=0),
        failures=failures,
    )
