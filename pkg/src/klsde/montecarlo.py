"""Chunked Monte Carlo means with deterministic reduction.

Samples are produced in fixed chunks ``[start, start + count)``; chunks may
run on a thread pool, but results are gathered and reduced in index order so
the estimate does not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .baselines import SteppingPlan, step_paths
from .errors import ValidationError
from .klprocess import standard_normals
from .sampler import SamplerPlan, sample_batch, sample_normal_fastpath_batch

__all__ = [
    "McEstimate",
    "mc_mean",
    "mc_second_moment",
    "kl_sampler",
    "stepping_sampler",
]

DEFAULT_CHUNK = 4096

BatchSampler = Callable[[int, int], np.ndarray]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float  # nan when samples == 1
    samples: int


def mc_mean(values: Callable[[int, int], np.ndarray], samples: int,
            chunk: int = DEFAULT_CHUNK, workers: int = 1) -> McEstimate:
    """Mean and standard error of scalar ``values(start, count)`` over ``samples`` draws."""
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples}")
    if chunk < 1 or workers < 1:
        raise ValidationError("chunk and workers must be positive")
    spans = [(s, min(chunk, samples - s)) for s in range(0, samples, chunk)]
    if workers == 1:
        parts = [values(s, c) for s, c in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda sc: values(*sc), spans))
    vals = np.concatenate([np.asarray(p, dtype=float).reshape(-1) for p in parts])
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return McEstimate(mean=mean, std_error=se, samples=samples)


def mc_second_moment(sampler: BatchSampler, samples: int, chunk: int = DEFAULT_CHUNK,
                     workers: int = 1) -> McEstimate:
    """Estimate ``E |X|^2`` from a batch sampler ``(start, count) -> (count, n)``."""
    return mc_mean(lambda s, c: np.sum(sampler(s, c) ** 2, axis=1), samples, chunk, workers)


def kl_sampler(plan: SamplerPlan, seed: int, fastpath: bool = False) -> BatchSampler:
    """Batch sampler drawing the coefficients of sample ``j`` from stream ``(seed, j)``."""
    m, d = plan.m, plan.problem.noise_dim
    run = sample_normal_fastpath_batch if fastpath else sample_batch

    def draw(start: int, count: int) -> np.ndarray:
        return run(plan, standard_normals(seed, start, count, m, d))

    return draw


def stepping_sampler(plan: SteppingPlan, seed: int) -> BatchSampler:
    def draw(start: int, count: int) -> np.ndarray:
        return step_paths(plan, seed, start, count)

    return draw
