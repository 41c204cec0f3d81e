"""Synthetic data streams and reproducible per-replication RNG."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


@dataclass(frozen=True)
class StreamSpec:
    """What to simulate: identical spec + seed always yields identical streams.

    ``kind`` is one of gaussian-location, linear-regression, location-shift,
    spambase, uniform-scores; stream-shape knobs (dimension, shift point,
    noise, holdout size, ...) live in ``params``.
    """

    kind: str
    horizon: int
    reps: int
    seed: int
    params: Mapping = field(default_factory=dict)

    def param(self, name: str, default=None):
        return self.params.get(name, default)


def rng_for_rep(seed: int, rep: int) -> np.random.Generator:
    """Independent substream for replication ``rep`` derived from the base seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))


def gaussian_location_stream(rng: np.random.Generator, horizon: int,
                             holdout: int = 100) -> tuple[float, np.ndarray]:
    """Held-out mean estimate plus an IID standard-normal stream."""
    center = float(np.mean(rng.standard_normal(holdout)))
    return center, rng.standard_normal(horizon)


def uniform_scores_stream(rng: np.random.Generator, horizon: int) -> np.ndarray:
    return rng.random(horizon)


def location_shift_stream(rng: np.random.Generator, horizon: int,
                          shift_at: int | None, post_mean: float = 1.0,
                          post_sigma: float = 1.0) -> np.ndarray:
    """Standard normal up to shift_at, then N(post_mean, post_sigma^2)."""
    z = rng.standard_normal(horizon)
    if shift_at is not None and shift_at < horizon:
        tail = horizon - shift_at
        z[shift_at:] = post_mean + post_sigma * rng.standard_normal(tail)
    return z


def linear_regression_data(rng: np.random.Generator, n: int, dim: int,
                           noise: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Covariates N(0, I), a linear response with N(0, noise^2) errors.

    Returns (X, y, beta); the true coefficients are drawn once per stream.
    """
    beta = rng.standard_normal(dim)
    X = rng.standard_normal((n, dim))
    y = X @ beta + noise * rng.standard_normal(n)
    return X, y, beta
