"""Run metrics: per-step records, per-replication minima, aggregates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..special import normal_cdf


def true_content_gaussian(center: float, threshold: float,
                          mu: float = 0.0, sigma: float = 1.0) -> float:
    """Probability content of {z: |z - center| <= threshold} under N(mu, sigma^2)."""
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    if math.isinf(threshold):
        return 1.0
    hi = (center + threshold - mu) / sigma
    lo = (center - threshold - mu) / sigma
    return float(normal_cdf(hi) - normal_cdf(lo))


def gaussian_content_series(center, thresholds: np.ndarray,
                            mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Vectorized true_content_gaussian; infinite thresholds give content 1."""
    q = np.asarray(thresholds, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    m = np.asarray(mu, dtype=np.float64)
    finite = np.isfinite(q)
    qf = np.where(finite, q, 0.0)
    content = normal_cdf((c + qf - m) / sigma) - normal_cdf((c - qf - m) / sigma)
    return np.where(finite, content, 1.0)


@dataclass(frozen=True)
class StepRecord:
    """One logged step of one replication of one method."""

    method: str
    replication: int
    t: int
    value: float                 # probability content or evaluated coverage
    width: float
    noninformative: float | None
    threshold: float
    rank: int | None
    offset: float
    epoch: int | None


@dataclass
class RunMetrics:
    """Everything a study reports: logged rows plus per-replication minima."""

    study: str
    config: dict = field(default_factory=dict)
    rows: list[StepRecord] = field(default_factory=list)
    min_content: dict[tuple[str, int], float] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        seen: dict[str, None] = {}
        for (method, _rep) in self.min_content:
            seen.setdefault(method, None)
        for row in self.rows:
            seen.setdefault(row.method, None)
        return list(seen)

    def mins(self, method: str) -> np.ndarray:
        vals = [v for (m, _r), v in sorted(self.min_content.items()) if m == method]
        return np.asarray(vals, dtype=np.float64)

    def min_content_summary(self, method: str) -> tuple[float, float]:
        """Mean and (sample) standard deviation of per-replication min content."""
        vals = self.mins(method)
        if len(vals) == 0:
            raise KeyError(f"no replications recorded for method {method!r}")
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        return float(np.mean(vals)), sd

    def mc_stderr(self, method: str) -> float:
        """Monte Carlo standard error of the mean min content."""
        vals = self.mins(method)
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))

    def simultaneous_fraction(self, method: str, level: float) -> tuple[float, float]:
        """Fraction of replications whose min content stays >= level, with stderr."""
        vals = self.mins(method)
        frac = float(np.mean(vals >= level))
        stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / len(vals))
        return frac, stderr

    def series(self, method: str, rep: int | None = None,
               column: str = "value") -> tuple[np.ndarray, np.ndarray]:
        """(t, column) arrays for one method, one rep (or averaged over reps)."""
        per_t: dict[int, list[float]] = {}
        for row in self.rows:
            if row.method != method:
                continue
            if rep is not None and row.replication != rep:
                continue
            per_t.setdefault(row.t, []).append(getattr(row, column))
        ts = np.array(sorted(per_t), dtype=np.int64)
        vals = np.array([float(np.mean(per_t[t])) for t in ts], dtype=np.float64)
        return ts, vals
