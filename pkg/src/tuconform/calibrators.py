"""Sequential quantile rules for fixed-transformation prediction sets.

Four methods over a stream of nonconformity scores:

* ``split``  -- the plain split-conformal sample quantile, valid at each
  fixed t but not time-uniformly.
* ``cs``     -- a closed-form confidence-sequence offset on the empirical
  CDF level, giving a time-uniform PAC guarantee.
* ``tuc``    -- a weight-function union bound giving time-uniform expected
  coverage (anytime-valid conformal).
* ``tupac``  -- a weight-function union bound through the Bernoulli KL
  divergence, giving the time-uniform PAC guarantee.

Each method maps the step index t to an integer rank; the reported
threshold is that order statistic of the scores seen so far, or +inf while
the rank does not fit inside the sample (the "trivial set" region below the
finiteness threshold t0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import (
    bernoulli_kl,
    invert_kl_rank,
    iterated_log,
    snap_ceil,
)
from .tracker import ScoreTracker
from .weights import WeightPmf

METHODS = ("split", "cs", "tuc", "tupac")

_SNAP_RTOL = 1e-12


class InfeasibleCalibrationError(RuntimeError):
    """No finiteness threshold exists below the configured scan horizon."""


def _check_level(name: str, value: float) -> float:
    v = float(value)
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return v


def _check_alpha(method: str, alpha: float) -> float:
    a = _check_level("alpha", alpha)
    if method in ("tuc", "tupac") and a >= 0.5:
        # The union-bound offsets are derived for alpha below one half; the
        # source derivation is ambiguous about the other range, so reject it.
        raise ValueError(f"{method} requires alpha in (0, 0.5), got {alpha}")
    return a


def snap_ceil_vec(values: np.ndarray) -> np.ndarray:
    """Vectorized float-safe ceiling (see special.snap_ceil)."""
    v = np.asarray(values, dtype=np.float64)
    nearest = np.rint(v)
    snapped = np.abs(v - nearest) <= _SNAP_RTOL * np.maximum(1.0, np.abs(v))
    return np.where(snapped, nearest, np.ceil(v)).astype(np.int64)


# ---------------------------------------------------------------------------
# offsets u_t
# ---------------------------------------------------------------------------

def cs_offset(t: int, alpha: float, delta: float) -> float:
    """Closed-form confidence-sequence offset.

    ell_t = (1.4 log log(2.1 t) + log(10/delta)) / t and
    u_t = 1.5 sqrt(alpha (1-alpha) ell_t) + 0.8 ell_t. Defined for all
    t >= 1 since 2.1 > e makes the iterated log positive.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    alpha = _check_level("alpha", alpha)
    delta = _check_level("delta", delta)
    ell = (1.4 * iterated_log(2.1 * t) + math.log(10.0 / delta)) / t
    return 1.5 * math.sqrt(alpha * (1.0 - alpha) * ell) + 0.8 * ell


def tuc_offset(t: int, alpha: float, h: WeightPmf, t0: int) -> float:
    """Anytime-conformal offset at step t.

    Three-term closed form; the first term is negative for alpha < 0.5 and
    is deliberately not clamped. Returns +inf when h(t) = 0, which makes
    the step's set trivial.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    ht = h.pmf(t)
    if ht <= 0.0:
        return math.inf
    loginv = -math.log(ht)
    tail = h.tail_mass(t0)
    a = alpha
    return (
        4.0 * (2.0 * a - 1.0) * loginv / (3.0 * (t + 3))
        + math.sqrt(2.0 * a * (1.0 - a) * loginv / (t + 2))
        + 0.5 * math.sqrt(2.0 * math.pi * a * (1.0 - a) / (t + 2)) * tail
    )


def tupac_offset(t: int, alpha: float, delta: float, h: WeightPmf, t0: int) -> float:
    """Anytime-PAC offset at step t, consumed by the KL rank inversion.

    u_t = (log((1/delta)(1 - P(t0))) - log h(t)) / (t + 1); +inf when
    h(t) = 0.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    delta = _check_level("delta", delta)
    ht = h.pmf(t)
    if ht <= 0.0:
        return math.inf
    tail = h.tail_mass(t0)
    log_tail = math.log(tail) if tail > 0.0 else -math.inf
    return (log_tail - math.log(delta) - math.log(ht)) / (t + 1)


# vectorized twins used by the finiteness scan and the experiment fast path

def _cs_offsets_vec(ts: np.ndarray, alpha: float, delta: float) -> np.ndarray:
    ell = (1.4 * np.log(np.log(2.1 * ts)) + math.log(10.0 / delta)) / ts
    return 1.5 * np.sqrt(alpha * (1.0 - alpha) * ell) + 0.8 * ell


def _tuc_offsets_vec(ts: np.ndarray, alpha: float, h_vals: np.ndarray, tail: float) -> np.ndarray:
    # zero-weight slots give -inf + inf = nan here; callers mask them
    with np.errstate(divide="ignore", invalid="ignore"):
        loginv = -np.log(h_vals)
        a = alpha
        return (
            4.0 * (2.0 * a - 1.0) * loginv / (3.0 * (ts + 3))
            + np.sqrt(2.0 * a * (1.0 - a) * loginv / (ts + 2))
            + 0.5 * np.sqrt(2.0 * math.pi * a * (1.0 - a) / (ts + 2)) * tail
        )


def _tupac_offsets_vec(ts: np.ndarray, alpha: float, delta: float,
                       h_vals: np.ndarray, tail: float) -> np.ndarray:
    log_tail = math.log(tail) if tail > 0.0 else -math.inf
    with np.errstate(divide="ignore"):
        log_h = np.log(h_vals)
    return (log_tail - math.log(delta) - log_h) / (ts + 1)


def _bernoulli_kl_vec(x: float, p: np.ndarray) -> np.ndarray:
    d = p - x
    return p * np.log1p(d / x) + (1.0 - p) * np.log1p(-d / (1.0 - x))


def kl_rank_series(alpha: float, ts: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Vectorized KL rank inversion; -1 marks the infinite-rank sentinel.

    Simultaneous binary search over all steps, with a final vectorized
    confirmation that mirrors special.invert_kl_rank.
    """
    ts = np.asarray(ts, dtype=np.int64)
    us = np.asarray(us, dtype=np.float64)
    target = 1.0 - alpha
    denom = (ts + 1).astype(np.float64)
    lo = snap_ceil_vec(target * denom)
    out = np.full(ts.shape, -1, dtype=np.int64)
    ceiling_ok = lo <= ts
    trivial_u = (us <= 0.0) & ceiling_ok
    out[trivial_u] = lo[trivial_u]
    active = ceiling_ok & (us > 0.0) & np.isfinite(us)
    if not np.any(active):
        return out
    feasible = np.zeros(ts.shape, dtype=bool)
    feasible[active] = _bernoulli_kl_vec(target, ts[active] / denom[active]) >= us[active]
    search = active & feasible
    lo_s = lo[search].copy()
    hi_s = ts[search].copy()
    d_s = denom[search]
    u_s = us[search]
    while np.any(lo_s < hi_s):
        mid = (lo_s + hi_s) // 2
        ok = _bernoulli_kl_vec(target, mid / d_s) >= u_s
        hi_s = np.where(ok, mid, hi_s)
        lo_s = np.where(ok, lo_s, np.minimum(mid + 1, hi_s))
    if np.any(_bernoulli_kl_vec(target, lo_s / d_s) < u_s):
        raise AssertionError("vectorized KL rank inversion failed confirmation")
    out[search] = lo_s
    return out


# ---------------------------------------------------------------------------
# finiteness threshold t0
# ---------------------------------------------------------------------------

def _infeasible_mask(method: str, ts: np.ndarray, alpha: float, delta: float | None,
                     h_vals: np.ndarray | None, tail: float) -> np.ndarray:
    """Steps whose rank cannot sit inside the sample (h-positive steps only).

    Zero-weight steps are excluded here: they always report an infinite
    threshold and do not constrain t0.
    """
    tsf = ts.astype(np.float64)
    if method == "split":
        ranks = snap_ceil_vec((1.0 - alpha) * (tsf + 1.0))
        return ranks > ts
    if method == "cs":
        us = _cs_offsets_vec(tsf, alpha, delta)
        ranks = snap_ceil_vec(tsf * (1.0 - alpha + us))
        return ranks > ts
    positive = h_vals > 0.0
    if method == "tuc":
        us = _tuc_offsets_vec(tsf, alpha, h_vals, tail)
        ranks = snap_ceil_vec(np.where(positive, (tsf + 1.0) * (1.0 - alpha + us), 0.0))
        return positive & ((us < 0.0) | (ranks > ts))
    if method == "tupac":
        us = _tupac_offsets_vec(tsf, alpha, delta, h_vals, tail)
        ceiling = snap_ceil_vec((1.0 - alpha) * (tsf + 1.0))
        with np.errstate(invalid="ignore"):
            kl_at_max = _bernoulli_kl_vec(1.0 - alpha, tsf / (tsf + 1.0))
        no_rank = (ceiling > ts) | ((us > 0.0) & (kl_at_max < us))
        return positive & no_rank
    raise ValueError(f"unknown method {method!r}")


def compute_t0(method: str, alpha: float, delta: float | None = None,
               h: WeightPmf | None = None, scan_horizon: int = 1_000_000) -> int:
    """Finiteness threshold: thresholds are reported as +inf for t <= t0.

    For the weight-function methods the offset's tail factor depends on t0
    itself, so the threshold is resolved by fixed-point iteration on the
    scanned feasibility mask; the iteration settles in a couple of rounds
    for any smooth weight function, and a cycle (never observed) resolves to
    its largest member, which remains self-consistent and conservative.

    The "for all t > t0" clause is verified explicitly up to
    ``scan_horizon``, which callers set to ten times the run horizon;
    beyond it the offsets decay and the constraint only relaxes.

    Raises:
        InfeasibleCalibrationError: if no step at or below the horizon
            yields a finite threshold (pathological weight functions).
    """
    method = str(method).lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    alpha = _check_alpha(method, alpha)
    if method == "split":
        # rank fits iff (1-alpha)(t+1) <= t, i.e. t >= (1-alpha)/alpha
        t0 = 0
        t = 1
        while snap_ceil((1.0 - alpha) * (t + 1)) > t:
            t0 = t
            t += 1
        return t0
    ts = np.arange(1, scan_horizon + 1, dtype=np.int64)
    if method == "cs":
        delta = _check_level("delta", delta)
        bad = _infeasible_mask("cs", ts, alpha, delta, None, 0.0)
        return _threshold_from_mask(method, bad, None, scan_horizon)
    if h is None:
        raise ValueError(f"method {method!r} requires a weight function h")
    if method == "tupac":
        delta = _check_level("delta", delta)
    h_vals = np.asarray(h.pmf_range(scan_horizon + 1)[1:])

    def threshold_at(tau: int) -> int:
        bad = _infeasible_mask(method, ts, alpha, delta, h_vals, h.tail_mass(tau))
        return _threshold_from_mask(method, bad, h_vals, scan_horizon)

    # tau -> threshold_at(tau) need not be monotone (the tail factor shrinks
    # as tau grows); a cycle is resolved by scanning its range for the
    # smallest self-consistent threshold.
    t0 = 0
    seen: list[int] = []
    for _ in range(64):
        nxt = threshold_at(t0)
        if nxt == t0:
            return t0
        if nxt in seen:
            members = seen[seen.index(nxt):] + [t0, nxt]
            return next(c for c in range(min(members), max(members) + 1)
                        if threshold_at(c) <= c)
        seen.append(t0)
        t0 = nxt
    raise InfeasibleCalibrationError(
        f"t0 fixed-point iteration for {method} did not settle within 64 rounds")


def _threshold_from_mask(method: str, bad: np.ndarray, h_vals: np.ndarray | None,
                         scan_horizon: int) -> int:
    idx = np.nonzero(bad)[0]
    if len(idx) == 0:
        return 0
    last_bad = int(idx[-1]) + 1  # ts are 1-based
    if h_vals is not None:
        positive_after = np.nonzero(h_vals[last_bad:] > 0.0)[0]
        if len(positive_after) == 0:
            raise InfeasibleCalibrationError(
                f"{method}: no finite threshold below horizon {scan_horizon}; "
                f"last positive-weight step is infeasible")
    elif last_bad >= scan_horizon:
        raise InfeasibleCalibrationError(
            f"{method}: still infeasible at scan horizon {scan_horizon}")
    return last_bad


# ---------------------------------------------------------------------------
# per-step rank rules and the sequential calibrator
# ---------------------------------------------------------------------------

def method_rank(method: str, t: int, alpha: float, offset: float) -> int | None:
    """Integer rank for the step, or None when the set is trivial.

    split: ceil((1-alpha)(t+1));  cs: ceil(t(1-alpha+u));
    tuc: ceil((t+1)(1-alpha+u));  tupac: KL inversion.
    """
    if method == "split":
        rank = snap_ceil((1.0 - alpha) * (t + 1))
    elif method == "cs":
        if not math.isfinite(offset):
            return None
        rank = snap_ceil(t * (1.0 - alpha + offset))
    elif method == "tuc":
        if not math.isfinite(offset) or offset < 0.0:
            return None
        rank = snap_ceil((t + 1) * (1.0 - alpha + offset))
    elif method == "tupac":
        if not math.isfinite(offset) and offset > 0:
            return None
        return invert_kl_rank(alpha, t, offset)
    else:
        raise ValueError(f"unknown method {method!r}")
    if rank > t or rank < 1:
        return None
    return rank


@dataclass(frozen=True)
class PredictionReport:
    """Per-step output of a calibrator.

    ``threshold`` is +inf (whole space) whenever ``rank`` is None; otherwise
    it equals the rank-th order statistic of the scores seen so far.
    """

    step: int
    threshold: float
    rank: int | None
    offset: float
    method: str

    @property
    def is_finite(self) -> bool:
        return self.rank is not None


class SequentialCalibrator:
    """Streaming calibrator: insert one score per step, read off a threshold.

    The finiteness threshold t0 is precomputed over ten times ``horizon``;
    steps with t <= t0 (and any step whose weight vanishes) report +inf.
    One calibrator per stream; replications run on independent instances.
    """

    def __init__(self, method: str, alpha: float, delta: float | None = None,
                 h: WeightPmf | None = None, horizon: int = 100_000,
                 scan_factor: int = 10) -> None:
        method = str(method).lower()
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.alpha = _check_alpha(method, alpha)
        self.delta = _check_level("delta", delta) if delta is not None else None
        if method in ("cs", "tupac") and self.delta is None:
            raise ValueError(f"method {method!r} requires delta")
        if method in ("tuc", "tupac") and h is None:
            raise ValueError(f"method {method!r} requires a weight function h")
        self.h = h
        self.scan_horizon = int(horizon) * int(scan_factor)
        self.t0 = compute_t0(method, self.alpha, self.delta, h,
                             scan_horizon=self.scan_horizon)
        self.tracker = ScoreTracker()

    @property
    def t(self) -> int:
        return self.tracker.count

    def offset(self, t: int) -> float:
        """The method's u_t (0 for split; +inf where the weight vanishes)."""
        if self.method == "split":
            return 0.0
        if self.method == "cs":
            return cs_offset(t, self.alpha, self.delta)
        if self.method == "tuc":
            return tuc_offset(t, self.alpha, self.h, self.t0)
        return tupac_offset(t, self.alpha, self.delta, self.h, self.t0)

    def step(self, score: float) -> PredictionReport:
        """Insert a score, then report the current prediction-set threshold."""
        self.tracker.insert(score)
        t = self.tracker.count
        u = self.offset(t)
        rank: int | None = None
        if t > self.t0:
            rank = method_rank(self.method, t, self.alpha, u)
        threshold = self.tracker.select(rank) if rank is not None else math.inf
        return PredictionReport(step=t, threshold=threshold, rank=rank,
                                offset=u, method=self.method)


def offset_series(method: str, horizon: int, alpha: float, delta: float | None = None,
                  h: WeightPmf | None = None, t0: int | None = None) -> np.ndarray:
    """u_t for t = 1..horizon as an array (zeros for split, +inf at h(t)=0)."""
    method = str(method).lower()
    ts = np.arange(1, horizon + 1, dtype=np.int64)
    tsf = ts.astype(np.float64)
    if method == "split":
        return np.zeros(horizon, dtype=np.float64)
    if method == "cs":
        return _cs_offsets_vec(tsf, alpha, delta)
    if t0 is None:
        raise ValueError("tuc/tupac offset series require t0")
    h_vals = np.asarray(h.pmf_range(horizon + 1)[1:])
    tail = h.tail_mass(t0)
    if method == "tuc":
        out = _tuc_offsets_vec(tsf, alpha, h_vals, tail)
    elif method == "tupac":
        out = _tupac_offsets_vec(tsf, alpha, delta, h_vals, tail)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.where(h_vals > 0.0, out, math.inf)


def rank_series(method: str, horizon: int, alpha: float, delta: float | None = None,
                h: WeightPmf | None = None, t0: int | None = None) -> np.ndarray:
    """Per-step integer ranks for t = 1..horizon; -1 marks infinite thresholds.

    Data-independent, so one series drives every replication of a study.
    ``t0`` defaults to a fresh ``compute_t0`` over ten times the horizon.
    """
    method = str(method).lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    alpha = _check_alpha(method, alpha)
    if t0 is None:
        t0 = compute_t0(method, alpha, delta, h, scan_horizon=10 * int(horizon))
    ts = np.arange(1, horizon + 1, dtype=np.int64)
    tsf = ts.astype(np.float64)
    us = offset_series(method, horizon, alpha, delta, h, t0)
    if method == "split":
        ranks = snap_ceil_vec((1.0 - alpha) * (tsf + 1.0))
    elif method == "cs":
        ranks = snap_ceil_vec(tsf * (1.0 - alpha + us))
    elif method == "tuc":
        with np.errstate(invalid="ignore"):
            levels = (tsf + 1.0) * (1.0 - alpha + us)
        ranks = snap_ceil_vec(np.where(np.isfinite(us) & (us >= 0.0), levels, 0.0))
        ranks[~(np.isfinite(us) & (us >= 0.0))] = -1
    else:
        ranks = kl_rank_series(alpha, ts, us)
    ranks = np.where((ranks >= 1) & (ranks <= ts), ranks, -1)
    ranks[ts <= t0] = -1
    return ranks
