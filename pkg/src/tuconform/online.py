"""Geometric-epoch engine for online anytime-valid prediction sets.

Time is cut into epochs [eta^k, eta^(k+1)). At the first step of epoch k the
live learner is frozen into transformation k, which then serves predictions
for t in [eta^k, eta^(k+2)): each step scores the observation under the two
newest frozen transformations, inserts the scores into their per-window
trackers, computes both thresholds with the online offsets, and reports the
smaller of the two candidate sets before feeding the observation to the live
learner. Scores calibrating window k therefore never include points used to
train transformation k.

The per-window offsets depend on the step only through the calibration
count s = t - (ceil(eta^k) - 1), so each window's ranks and offsets are
precomputed as arrays when the window opens; plans can be shared across
replications through a plan cache.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .calibrators import _check_alpha, _check_level, kl_rank_series, snap_ceil_vec
from .learners import restore_learner, restore_transformation
from .special import snap_ceil, snap_floor
from .tracker import ScoreTracker
from .weights import WeightPmf, parse_weight_spec

ONLINE_METHODS = ("tuc", "tupac")


def epoch_start(eta: float, k: int) -> int:
    """First step scored by transformation k: ceil(eta^k)."""
    return max(1, snap_ceil(float(eta) ** k))


def window_last_step(eta: float, k: int) -> int:
    """Last integer step strictly below eta^(k+2) (end of k's service window)."""
    return snap_ceil(float(eta) ** (k + 2)) - 1


def window_sum_limit(eta: float, k: int) -> int:
    """floor(eta^(k+2)): upper index of the union-bound window sum."""
    return snap_floor(float(eta) ** (k + 2))


def calibration_count(t: int, k: int, eta: float) -> int:
    """s_{t,k} = t - (ceil(eta^k) - 1): scores held by window k at step t."""
    return t - (epoch_start(eta, k) - 1)


# ---------------------------------------------------------------------------
# offsets
# ---------------------------------------------------------------------------

def _window_sum(h: WeightPmf, eta: float, k: int, t_k: int) -> float:
    """Sum of h(s_{t',k}) over t' in (t_k, floor(eta^(k+2))]."""
    shift = epoch_start(eta, k) - 1
    lo = t_k + 1 - shift
    hi = window_sum_limit(eta, k) - shift
    if lo > hi:
        return 0.0
    return h.window_mass(max(lo, 0), hi)


def online_tuc_offset(t: int, k: int, eta: float, alpha: float,
                      h: WeightPmf, g: WeightPmf, t_k: int) -> float:
    """Online anytime-conformal offset u_{t,k}.

    Evaluated verbatim from the closed form, except that the
    log(window/g(k)) term is clamped at zero when the window's h-mass falls
    below g(k): the epoch is then already within budget and the clamp only
    enlarges the offset. Returns +inf when h(s_{t,k}) or g(k) vanishes.
    """
    s = calibration_count(t, k, eta)
    if s < 1:
        raise ValueError(f"step {t} precedes epoch {k} (eta={eta})")
    hs = h.pmf(s)
    gk = g.pmf(k)
    if hs <= 0.0 or gk <= 0.0:
        return math.inf
    win = _window_sum(h, eta, k, t_k)
    ratio = max(0.0, math.log(win) - math.log(gk)) if win > 0.0 else 0.0
    loginv = -math.log(hs)
    a = alpha
    return (
        4.0 * (2.0 * a - 1.0) * loginv / (3.0 * (s + 3))
        + math.sqrt(2.0 * a * (1.0 - a) / (s + 2))
        * (math.sqrt(loginv) + math.sqrt(ratio) + math.sqrt(math.pi) / 2.0)
    )


def online_tupac_offset(t: int, k: int, eta: float, alpha: float, delta: float,
                        h: WeightPmf, g: WeightPmf, t_k: int) -> float:
    """Online anytime-PAC offset u_{t,k} = log(window/(delta g(k) h(s)))/(s+1).

    May be negative when the epoch is over-budgeted; the KL inversion then
    reduces to the plain ceiling rank. +inf when h(s_{t,k}) or g(k)
    vanishes.
    """
    s = calibration_count(t, k, eta)
    if s < 1:
        raise ValueError(f"step {t} precedes epoch {k} (eta={eta})")
    delta = _check_level("delta", delta)
    hs = h.pmf(s)
    gk = g.pmf(k)
    if hs <= 0.0 or gk <= 0.0:
        return math.inf
    win = _window_sum(h, eta, k, t_k)
    log_win = math.log(win) if win > 0.0 else -math.inf
    return (log_win - math.log(delta) - math.log(gk) - math.log(hs)) / (s + 1)


def _online_offsets_vec(method: str, s: np.ndarray, h_vals: np.ndarray, win: float,
                        gk: float, alpha: float, delta: float | None) -> np.ndarray:
    """Vector of u_{t,k} over a window, indexed by s; +inf where h vanishes."""
    positive = h_vals > 0.0
    sf = s.astype(np.float64)
    with np.errstate(divide="ignore"):
        loginv = -np.log(h_vals)
    if method == "tuc":
        ratio = max(0.0, math.log(win) - math.log(gk)) if win > 0.0 else 0.0
        a = alpha
        out = (
            4.0 * (2.0 * a - 1.0) * loginv / (3.0 * (sf + 3))
            + np.sqrt(2.0 * a * (1.0 - a) / (sf + 2))
            * (np.sqrt(loginv) + math.sqrt(ratio) + math.sqrt(math.pi) / 2.0)
        )
    else:
        log_win = math.log(win) if win > 0.0 else -math.inf
        out = (log_win - math.log(delta) - math.log(gk) + np.where(positive, loginv, 0.0)) / (sf + 1)
    return np.where(positive, out, math.inf)


def _online_infeasible(method: str, s: np.ndarray, us: np.ndarray, alpha: float,
                       positive: np.ndarray) -> np.ndarray:
    """Positive-weight steps whose rank cannot sit inside the window sample."""
    sf = s.astype(np.float64)
    if method == "tuc":
        finite_ok = np.isfinite(us) & (us >= 0.0)
        levels = np.where(finite_ok, (sf + 1.0) * (1.0 - alpha + us), 0.0)
        ranks = snap_ceil_vec(levels)
        return positive & (~finite_ok | (ranks > s))
    ceiling = snap_ceil_vec((1.0 - alpha) * (sf + 1.0))
    kl_at_max = _kl_vec(1.0 - alpha, sf / (sf + 1.0))
    return positive & ((ceiling > s) | ((us > 0.0) & (kl_at_max < us)))


def _kl_vec(x: float, p: np.ndarray) -> np.ndarray:
    d = p - x
    return p * np.log1p(d / x) + (1.0 - p) * np.log1p(-d / (1.0 - x))


# ---------------------------------------------------------------------------
# per-window plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowPlan:
    """Precomputed per-window calibration schedule.

    ``ranks[s-1]`` / ``offsets[s-1]`` give the rank (or -1 for an infinite
    threshold) and offset at calibration count s. Data-independent, so one
    plan serves every replication.
    """

    k: int
    start: int
    last_step: int
    t_k: int
    ranks: np.ndarray
    offsets: np.ndarray


def build_window_plan(method: str, k: int, eta: float, alpha: float,
                      delta: float | None, h: WeightPmf, g: WeightPmf) -> WindowPlan:
    """Resolve t_k by fixed point over the finite window and tabulate ranks.

    The window sum in the offsets depends on t_k, which is itself defined by
    feasibility of the offsets, so iterate; the window is finite and every
    iterate is exhaustively checked. A whole-window infeasibility is legal
    (all thresholds +inf in that window).
    """
    method = str(method).lower()
    if method not in ONLINE_METHODS:
        raise ValueError(f"unknown online method {method!r}")
    alpha = _check_alpha(method, alpha)
    if method == "tupac":
        delta = _check_level("delta", delta)
    start = epoch_start(eta, k)
    last = window_last_step(eta, k)
    n = last - start + 1
    s = np.arange(1, n + 1, dtype=np.int64)
    gk = g.pmf(k)
    if gk <= 0.0:
        return WindowPlan(k, start, last, last,
                          np.full(n, -1, dtype=np.int64),
                          np.full(n, math.inf, dtype=np.float64))
    h_vals = np.asarray(h.pmf_range(n + 1)[1:])
    positive = h_vals > 0.0

    def offsets_at(tau: int) -> np.ndarray:
        win = _window_sum(h, eta, k, tau)
        return _online_offsets_vec(method, s, h_vals, win, gk, alpha, delta)

    def max_infeasible(tau: int) -> int:
        bad = _online_infeasible(method, s, offsets_at(tau), alpha, positive)
        idx = np.nonzero(bad)[0]
        return start - 1 + (int(idx[-1]) + 1) if len(idx) else start - 1

    # The map tau -> max_infeasible(tau) is not monotone (a larger tau
    # shrinks the window sum, which shrinks the offsets), so the iteration
    # can land on a short cycle; resolve one by scanning the cycle's range
    # for the smallest self-consistent threshold.
    tau = start - 1
    seen: list[int] = []
    for _ in range(64):
        nxt = max_infeasible(tau)
        if nxt == tau:
            break
        if nxt in seen:
            members = seen[seen.index(nxt):] + [tau, nxt]
            tau = next(c for c in range(min(members), max(members) + 1)
                       if max_infeasible(c) <= c)
            break
        seen.append(tau)
        tau = nxt
    else:
        raise RuntimeError(f"t_k fixed point for epoch {k} did not settle")
    t_k = tau
    us = offsets_at(t_k)
    sf = s.astype(np.float64)
    if method == "tuc":
        finite_ok = np.isfinite(us) & (us >= 0.0)
        levels = np.where(finite_ok, (sf + 1.0) * (1.0 - alpha + us), 0.0)
        ranks = snap_ceil_vec(levels)
        ranks[~finite_ok] = -1
    else:
        ranks = kl_rank_series(alpha, s, us)
    ranks = np.where((ranks >= 1) & (ranks <= s), ranks, -1)
    gate = t_k - start + 1  # t <= t_k  <=>  s <= gate
    if gate > 0:
        ranks[:min(gate, n)] = -1
    return WindowPlan(k, start, last, t_k, ranks, us)


def compute_tk(k: int, eta: float, alpha: float, delta: float | None,
               h: WeightPmf, g: WeightPmf, method: str) -> int:
    """Finiteness threshold of epoch k's window (see build_window_plan)."""
    return build_window_plan(method, k, eta, alpha, delta, h, g).t_k


# ---------------------------------------------------------------------------
# set descriptors and sizes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalSet:
    """{z: lo <= z <= hi}; covers location, regression and CQR intervals."""

    lo: float
    hi: float


@dataclass(frozen=True)
class ScoreSublevelSet:
    """{z: score(z) <= threshold} for raw-score families; sized by threshold."""

    threshold: float


@dataclass(frozen=True)
class LabelSet:
    """Classification prediction set: the labels whose residual fits."""

    labels: tuple[int, ...]


def set_size(descriptor) -> float:
    """Size of a prediction-set descriptor.

    Interval families measure geometric length (2q for residual intervals,
    band width plus 2q for CQR); label sets count their labels; raw-score
    sublevel sets use the threshold itself. Infinite thresholds give +inf.
    """
    if isinstance(descriptor, IntervalSet):
        return descriptor.hi - descriptor.lo
    if isinstance(descriptor, ScoreSublevelSet):
        return descriptor.threshold
    if isinstance(descriptor, LabelSet):
        return float(len(descriptor.labels))
    raise TypeError(f"unknown set descriptor {descriptor!r}")


def _describe(transformation, threshold: float):
    if hasattr(transformation, "interval"):
        lo, hi = transformation.interval(threshold)
        return IntervalSet(lo, hi)
    if transformation.kind == "identity":
        return ScoreSublevelSet(threshold)
    return None


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CandidateReport:
    """One window's threshold at the current step."""

    epoch: int
    s: int
    threshold: float
    rank: int | None
    offset: float

    @property
    def is_finite(self) -> bool:
        return self.rank is not None


@dataclass(frozen=True)
class EngineReport:
    """Per-step engine output: both candidates plus the reported (smaller) set."""

    step: int
    epoch: int
    candidates: tuple[CandidateReport, ...]
    chosen: int
    descriptor: object | None

    @property
    def report(self) -> CandidateReport:
        return self.candidates[self.chosen]

    @property
    def threshold(self) -> float:
        return self.report.threshold

    @property
    def rank(self) -> int | None:
        return self.report.rank

    @property
    def offset(self) -> float:
        return self.report.offset

    @property
    def transformation_epoch(self) -> int:
        return self.report.epoch

    @property
    def is_finite(self) -> bool:
        return self.report.is_finite


class _Window:
    __slots__ = ("k", "transformation", "tracker", "plan")

    def __init__(self, k: int, transformation, plan: WindowPlan) -> None:
        self.k = k
        self.transformation = transformation
        self.tracker = ScoreTracker()
        self.plan = plan

    def candidate(self, t: int) -> CandidateReport:
        s = t - self.plan.start + 1
        rank = int(self.plan.ranks[s - 1])
        offset = float(self.plan.offsets[s - 1])
        if rank >= 1:
            threshold = self.tracker.select(rank)
            return CandidateReport(self.k, s, threshold, rank, offset)
        return CandidateReport(self.k, s, math.inf, None, offset)


SNAPSHOT_FORMAT = "tuconform-epoch-engine"
SNAPSHOT_VERSION = 1


class EpochEngine:
    """Online TUC/TUPAC prediction over a stream, one observation per step.

    ``size_of`` ranks the two candidate sets; the default compares
    thresholds, which matches geometric size for the residual families
    (sizes 2q) and is a documented proxy for label sets. Any choice
    preserves validity; only set size is affected.
    """

    def __init__(self, learner, method: str, alpha: float, delta: float | None = None,
                 h: WeightPmf | None = None, g: WeightPmf | None = None,
                 eta: float = 2.0, size_of=None, plan_cache: dict | None = None) -> None:
        method = str(method).lower()
        if method not in ONLINE_METHODS:
            raise ValueError(f"online method must be one of {ONLINE_METHODS}, got {method!r}")
        if not eta > 1.0:
            raise ValueError(f"eta must exceed 1, got {eta}")
        if h is None or g is None:
            raise ValueError("the online engine requires both weight functions h and g")
        self.method = method
        self.alpha = _check_alpha(method, alpha)
        self.delta = _check_level("delta", delta) if delta is not None else None
        if method == "tupac" and self.delta is None:
            raise ValueError("online tupac requires delta")
        self.h = h
        self.g = g
        self.eta = float(eta)
        self.learner = learner
        self._size_of = size_of if size_of is not None else (lambda cand: cand.threshold)
        self._plans = plan_cache if plan_cache is not None else {}
        self._t = 0
        self._k = 0
        self._prev: _Window | None = None
        self._curr = _Window(0, learner.freeze(), self._plan_for(0))
        self._boundary = epoch_start(self.eta, 1)

    # -- bookkeeping ---------------------------------------------------------

    @property
    def t(self) -> int:
        return self._t

    @property
    def k(self) -> int:
        return self._k

    @property
    def active_windows(self) -> tuple[_Window, ...]:
        if self._prev is None:
            return (self._curr,)
        return (self._prev, self._curr)

    def _plan_for(self, k: int) -> WindowPlan:
        plan = self._plans.get(k)
        if plan is None:
            plan = build_window_plan(self.method, k, self.eta, self.alpha,
                                     self.delta, self.h, self.g)
            self._plans[k] = plan
        return plan

    # -- the step --------------------------------------------------------------

    def step(self, z) -> EngineReport:
        """Advance one observation and report the smaller candidate set."""
        t = self._t + 1
        if t >= self._boundary:
            self._k += 1
            frozen = self.learner.freeze()
            self._prev = self._curr
            self._curr = _Window(self._k, frozen, self._plan_for(self._k))
            self._boundary = epoch_start(self.eta, self._k + 1)
        self._t = t
        windows = self.active_windows
        candidates = []
        for w in windows:
            w.tracker.insert(w.transformation.score(z))
            candidates.append(w.candidate(t))
        sizes = [self._size_of(c) for c in candidates]
        chosen = 0
        for i in range(1, len(sizes)):
            if sizes[i] < sizes[chosen]:
                chosen = i
        best = candidates[chosen]
        descriptor = _describe(windows[chosen].transformation, best.threshold)
        self.learner.update(z)
        return EngineReport(step=t, epoch=self._k, candidates=tuple(candidates),
                            chosen=chosen, descriptor=descriptor)

    # -- pause/resume ------------------------------------------------------------

    def snapshot(self) -> dict:
        """Versioned, JSON-able state: epoch, learner, windows, tracker contents."""
        windows = []
        for w in self.active_windows:
            windows.append({
                "k": w.k,
                "transformation": {"kind": w.transformation.kind,
                                   "state": w.transformation.state_dict()},
                "scores": w.tracker.values(),
            })
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "t": self._t,
            "k": self._k,
            "method": self.method,
            "alpha": self.alpha,
            "delta": self.delta,
            "eta": self.eta,
            "h": self.h.spec_string(),
            "g": self.g.spec_string(),
            "learner": {"kind": self.learner.kind, "state": self.learner.state_dict()},
            "windows": windows,
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True)

    @classmethod
    def from_snapshot(cls, data: dict, size_of=None, plan_cache: dict | None = None) -> "EpochEngine":
        if data.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"not an engine snapshot: format={data.get('format')!r}")
        if data.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {data.get('version')!r}")
        learner = restore_learner(data["learner"]["kind"], data["learner"]["state"])
        engine = cls(learner, data["method"], data["alpha"], data.get("delta"),
                     h=parse_weight_spec(data["h"]), g=parse_weight_spec(data["g"]),
                     eta=data["eta"], size_of=size_of, plan_cache=plan_cache)
        engine._t = int(data["t"])
        engine._k = int(data["k"])
        engine._boundary = epoch_start(engine.eta, engine._k + 1)
        restored = []
        for wdata in data["windows"]:
            trans = restore_transformation(wdata["transformation"]["kind"],
                                           wdata["transformation"]["state"])
            w = _Window(int(wdata["k"]), trans, engine._plan_for(int(wdata["k"])))
            for sc in wdata["scores"]:
                w.tracker.insert(sc)
            restored.append(w)
        if len(restored) == 1:
            engine._prev, engine._curr = None, restored[0]
        elif len(restored) == 2:
            engine._prev, engine._curr = restored
        else:
            raise ValueError(f"snapshot must hold 1 or 2 windows, got {len(restored)}")
        return engine

    @classmethod
    def from_json(cls, text: str, size_of=None, plan_cache: dict | None = None) -> "EpochEngine":
        return cls.from_snapshot(json.loads(text), size_of=size_of, plan_cache=plan_cache)
