"""Experiment drivers reproducing the simulation and spam-detection studies.

Each ``run_*`` function streams synthetic or ingested data through the
calibrators or the epoch engine, evaluates true probability content or
held-out coverage, and returns a ``RunMetrics`` with strided per-step rows
plus exact per-replication minima. Replications use independent seeded RNG
substreams and can run across worker processes; aggregation is a
deterministic reduction independent of completion order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..calibrators import compute_t0, offset_series, rank_series
from ..learners import IdentityLearner, SGDLogisticClassifier
from ..online import EpochEngine, build_window_plan, epoch_start
from ..special import normal_quantile
from ..weights import WeightPmf, lognormal_weights
from .fast import running_thresholds
from .metrics import RunMetrics, StepRecord, gaussian_content_series
from .spambase import fit_standardizer, load_spambase, standardize
from .streams import (
    StreamSpec,
    gaussian_location_stream,
    linear_regression_data,
    location_shift_stream,
    rng_for_rep,
    uniform_scores_stream,
)

DEFAULT_METHODS = ("split", "cs", "tuc", "tupac")


def default_h() -> WeightPmf:
    """Step-budget weights used by the simulation studies."""
    return lognormal_weights(11.0, 1.0)


def default_g() -> WeightPmf:
    """Epoch-budget weights used by the online simulation studies."""
    return lognormal_weights(math.log(16.0), 1.0)


def _run_parallel(worker, arg_list, workers: int) -> list:
    if workers <= 1 or len(arg_list) <= 1:
        return [worker(args) for args in arg_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, arg_list))


def _logged_steps(horizon: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return np.arange(stride, horizon + 1, stride, dtype=np.int64)


@dataclass(frozen=True)
class _MethodTable:
    """Data-independent per-step schedule shared by every replication."""

    method: str
    t0: int
    ranks: np.ndarray
    offsets: np.ndarray


def _method_tables(methods, horizon: int, alpha: float, delta: float,
                   h: WeightPmf) -> list[_MethodTable]:
    tables = []
    for method in methods:
        t0 = compute_t0(method, alpha, delta, h, scan_horizon=10 * horizon)
        ranks = rank_series(method, horizon, alpha, delta, h, t0=t0)
        offsets = offset_series(method, horizon, alpha, delta, h, t0=t0)
        tables.append(_MethodTable(method, t0, ranks, offsets))
    return tables


# ---------------------------------------------------------------------------
# gaussian location study (toy stream; true content is known exactly)
# ---------------------------------------------------------------------------

def _gaussian_rep(args):
    rep, seed, horizon, holdout, ranks, logged = args
    rng = rng_for_rep(seed, rep)
    center, z = gaussian_location_stream(rng, horizon, holdout)
    scores = np.abs(z - center)
    thresholds = running_thresholds(scores, ranks)
    content = gaussian_content_series(center, thresholds)
    mins = content.min(axis=1)
    li = logged - 1
    return rep, mins, thresholds[:, li], content[:, li]


def run_gaussian_study(spec: StreamSpec, methods=DEFAULT_METHODS, *,
                       alpha: float = 0.1, delta: float = 0.1,
                       h: WeightPmf | None = None, stride: int = 100,
                       workers: int = 1) -> RunMetrics:
    """Calibrate |z - center| over a standard-normal stream.

    The center is the mean of a held-out sample (100 points by default), so
    the true content of every interval is a known normal integral; each
    replication's minimum content over the whole horizon is recorded
    exactly, with rows logged at the stride.
    """
    if h is None:
        h = default_h()
    horizon, reps = spec.horizon, spec.reps
    holdout = int(spec.param("holdout", 100))
    tables = _method_tables(methods, horizon, alpha, delta, h)
    ranks = np.stack([tb.ranks for tb in tables])
    logged = _logged_steps(horizon, stride)
    results = _run_parallel(
        _gaussian_rep,
        [(rep, spec.seed, horizon, holdout, ranks, logged) for rep in range(reps)],
        workers)
    metrics = RunMetrics(study="gaussian", config={
        "alpha": alpha, "delta": delta, "h": h.spec_string(), "stride": stride,
        "holdout": holdout, "spec": spec.__dict__ | {"params": dict(spec.params)},
    })
    for rep, mins, thr, content in sorted(results):
        for mi, tb in enumerate(tables):
            metrics.min_content[(tb.method, rep)] = float(mins[mi])
            for li, t in enumerate(logged):
                q = float(thr[mi, li])
                rank = int(tb.ranks[t - 1])
                metrics.rows.append(StepRecord(
                    method=tb.method, replication=rep, t=int(t),
                    value=float(content[mi, li]), width=2.0 * q,
                    noninformative=None, threshold=q,
                    rank=rank if rank >= 1 else None,
                    offset=float(tb.offsets[t - 1]), epoch=None))
    return metrics


# ---------------------------------------------------------------------------
# regression study (split into train / calibrate / evaluate thirds)
# ---------------------------------------------------------------------------

def _regression_rep(args):
    rep, seed, part, dim, noise, ranks, logged = args
    rng = rng_for_rep(seed, rep)
    X, y, _beta = linear_regression_data(rng, 3 * part, dim, noise)
    X1, y1 = X[:part], y[:part]
    X2, y2 = X[part:2 * part], y[part:2 * part]
    X3, y3 = X[2 * part:], y[2 * part:]
    design = np.column_stack([X1, np.ones(part)])
    coef, *_ = np.linalg.lstsq(design, y1, rcond=None)
    w_hat, b_hat = coef[:dim], coef[dim]
    scores2 = np.abs(y2 - (X2 @ w_hat + b_hat))
    thresholds = running_thresholds(scores2, ranks)
    eval_scores = np.sort(np.abs(y3 - (X3 @ w_hat + b_hat)))
    li = logged - 1
    thr_logged = thresholds[:, li]
    coverage = np.searchsorted(eval_scores, thr_logged, side="right") / len(eval_scores)
    return rep, thr_logged, coverage


def run_regression_study(spec: StreamSpec, methods=DEFAULT_METHODS, *,
                         alpha: float = 0.1, delta: float = 0.1,
                         h: WeightPmf | None = None, stride: int = 100,
                         workers: int = 1) -> RunMetrics:
    """Linear-model residual calibration with held-out coverage evaluation.

    A dataset of three equal parts (each of ``spec.horizon`` points): the
    first fits a closed-form least-squares predictor, the second streams
    |y - mu_hat(x)| through each calibrator, and coverage over the third is
    recomputed every ``stride`` calibration steps. Interval width is twice
    the threshold; the oracle width for unit noise is 2 z_{1-alpha/2}.
    """
    if h is None:
        h = default_h()
    part, reps = spec.horizon, spec.reps
    dim = int(spec.param("dim", 10))
    noise = float(spec.param("noise", 1.0))
    tables = _method_tables(methods, part, alpha, delta, h)
    ranks = np.stack([tb.ranks for tb in tables])
    logged = _logged_steps(part, stride)
    results = _run_parallel(
        _regression_rep,
        [(rep, spec.seed, part, dim, noise, ranks, logged) for rep in range(reps)],
        workers)
    metrics = RunMetrics(study="regression", config={
        "alpha": alpha, "delta": delta, "h": h.spec_string(), "stride": stride,
        "dim": dim, "noise": noise,
        "spec": spec.__dict__ | {"params": dict(spec.params)},
    })
    metrics.extras["oracle_width"] = 2.0 * normal_quantile(1.0 - alpha / 2.0) * noise
    for rep, thr_logged, coverage in sorted(results):
        for mi, tb in enumerate(tables):
            metrics.min_content[(tb.method, rep)] = float(coverage[mi].min())
            for li, t in enumerate(logged):
                q = float(thr_logged[mi, li])
                rank = int(tb.ranks[t - 1])
                metrics.rows.append(StepRecord(
                    method=tb.method, replication=rep, t=int(t),
                    value=float(coverage[mi, li]), width=2.0 * q,
                    noninformative=None, threshold=q,
                    rank=rank if rank >= 1 else None,
                    offset=float(tb.offsets[t - 1]), epoch=None))
    return metrics


# ---------------------------------------------------------------------------
# location-shift study (online engine semantics on a changing stream)
# ---------------------------------------------------------------------------

def _epoch_windows(method, alpha, delta, h, g, eta, horizon):
    """Plans for every epoch whose service window intersects [1, horizon]."""
    plans = []
    k = 0
    while epoch_start(eta, k) <= horizon:
        plans.append(build_window_plan(method, k, eta, alpha, delta, h, g))
        k += 1
    return plans


def _shift_rep(args):
    (rep, seed, horizon, shift_at, post_mean, post_sigma, plans, logged) = args
    rng = rng_for_rep(seed, rep)
    z = location_shift_stream(rng, horizon, shift_at, post_mean, post_sigma)
    prefix = np.concatenate([[0.0], np.cumsum(z)])
    per_window = []
    centers = []
    for plan in plans:
        start = plan.start
        centers.append(prefix[start - 1] / (start - 1) if start > 1 else 0.0)
        cnt = min(plan.last_step, horizon) - start + 1
        if cnt <= 0:
            per_window.append(np.empty(0))
            continue
        scores = np.abs(z[start - 1:start - 1 + cnt] - centers[-1])
        per_window.append(running_thresholds(scores, plan.ranks[:cnt]))
    # per-step candidate pair (previous epoch's window and the current one)
    q_chosen = np.full(horizon, math.inf)
    c_chosen = np.zeros(horizon)
    r_chosen = np.full(horizon, -1, dtype=np.int64)
    u_chosen = np.full(horizon, math.inf)
    k_chosen = np.zeros(horizon, dtype=np.int64)
    for k, plan in enumerate(plans):
        lo = plan.start
        hi = min(epoch_start_of(plans, k + 1) - 1, horizon)
        if lo > hi:
            continue
        idx = np.arange(lo - 1, hi)
        q_curr = per_window[k][idx - (plan.start - 1)]
        take_curr = np.ones(len(idx), dtype=bool)
        if k >= 1:
            prev = plans[k - 1]
            q_prev = per_window[k - 1][idx - (prev.start - 1)]
            take_curr = q_curr < q_prev  # engine picks the earlier window on ties
            q_chosen[idx] = np.where(take_curr, q_curr, q_prev)
            c_chosen[idx] = np.where(take_curr, centers[k], centers[k - 1])
            r_prev = prev.ranks[idx - (prev.start - 1)]
            r_curr = plan.ranks[idx - (plan.start - 1)]
            r_chosen[idx] = np.where(take_curr, r_curr, r_prev)
            u_prev = prev.offsets[idx - (prev.start - 1)]
            u_curr = plan.offsets[idx - (plan.start - 1)]
            u_chosen[idx] = np.where(take_curr, u_curr, u_prev)
            k_chosen[idx] = np.where(take_curr, k, k - 1)
        else:
            q_chosen[idx] = q_curr
            c_chosen[idx] = centers[k]
            r_chosen[idx] = plan.ranks[idx - (plan.start - 1)]
            u_chosen[idx] = plan.offsets[idx - (plan.start - 1)]
            k_chosen[idx] = k
    ts = np.arange(1, horizon + 1)
    if shift_at is None:
        mu_t = np.zeros(horizon)
        sigma_t = np.ones(horizon)
    else:
        post = ts > shift_at
        mu_t = np.where(post, post_mean, 0.0)
        sigma_t = np.where(post, post_sigma, 1.0)
    content = gaussian_content_series(c_chosen, q_chosen, mu_t, sigma_t)
    li = logged - 1
    return (rep, float(content.min()), content[li], q_chosen[li], r_chosen[li],
            u_chosen[li], k_chosen[li])


def epoch_start_of(plans, k: int) -> int:
    if k < len(plans):
        return plans[k].start
    return plans[-1].last_step + 1 if plans else 1


def run_shift_study(spec: StreamSpec, *, alpha: float = 0.1,
                    h: WeightPmf | None = None, g: WeightPmf | None = None,
                    eta: float = 2.0, stride: int = 100, workers: int = 1,
                    method: str = "tuc", delta: float | None = None) -> RunMetrics:
    """Online prediction through a location shift, with analytic content.

    The stream is standard normal up to ``shift_at`` (half the horizon by
    default; None for a no-shift control) and N(post_mean, post_sigma^2)
    afterwards. The running-mean learner freezes a center per epoch; the
    reported set is the narrower of the two candidate intervals, and its
    content is evaluated against the current segment's distribution.
    """
    if h is None:
        h = default_h()
    if g is None:
        g = default_g()
    horizon, reps = spec.horizon, spec.reps
    shift_at = spec.param("shift_at", horizon // 2)
    post_mean = float(spec.param("post_mean", 1.0))
    post_sigma = float(spec.param("post_sigma", 1.0))
    plans = _epoch_windows(method, alpha, delta, h, g, eta, horizon)
    logged = _logged_steps(horizon, stride)
    results = _run_parallel(
        _shift_rep,
        [(rep, spec.seed, horizon, shift_at, post_mean, post_sigma, plans, logged)
         for rep in range(reps)],
        workers)
    label = f"online-{method}"
    metrics = RunMetrics(study="shift", config={
        "alpha": alpha, "delta": delta, "method": method, "eta": eta,
        "h": h.spec_string(), "g": g.spec_string(), "stride": stride,
        "shift_at": shift_at, "post_mean": post_mean, "post_sigma": post_sigma,
        "spec": spec.__dict__ | {"params": dict(spec.params)},
    })
    content_sum = np.zeros(len(logged))
    for rep, rep_min, content, q, r, u, ks in sorted(results):
        metrics.min_content[(label, rep)] = rep_min
        content_sum += content
        for li, t in enumerate(logged):
            metrics.rows.append(StepRecord(
                method=label, replication=rep, t=int(t), value=float(content[li]),
                width=2.0 * float(q[li]), noninformative=None,
                threshold=float(q[li]),
                rank=int(r[li]) if r[li] >= 1 else None,
                offset=float(u[li]), epoch=int(ks[li])))
    metrics.extras["logged_steps"] = logged
    metrics.extras["mean_content_by_t"] = content_sum / max(len(results), 1)
    return metrics


# ---------------------------------------------------------------------------
# uniform-score lemma checks (direct simulation of the coverage statements)
# ---------------------------------------------------------------------------

@dataclass
class LemmaReport:
    """Monte Carlo estimate of one of the uniform-order-statistic lemmas."""

    lemma: int
    kind: str                  # "mean-min-content" or "simultaneous-fraction"
    estimate: float
    stderr: float
    bound: float
    passed: bool
    reps: int
    horizon: int
    mins: np.ndarray = field(repr=False, default=None)

    def describe(self) -> str:
        rel = ">=" if self.passed else "<"
        return (f"lemma {self.lemma} [{self.kind}]: estimate {self.estimate:.5f} "
                f"{rel} bound {self.bound:.5f} - 3*stderr ({self.stderr:.5f}) "
                f"over {self.reps} reps x {self.horizon} steps")


def _uniform_fixed_rep(args):
    rep, seed, horizon, ranks = args
    rng = rng_for_rep(seed, rep)
    scores = uniform_scores_stream(rng, horizon)
    thresholds = running_thresholds(scores, ranks)
    content = np.where(np.isfinite(thresholds), thresholds, 1.0)
    return rep, float(content.min())


def _uniform_online_rep(args):
    rep, seed, horizon, window_args = args
    rng = rng_for_rep(seed, rep)
    z = uniform_scores_stream(rng, horizon)
    overall = 1.0
    for start, cnt, ranks in window_args:
        thresholds = running_thresholds(z[start - 1:start - 1 + cnt], ranks)
        content = np.where(np.isfinite(thresholds), thresholds, 1.0)
        overall = min(overall, float(content.min()))
    return rep, overall


def run_lemma_check(lemma: int, *, alpha: float = 0.1, delta: float = 0.1,
                    horizon: int = 20_000, reps: int = 200, seed: int = 0,
                    h: WeightPmf | None = None, g: WeightPmf | None = None,
                    eta: float = 2.0, workers: int = 1) -> LemmaReport:
    """Direct Monte Carlo check of the four coverage lemmas on uniform scores.

    Uniform scores make the threshold itself the probability content, so the
    check needs no data model: lemmas 1/3 bound the expected minimum content
    of the (online) conformal rank rule, lemmas 2/4 the probability that the
    (online) PAC rule keeps content above 1-alpha simultaneously.
    """
    if lemma not in (1, 2, 3, 4):
        raise ValueError(f"lemma must be 1, 2, 3 or 4, got {lemma}")
    if h is None:
        h = default_h()
    method = "tuc" if lemma in (1, 3) else "tupac"
    if lemma in (1, 2):
        t0 = compute_t0(method, alpha, delta, h, scan_horizon=10 * horizon)
        ranks = rank_series(method, horizon, alpha, delta, h, t0=t0)[None, :]
        results = _run_parallel(
            _uniform_fixed_rep,
            [(rep, seed, horizon, ranks) for rep in range(reps)],
            workers)
    else:
        if g is None:
            g = default_g()
        plans = _epoch_windows(method, alpha, delta, h, g, eta, horizon)
        window_args = []
        for plan in plans:
            cnt = min(plan.last_step, horizon) - plan.start + 1
            if cnt > 0:
                window_args.append((plan.start, cnt, plan.ranks[:cnt][None, :]))
        results = _run_parallel(
            _uniform_online_rep,
            [(rep, seed, horizon, window_args) for rep in range(reps)],
            workers)
    mins = np.array([m for _rep, m in sorted(results)], dtype=np.float64)
    if lemma in (1, 3):
        estimate = float(mins.mean())
        stderr = float(mins.std(ddof=1) / math.sqrt(len(mins))) if len(mins) > 1 else 0.0
        bound = 1.0 - alpha
        kind = "mean-min-content"
    else:
        estimate = float(np.mean(mins >= 1.0 - alpha))
        stderr = math.sqrt(max(estimate * (1.0 - estimate), 1e-12) / len(mins))
        bound = 1.0 - delta
        kind = "simultaneous-fraction"
    return LemmaReport(lemma=lemma, kind=kind, estimate=estimate, stderr=stderr,
                       bound=bound, passed=estimate >= bound - 3.0 * stderr,
                       reps=reps, horizon=horizon, mins=mins)


# ---------------------------------------------------------------------------
# uniform-score streams through the real EpochEngine (identity learner)
# ---------------------------------------------------------------------------

def _engine_uniform_chunk(args):
    reps_chunk, seed, horizon, method, alpha, delta, h_spec, g_spec, eta = args
    from ..weights import parse_weight_spec
    h = parse_weight_spec(h_spec)
    g = parse_weight_spec(g_spec)
    plan_cache: dict = {}
    out = []
    for rep in reps_chunk:
        rng = rng_for_rep(seed, rep)
        z = uniform_scores_stream(rng, horizon)
        engine = EpochEngine(IdentityLearner(), method, alpha, delta,
                             h=h, g=g, eta=eta, plan_cache=plan_cache)
        worst = 1.0
        for value in z:
            report = engine.step(float(value))
            for cand in report.candidates:
                if cand.rank is not None and cand.threshold < worst:
                    worst = cand.threshold
        out.append((rep, worst))
    return out


def run_engine_uniform_check(method: str, *, alpha: float = 0.1,
                             delta: float | None = None, horizon: int = 16_384,
                             reps: int = 200, seed: int = 0,
                             h: WeightPmf | None = None, g: WeightPmf | None = None,
                             eta: float = 2.0, workers: int = 1) -> np.ndarray:
    """Per-replication minimum content over every candidate (t, k) pair.

    Drives the full EpochEngine with the identity learner on uniform scores,
    taking the running minimum over both candidates each step (the coverage
    statements bound the minimum over all served windows, not just the
    reported set). Returns the per-rep minima.
    """
    if h is None:
        h = default_h()
    if g is None:
        g = default_g()
    chunks = np.array_split(np.arange(reps), max(1, workers))
    args = [(list(chunk), seed, horizon, method, alpha, delta,
             h.spec_string(), g.spec_string(), eta)
            for chunk in chunks if len(chunk)]
    nested = _run_parallel(_engine_uniform_chunk, args, workers)
    flat = sorted(pair for chunk in nested for pair in chunk)
    return np.array([m for _rep, m in flat], dtype=np.float64)


# ---------------------------------------------------------------------------
# spam detection study (split and online variants)
# ---------------------------------------------------------------------------

def _train_logistic(X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
                    lr: float, passes: int) -> SGDLogisticClassifier:
    clf = SGDLogisticClassifier(dim=X.shape[1], lr=lr)
    n = len(y)
    for _ in range(passes):
        order = rng.permutation(n)
        for i in order:
            clf.update((X[i], float(y[i])))
    return clf


def _classification_eval(p_eval: np.ndarray, y_eval: np.ndarray,
                         threshold: float) -> tuple[float, float]:
    """(coverage, noninformative proportion) of {label: |label - p(x)| <= q}."""
    resid = np.abs(y_eval - p_eval)
    coverage = float(np.mean(resid <= threshold))
    noninf = float(np.mean(np.maximum(p_eval, 1.0 - p_eval) <= threshold))
    return coverage, noninf


def run_spam_study(path, methods=DEFAULT_METHODS, *, alpha: float = 0.1,
                   delta: float = 0.1, h: WeightPmf | None = None,
                   g: WeightPmf | None = None, eta: float = 2.0, seed: int = 0,
                   stride: int = 100, lr: float = 0.1, passes: int = 10,
                   online: bool = True, data=None) -> RunMetrics:
    """Spam-detection study on a spambase-format file.

    Split variant: a logistic classifier is SGD-trained on the first third
    (features standardized with first-third statistics), the second third
    streams absolute residuals through each calibrator, and coverage plus
    the noninformative-set proportion over the final third are evaluated
    every ``stride`` steps. Online variant: the first two thirds stream
    through the epoch engine wrapped around an SGD logistic learner.

    Rows are presented in a seeded shuffled order recorded in the config.
    """
    if h is None:
        h = lognormal_weights(6.0, 1.0)
    if g is None:
        g = lognormal_weights(math.log(8.0), 1.0)
    if data is None:
        X, y = load_spambase(path)
    else:
        X, y = data
    rng = rng_for_rep(seed, 0)
    order = rng.permutation(len(y))
    X, y = X[order], y[order]
    parts = np.array_split(np.arange(len(y)), 3)
    i1, i2, i3 = parts
    mean, scale = fit_standardizer(X[i1])
    Xs = standardize(X, mean, scale)
    metrics = RunMetrics(study="spam", config={
        "alpha": alpha, "delta": delta, "eta": eta, "h": h.spec_string(),
        "g": g.spec_string(), "seed": seed, "stride": stride, "lr": lr,
        "passes": passes, "n_rows": int(len(y)), "path": str(path),
    })

    # split study: fixed classifier from part 1
    clf = _train_logistic(Xs[i1], y[i1], rng, lr, passes)
    frozen = clf.freeze()
    p2 = frozen.predict_proba_batch(Xs[i2])
    p3 = frozen.predict_proba_batch(Xs[i3])
    y3 = y[i3].astype(np.float64)
    scores2 = np.abs(y[i2].astype(np.float64) - p2)
    cal_n = len(scores2)
    tables = _method_tables(methods, cal_n, alpha, delta, h)
    ranks = np.stack([tb.ranks for tb in tables])
    thresholds = running_thresholds(scores2, ranks)
    logged = _logged_steps(cal_n, stride)
    for mi, tb in enumerate(tables):
        worst = 1.0
        for t in logged:
            q = float(thresholds[mi, t - 1])
            coverage, noninf = _classification_eval(p3, y3, q)
            worst = min(worst, coverage)
            rank = int(tb.ranks[t - 1])
            metrics.rows.append(StepRecord(
                method=tb.method, replication=0, t=int(t), value=coverage,
                width=q, noninformative=noninf, threshold=q,
                rank=rank if rank >= 1 else None,
                offset=float(tb.offsets[t - 1]), epoch=None))
        metrics.min_content[(tb.method, 0)] = worst

    # online study: epoch engine around an SGD logistic learner
    if online:
        stream_idx = np.concatenate([i1, i2])
        X_stream, y_stream = Xs[stream_idx], y[stream_idx]
        proba_cache: dict[int, np.ndarray] = {}
        for method in ("tuc", "tupac"):
            if method == "tupac" and delta is None:
                continue
            engine = EpochEngine(SGDLogisticClassifier(dim=X.shape[1], lr=lr),
                                 method, alpha, delta, h=h, g=g, eta=eta)
            label = f"online-{method}"
            worst = 1.0
            for i in range(len(y_stream)):
                report = engine.step((X_stream[i], float(y_stream[i])))
                t = report.step
                if t % stride == 0 or t == len(y_stream):
                    chosen = report.report
                    trans = engine.active_windows[report.chosen].transformation
                    key = id(trans)
                    if key not in proba_cache:
                        proba_cache[key] = trans.predict_proba_batch(Xs[i3])
                    coverage, noninf = _classification_eval(
                        proba_cache[key], y3, chosen.threshold)
                    worst = min(worst, coverage)
                    metrics.rows.append(StepRecord(
                        method=label, replication=0, t=t, value=coverage,
                        width=chosen.threshold, noninformative=noninf,
                        threshold=chosen.threshold, rank=chosen.rank,
                        offset=chosen.offset, epoch=chosen.epoch))
            metrics.min_content[(label, 0)] = worst
    return metrics
