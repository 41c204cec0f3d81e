"""Acceptance suite: every criterion at its stated scale and tolerance.

Each test prints one `criterion NN [PASS|FAIL]` line (visible with -s) and
asserts the stated bound. Two clauses are expected to fail honestly with
the offsets implemented verbatim; see /root/notes (reviewer ledger) for the
blocking analyses: the anytime-conformal offset's negative first term
leaves no buffer at the first feasible step after each finiteness
threshold, so the time-uniform mean-minimum bound does not hold empirically
at alpha < 0.5 (singly in the fixed case, once per epoch online).
"""

import math

import mpmath
import numpy as np
import pytest

from tuconform.calibrators import compute_t0, cs_offset, rank_series, tuc_offset, tupac_offset
from tuconform.experiments.fast import running_thresholds
from tuconform.experiments.spambase import synthesize_spambase_like
from tuconform.experiments.streams import StreamSpec
from tuconform.experiments.studies import (
    run_engine_uniform_check,
    run_gaussian_study,
    run_lemma_check,
    run_regression_study,
    run_shift_study,
    run_spam_study,
)
from tuconform.learners import SGDLinearRegressor, SGDLogisticClassifier, sigmoid
from tuconform.online import (
    EpochEngine,
    calibration_count,
    compute_tk,
    epoch_start,
    online_tuc_offset,
    online_tupac_offset,
    window_sum_limit,
)
from tuconform.special import bernoulli_kl, invert_kl_rank, normal_cdf, normal_quantile, snap_ceil
from tuconform.tracker import ScoreTracker
from tuconform.weights import lognormal_weights

WORKERS = 2

TABLE1 = {
    0.10: {"tuc": 0.890, "split": 0.838},
    0.15: {"tuc": 0.836, "split": 0.768},
    0.20: {"tuc": 0.811, "split": 0.684},
}


def _line(number: str, ok: bool, message: str) -> None:
    print(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {message}")


@pytest.fixture(scope="module")
def h11():
    return lognormal_weights(11.0, 1.0)


@pytest.fixture(scope="module")
def g16():
    return lognormal_weights(math.log(16.0), 1.0)


@pytest.fixture(scope="module")
def table1_runs():
    """Gaussian study at the paper's full scale: 100 reps x 100,000 steps."""
    runs = {}
    for alpha in (0.10, 0.15, 0.20):
        spec = StreamSpec("gaussian-location", 100_000, 100, 1, {"holdout": 100})
        runs[alpha] = run_gaussian_study(spec, ("split", "tuc"), alpha=alpha,
                                         delta=alpha, stride=10_000, workers=WORKERS)
    return runs


def test_criterion_01_table1_reproduction(table1_runs):
    """Mean min content within +-0.03 (tuc) / +-0.05 (split) of the tabled values."""
    ok = True
    details = []
    for alpha, run in table1_runs.items():
        for method, tol in (("tuc", 0.03), ("split", 0.05)):
            mean, sd = run.min_content_summary(method)
            target = TABLE1[alpha][method]
            good = abs(mean - target) <= tol
            ok &= good
            details.append(f"{method}@{alpha:g}: {mean:.4f} (sd {sd:.4f}) vs {target}")
    _line("01", ok, "Table-1 reproduction: " + "; ".join(details))
    for alpha, run in table1_runs.items():
        for method, tol in (("tuc", 0.03), ("split", 0.05)):
            mean, _ = run.min_content_summary(method)
            assert abs(mean - TABLE1[alpha][method]) <= tol, (alpha, method, mean)


def test_criterion_01_tuc_mean_min_guarantee(table1_runs):
    """The guarantee itself: tuc mean min content >= 1 - alpha - 3 * stderr.

    Expected to fail with the verbatim offsets (see the module docstring
    and the reviewer ledger): the paper's own tabled value 0.890 < 0.9
    already sits at this edge.
    """
    ok = True
    details = []
    for alpha, run in table1_runs.items():
        mean, _ = run.min_content_summary("tuc")
        gate = (1.0 - alpha) - 3.0 * run.mc_stderr("tuc")
        good = mean >= gate
        ok &= good
        details.append(f"alpha={alpha:g}: {mean:.4f} vs gate {gate:.4f}")
    _line("01b", ok, "tuc mean-min guarantee: " + "; ".join(details))
    for alpha, run in table1_runs.items():
        mean, _ = run.min_content_summary("tuc")
        gate = (1.0 - alpha) - 3.0 * run.mc_stderr("tuc")
        assert mean >= gate, (alpha, mean, gate)


def test_criterion_02_tupac_guarantee():
    """alpha = delta = 0.1, 500 reps x 20,000 uniform steps."""
    report = run_lemma_check(2, alpha=0.1, delta=0.1, horizon=20_000, reps=500,
                             seed=2, workers=WORKERS)
    gate = 0.9 - 3.0 * report.stderr
    _line("02", report.estimate >= gate,
          f"tupac simultaneous fraction {report.estimate:.4f} vs gate {gate:.4f}")
    assert report.estimate >= gate


def test_criterion_03_cs_guarantee():
    """Same protocol with the confidence-sequence rank rule."""
    reps, horizon = 500, 20_000
    ranks = rank_series("cs", horizon, 0.1, 0.1)
    mins = np.empty(reps)
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=3, spawn_key=(rep,)))
        thr = running_thresholds(rng.random(horizon), ranks)
        mins[rep] = np.where(np.isfinite(thr), thr, 1.0).min()
    frac = float(np.mean(mins >= 0.9))
    stderr = math.sqrt(max(frac * (1 - frac), 1e-12) / reps)
    gate = 0.9 - 3.0 * stderr
    _line("03", frac >= gate, f"cs simultaneous fraction {frac:.4f} vs gate {gate:.4f}")
    assert frac >= gate


@pytest.fixture(scope="module")
def online_uniform_mins(h11, g16):
    out = {}
    for method, delta in (("tuc", None), ("tupac", 0.1)):
        out[method] = run_engine_uniform_check(
            method, alpha=0.1, delta=delta, horizon=16_384, reps=200, seed=4,
            h=h11, g=g16, eta=2.0, workers=WORKERS)
    return out


def test_criterion_04_online_tuc(online_uniform_mins):
    """Online tuc mean min content >= 0.9 - 3 * stderr (honestly red; see ledger)."""
    mins = online_uniform_mins["tuc"]
    mean = float(mins.mean())
    stderr = float(mins.std(ddof=1) / math.sqrt(len(mins)))
    gate = 0.9 - 3.0 * stderr
    _line("04a", mean >= gate,
          f"online tuc mean min content {mean:.4f} vs gate {gate:.4f}")
    assert mean >= gate, (mean, gate)


def test_criterion_04_online_tupac(online_uniform_mins):
    mins = online_uniform_mins["tupac"]
    frac = float(np.mean(mins >= 0.9))
    stderr = math.sqrt(max(frac * (1 - frac), 1e-12) / len(mins))
    gate = 0.9 - 3.0 * stderr
    _line("04b", frac >= gate,
          f"online tupac simultaneous fraction {frac:.4f} vs gate {gate:.4f}")
    assert frac >= gate


def test_criterion_05_width_convergence():
    """Every method's mean width at t = 50,000 within 0.1 of the oracle width."""
    spec = StreamSpec("linear-regression", 50_000, 3, 5, {"dim": 10})
    metrics = run_regression_study(spec, ("split", "cs", "tuc", "tupac"),
                                   alpha=0.1, delta=0.1, stride=1000,
                                   workers=WORKERS)
    oracle = 2.0 * normal_quantile(0.95)
    assert oracle == pytest.approx(3.2897, abs=1e-4)
    ok = True
    details = []
    widths = {}
    for method in ("split", "cs", "tuc", "tupac"):
        ts, width = metrics.series(method, column="width")
        w_final = float(width[ts == 50_000][0])
        widths[method] = (float(width[ts == 1000][0]), w_final)
        good = abs(w_final - oracle) <= 0.1
        ok &= good
        details.append(f"{method}: {w_final:.4f}")
    tuc_monotone = widths["tuc"][1] < widths["tuc"][0]
    ok &= tuc_monotone
    _line("05", ok, f"widths@50k vs oracle {oracle:.4f}: " + "; ".join(details)
          + f"; tuc width 50k<1k: {tuc_monotone}")
    for method, (_w0, w_final) in widths.items():
        assert abs(w_final - oracle) <= 0.1, (method, w_final)
    assert tuc_monotone


def test_criterion_06_shift_adaptivity():
    """50 reps: dip below 0.88 within 2,000 steps of the shift, back above 0.89."""
    spec = StreamSpec("location-shift", 100_000, 50, 6, {"shift_at": 50_000})
    metrics = run_shift_study(spec, alpha=0.1, stride=100, workers=WORKERS)
    ts = metrics.extras["logged_steps"]
    mean = metrics.extras["mean_content_by_t"]
    dip_window = (ts > 50_000) & (ts <= 52_000)
    dip = float(mean[dip_window].min())
    recovered = float(mean[ts == 100_000][0])
    ok = dip < 0.88 and recovered > 0.89
    _line("06", ok, f"post-shift dip {dip:.4f} (< 0.88), content@100k {recovered:.4f} (> 0.89)")
    assert dip < 0.88
    assert recovered > 0.89


def test_criterion_07_oracle_equivalence(h11, g16):
    """Tracker vs sort; KL inversion vs exhaustive scan; offsets vs 50-digit forms."""
    rng = np.random.default_rng(7)
    # tracker select/rank vs a full sort, exact
    vals = rng.standard_normal(10_000)
    tracker = ScoreTracker()
    for v in vals:
        tracker.insert(float(v))
    ordered = np.sort(vals)
    tracker_ok = all(tracker.select(int(r)) == ordered[int(r) - 1]
                     for r in rng.integers(1, 10_001, size=200))
    tracker_ok &= all(tracker.rank_leq(float(x)) == int(np.sum(vals <= x))
                      for x in rng.uniform(-3, 3, size=50))
    # KL rank inversion vs exhaustive scan for all t <= 200, exact
    kl_ok = True
    for t in range(1, 201):
        for u in (0.0, 1e-3, 0.02, 0.3, 2.0):
            lo = snap_ceil(0.9 * (t + 1))
            expected = None
            if lo <= t:
                for b in range(lo, t + 1):
                    if bernoulli_kl(0.9, b / (t + 1)) >= u:
                        expected = b
                        break
            kl_ok &= invert_kl_rank(0.1, t, u) == expected
    # every offset formula vs an independent 50-digit evaluation, 1e-12 relative
    off_ok = True
    t0_tuc = compute_t0("tuc", 0.1, None, h11, scan_horizon=200_000)
    t0_tup = compute_t0("tupac", 0.1, 0.1, h11, scan_horizon=200_000)
    with mpmath.workdps(50):
        a, d = mpmath.mpf("0.1"), mpmath.mpf("0.1")
        for t in (500, 2_000, 20_000):
            ell = (mpmath.mpf("1.4") * mpmath.log(mpmath.log(mpmath.mpf("2.1") * t))
                   + mpmath.log(10 / d)) / t
            ref = float(mpmath.mpf("1.5") * mpmath.sqrt(a * (1 - a) * ell)
                        + mpmath.mpf("0.8") * ell)
            off_ok &= abs(cs_offset(t, 0.1, 0.1) - ref) <= 1e-12 * abs(ref)
            L = -mpmath.log(mpmath.mpf(h11.pmf(t)))
            tail = mpmath.mpf(h11.tail_mass(t0_tuc))
            ref = float(4 * (2 * a - 1) * L / (3 * (t + 3))
                        + mpmath.sqrt(2 * a * (1 - a) * L / (t + 2))
                        + mpmath.sqrt(2 * mpmath.pi * a * (1 - a) / (t + 2)) * tail / 2)
            off_ok &= abs(tuc_offset(t, 0.1, h11, t0_tuc) - ref) <= 1e-12 * abs(ref)
            tail = mpmath.mpf(h11.tail_mass(t0_tup))
            ref = float((mpmath.log(tail) - mpmath.log(d)
                         - mpmath.log(mpmath.mpf(h11.pmf(t)))) / (t + 1))
            off_ok &= abs(tupac_offset(t, 0.1, 0.1, h11, t0_tup) - ref) <= 1e-12 * abs(ref)
        for k, t in ((5, 100), (9, 600), (12, 5000)):
            tk_tuc = compute_tk(k, 2.0, 0.1, None, h11, g16, "tuc")
            tk_tup = compute_tk(k, 2.0, 0.1, 0.1, h11, g16, "tupac")
            s = calibration_count(t, k, 2.0)
            shift = epoch_start(2.0, k) - 1
            gk = mpmath.mpf(g16.pmf(k))
            L = -mpmath.log(mpmath.mpf(h11.pmf(s)))
            win = mpmath.mpf(h11.window_mass(tk_tuc + 1 - shift,
                                             window_sum_limit(2.0, k) - shift))
            ratio = max(mpmath.log(win / gk), mpmath.mpf(0))
            ref = float(4 * (2 * a - 1) * L / (3 * (s + 3))
                        + mpmath.sqrt(2 * a * (1 - a) / (s + 2))
                        * (mpmath.sqrt(L) + mpmath.sqrt(ratio) + mpmath.sqrt(mpmath.pi) / 2))
            got = online_tuc_offset(t, k, 2.0, 0.1, h11, g16, tk_tuc)
            off_ok &= abs(got - ref) <= 1e-12 * abs(ref)
            win = mpmath.mpf(h11.window_mass(tk_tup + 1 - shift,
                                             window_sum_limit(2.0, k) - shift))
            ref = float((mpmath.log(win) - mpmath.log(d) - mpmath.log(gk)
                         - mpmath.log(mpmath.mpf(h11.pmf(s)))) / (s + 1))
            got = online_tupac_offset(t, k, 2.0, 0.1, 0.1, h11, g16, tk_tup)
            off_ok &= abs(got - ref) <= 1e-12 * abs(ref)
    ok = tracker_ok and kl_ok and off_ok
    _line("07", ok, f"tracker sort oracle: {tracker_ok}; KL scan oracle: {kl_ok}; "
          f"offset dual evaluation at 1e-12: {off_ok}")
    assert tracker_ok and kl_ok and off_ok


def test_criterion_08_numeric_checks(h11):
    """Gradients vs central differences; CDF symmetry/round-trip; normalization."""
    rng = np.random.default_rng(8)
    grad_ok = True
    for _ in range(25):
        dim = 6
        x = rng.standard_normal(dim)
        y = float(rng.standard_normal())
        theta = rng.standard_normal(dim + 1)
        model = SGDLinearRegressor(dim=dim, lr=1.0)
        model.w = theta[:dim].copy()
        model.b = float(theta[dim])
        model.update((x, y))
        analytic = np.concatenate([theta[:dim] - model.w, [theta[dim] - model.b]])
        eps = 1e-6
        for i in range(dim + 1):
            up, dn = theta.copy(), theta.copy()
            up[i] += eps
            dn[i] -= eps
            num = (((up[:dim] @ x + up[dim]) - y) ** 2
                   - ((dn[:dim] @ x + dn[dim]) - y) ** 2) / (2 * eps)
            grad_ok &= abs(analytic[i] - num) <= 1e-6 * max(1.0, abs(num))
        label = float(rng.integers(0, 2))
        clf = SGDLogisticClassifier(dim=dim, lr=1.0)
        clf.w = theta[:dim].copy()
        clf.b = float(theta[dim])
        clf.update((x, label))
        analytic = np.concatenate([theta[:dim] - clf.w, [theta[dim] - clf.b]])
        for i in range(dim + 1):
            up, dn = theta.copy(), theta.copy()
            up[i] += eps
            dn[i] -= eps

            def nll(params):
                p = min(max(sigmoid(float(params[:dim] @ x + params[dim])), 1e-12),
                        1 - 1e-12)
                return -(label * math.log(p) + (1 - label) * math.log(1 - p))

            num = (nll(up) - nll(dn)) / (2 * eps)
            grad_ok &= abs(analytic[i] - num) <= 1e-6 * max(1.0, abs(num))
    xs = rng.uniform(-8, 8, size=300)
    cdf_ok = bool(np.all(np.abs(normal_cdf(xs) + normal_cdf(-xs) - 1.0) <= 1e-9))
    rt_ok = all(abs(normal_cdf(normal_quantile(float(p))) - p) <= 1e-9
                for p in np.arange(0.01, 1.0, 0.01))
    norm_ok = abs(h11.mass_up_to(10_000_000) - 1.0) <= 1e-6
    ok = grad_ok and cdf_ok and rt_ok and norm_ok
    _line("08", ok, f"gradients: {grad_ok}; cdf symmetry: {cdf_ok}; "
          f"quantile round-trip: {rt_ok}; normalization@1e7: {norm_ok}")
    assert grad_ok and cdf_ok and rt_ok and norm_ok


def test_criterion_09_no_leakage_audit(h11, g16):
    """200-step instrumented trace: calibration scores never see their own point."""

    class AuditLearner:
        kind = "audit"

        def __init__(self):
            self.indices: list[int] = []

        def update(self, z):
            self.indices.append(len(self.indices) + 1)

        def freeze(self):
            trained = tuple(self.indices)

            class Frozen:
                kind = "audit-frozen"
                training_indices = trained

                def score(self, z):
                    return float(z)

                def state_dict(self):
                    return {}

            return Frozen()

    engine = EpochEngine(AuditLearner(), "tuc", 0.1, h=h11, g=g16, eta=2.0)
    rng = np.random.default_rng(9)
    violations = 0
    for t in range(1, 201):
        engine.step(float(rng.random()))
        for w in engine.active_windows:
            cutoff = epoch_start(2.0, w.k)
            if any(i >= cutoff for i in w.transformation.training_indices):
                violations += 1
    _line("09", violations == 0, f"leakage violations over 200 steps: {violations}")
    assert violations == 0


def test_criterion_10_spam_study():
    """Bundled seeded shuffle: tuc/tupac coverage >= 0.9 everywhere,
    noninformative proportion decreasing from first to final evaluation."""
    data = synthesize_spambase_like(seed=2024)
    metrics = run_spam_study("<synthetic>", ("split", "cs", "tuc", "tupac"),
                             alpha=0.1, delta=0.1, seed=7, stride=100,
                             data=data)
    ok = True
    details = []
    for method in ("tuc", "tupac", "online-tuc", "online-tupac"):
        _ts, coverage = metrics.series(method)
        _ts, noninf = metrics.series(method, column="noninformative")
        covered = bool(np.all(coverage >= 0.9))
        shrinking = noninf[-1] <= noninf[0]
        ok &= covered and shrinking
        details.append(f"{method}: min cov {coverage.min():.4f}, "
                       f"noninf {noninf[0]:.3f}->{noninf[-1]:.3f}")
    _line("10", ok, "; ".join(details))
    for method in ("tuc", "tupac", "online-tuc", "online-tupac"):
        _ts, coverage = metrics.series(method)
        assert np.all(coverage >= 0.9), method
        _ts, noninf = metrics.series(method, column="noninformative")
        assert noninf[-1] <= noninf[0], method
