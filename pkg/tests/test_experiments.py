import json
import math

import numpy as np
import pytest

from tuconform.calibrators import SequentialCalibrator, rank_series
from tuconform.experiments.fast import running_thresholds
from tuconform.experiments.metrics import (
    RunMetrics,
    StepRecord,
    gaussian_content_series,
    true_content_gaussian,
)
from tuconform.experiments.reporting import CSV_COLUMNS, emit_csv, load_csv, write_manifest
from tuconform.experiments.spambase import (
    SpamDataError,
    load_spambase,
    synthesize_spambase_like,
)
from tuconform.experiments.streams import StreamSpec, location_shift_stream, rng_for_rep
from tuconform.experiments.studies import (
    _epoch_windows,
    _shift_rep,
    run_gaussian_study,
    run_lemma_check,
    run_regression_study,
    run_shift_study,
    run_spam_study,
)
from tuconform.learners import RunningMeanEstimator
from tuconform.online import EpochEngine
from tuconform.special import normal_cdf, normal_quantile
from tuconform.weights import lognormal_weights, table_weights

G16 = lognormal_weights(math.log(16.0), 1.0)


class TestTrueContent:
    def test_quantile_definition(self):
        q = normal_quantile(0.95)
        assert true_content_gaussian(0.0, q) == pytest.approx(0.9, abs=1e-9)

    def test_infinite_threshold(self):
        assert true_content_gaussian(0.0, math.inf) == 1.0

    def test_shifted_center(self):
        expected = normal_cdf(1.3) - normal_cdf(-0.7)
        assert true_content_gaussian(0.3, 1.0) == pytest.approx(expected, rel=1e-12)
        assert true_content_gaussian(0.3, 1.0) == pytest.approx(0.6613, abs=1e-4)

    def test_vectorized_matches_scalar(self, rng):
        qs = np.abs(rng.standard_normal(40))
        qs[5] = math.inf
        out = gaussian_content_series(0.4, qs, mu=1.0, sigma=2.0)
        for q, v in zip(qs, out):
            assert v == pytest.approx(
                true_content_gaussian(0.4, float(q), mu=1.0, sigma=2.0), rel=1e-12)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            true_content_gaussian(0.0, -0.5)


class TestFastKernel:
    def test_matches_sequential_calibrator(self, h11, rng):
        scores = rng.standard_normal(2500)
        for method, delta in (("split", None), ("cs", 0.1), ("tuc", None), ("tupac", 0.1)):
            hw = h11 if method in ("tuc", "tupac") else None
            cal = SequentialCalibrator(method, 0.1, delta, hw, horizon=2500)
            ranks = rank_series(method, 2500, 0.1, delta, hw, t0=cal.t0)
            fast = running_thresholds(scores, ranks)
            reference = np.array([cal.step(float(s)).threshold for s in scores])
            finite = np.isfinite(reference)
            assert np.array_equal(np.isfinite(fast), finite)
            np.testing.assert_array_equal(fast[finite], reference[finite])

    def test_multi_method_stacking(self, rng):
        scores = rng.standard_normal(400)
        r1 = rank_series("split", 400, 0.1)
        r2 = rank_series("split", 400, 0.2)
        stacked = running_thresholds(scores, np.stack([r1, r2]))
        np.testing.assert_array_equal(stacked[0], running_thresholds(scores, r1))
        np.testing.assert_array_equal(stacked[1], running_thresholds(scores, r2))

    def test_rejects_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            running_thresholds(rng.standard_normal(10), np.ones(9, dtype=np.int64))


class TestShiftFastPathVsEngine:
    def test_thresholds_epochs_ranks_match(self, h11):
        horizon, shift_at = 1500, 700
        plans = _epoch_windows("tuc", 0.1, None, h11, G16, 2.0, horizon)
        logged = np.arange(1, horizon + 1)
        (_rep, _mn, content, q, r, u, ks) = _shift_rep(
            (2, 99, horizon, shift_at, 1.0, 1.0, plans, logged))
        rng = rng_for_rep(99, 2)
        z = location_shift_stream(rng, horizon, shift_at, 1.0, 1.0)
        engine = EpochEngine(RunningMeanEstimator(), "tuc", 0.1, h=h11, g=G16, eta=2.0)
        for i, v in enumerate(z):
            report = engine.step(float(v))
            assert report.transformation_epoch == ks[i]
            if math.isfinite(q[i]):
                assert report.threshold == q[i]
                assert report.rank == r[i]
                assert report.offset == pytest.approx(u[i], rel=1e-12)
            else:
                assert not report.is_finite


class TestStudies:
    def test_gaussian_metrics_shape(self):
        spec = StreamSpec("gaussian-location", 600, 3, 7, {"holdout": 50})
        metrics = run_gaussian_study(spec, ("split", "tuc"), alpha=0.2, delta=0.2,
                                     stride=100)
        assert set(metrics.methods()) == {"split", "tuc"}
        assert len(metrics.rows) == 2 * 3 * 6  # methods x reps x logged steps
        assert len(metrics.min_content) == 6

    def test_min_content_consistency_at_stride_one(self):
        # reported per-replication min equals the min over the full series
        spec = StreamSpec("gaussian-location", 300, 2, 3, {})
        metrics = run_gaussian_study(spec, ("split",), alpha=0.2, delta=0.2, stride=1)
        for (method, rep), recorded in metrics.min_content.items():
            series = [row.value for row in metrics.rows
                      if row.method == method and row.replication == rep]
            assert recorded == pytest.approx(min(series), abs=1e-12)

    def test_horizon_monotonicity(self):
        # extending the horizon can only lower each replication's min
        short = run_gaussian_study(StreamSpec("gaussian-location", 400, 3, 5, {}),
                                   ("split",), alpha=0.2, delta=0.2, stride=200)
        long = run_gaussian_study(StreamSpec("gaussian-location", 800, 3, 5, {}),
                                  ("split",), alpha=0.2, delta=0.2, stride=200)
        for key, value in short.min_content.items():
            assert long.min_content[key] <= value + 1e-12

    def test_regression_oracle_width(self):
        spec = StreamSpec("linear-regression", 4000, 2, 11, {"dim": 5})
        metrics = run_regression_study(spec, ("split", "tuc"), alpha=0.1, delta=0.1,
                                       stride=500)
        assert metrics.extras["oracle_width"] == pytest.approx(
            2 * normal_quantile(0.95), rel=1e-9)
        ts, width_tuc = metrics.series("tuc", column="width")
        _, width_split = metrics.series("split", column="width")
        finite = np.isfinite(width_tuc)
        assert np.all(width_tuc[finite] >= width_split[finite] - 1e-12)

    def test_shift_study_control_has_no_dip(self):
        spec = StreamSpec("location-shift", 4096, 6, 21,
                          {"shift_at": None})
        metrics = run_shift_study(spec, alpha=0.1, stride=64)
        ts = metrics.extras["logged_steps"]
        mean = metrics.extras["mean_content_by_t"]
        late = mean[ts >= 1024]
        assert late.min() > 0.8  # no shift, no collapse

    def test_lemma_check_validation(self):
        with pytest.raises(ValueError):
            run_lemma_check(5)

    def test_lemma_degenerate_point_mass(self):
        # all h-mass at one step reduces to a fixed-t order-statistic check;
        # the Beta mean at rank beta of t samples is beta/(t+1)
        t_star = 400
        h = table_weights([0.0] * t_star + [1.0])
        report = run_lemma_check(1, alpha=0.2, delta=0.2, horizon=600, reps=600,
                                 seed=17, h=h)
        from tuconform.calibrators import compute_t0, offset_series
        t0 = compute_t0("tuc", 0.2, None, h, scan_horizon=6000)
        u = offset_series("tuc", 600, 0.2, None, h, t0=t0)[t_star - 1]
        from tuconform.special import snap_ceil
        beta = snap_ceil((t_star + 1) * (1 - 0.2 + u))
        expected = beta / (t_star + 1)
        assert report.estimate == pytest.approx(expected, abs=4 * report.stderr + 1e-3)


class TestReporting:
    def _small_metrics(self):
        spec = StreamSpec("gaussian-location", 300, 2, 13, {})
        return run_gaussian_study(spec, ("split", "tuc"), alpha=0.2, delta=0.2,
                                  stride=50)

    def test_csv_round_trip(self, tmp_path):
        metrics = self._small_metrics()
        path = emit_csv(metrics, tmp_path / "run.csv")
        rows = load_csv(path)
        assert rows == metrics.rows

    def test_header_only_for_empty_metrics(self, tmp_path):
        metrics = RunMetrics(study="gaussian")
        path = emit_csv(metrics, tmp_path / "empty.csv")
        text = path.read_text().splitlines()
        assert text == [",".join(CSV_COLUMNS)]

    def test_row_count(self, tmp_path):
        metrics = self._small_metrics()
        path = emit_csv(metrics, tmp_path / "run.csv")
        text = path.read_text().splitlines()
        assert len(text) - 1 == 2 * 2 * 6  # methods x reps x logged steps

    def test_determinism_byte_identical(self, tmp_path):
        a = emit_csv(self._small_metrics(), tmp_path / "a.csv")
        b = emit_csv(self._small_metrics(), tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_infinite_threshold_round_trips(self, tmp_path):
        metrics = RunMetrics(study="gaussian")
        metrics.rows.append(StepRecord("tuc", 0, 5, 1.0, math.inf, None,
                                       math.inf, None, 0.25, None))
        rows = load_csv(emit_csv(metrics, tmp_path / "inf.csv"))
        assert rows[0].threshold == math.inf
        assert rows[0].rank is None

    def test_manifest_records_config_and_version(self, tmp_path):
        from tuconform import __version__
        path = write_manifest(tmp_path / "m.json", {"seed": 3, "alpha": 0.1},
                              notes=("hello",))
        payload = json.loads(path.read_text())
        assert payload["version"] == __version__
        assert payload["config"]["seed"] == 3
        assert "hello" in payload["notes"]


class TestSpambase:
    def test_synthetic_shape_and_load(self, tmp_path):
        path = tmp_path / "synth.csv"
        X, y = synthesize_spambase_like(path, n_rows=200, seed=3)
        assert X.shape == (200, 57)
        X2, y2 = load_spambase(path)
        assert X2.shape == (200, 57)
        np.testing.assert_allclose(X2, np.round(X, 10), rtol=1e-5, atol=1e-8)
        np.testing.assert_array_equal(y2, y)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SpamDataError, match="not found"):
            load_spambase(tmp_path / "nope.csv")

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3\n")
        with pytest.raises(SpamDataError, match="expected 58 columns"):
            load_spambase(path)

    def test_non_numeric_field_diagnostics(self, tmp_path):
        path = tmp_path / "bad.csv"
        row = ["0"] * 58
        row[12] = "spam?"
        path.write_text(",".join(row) + "\n")
        with pytest.raises(SpamDataError, match="column 13"):
            load_spambase(path)

    def test_bad_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        row = ["0"] * 57 + ["2"]
        path.write_text(",".join(row) + "\n")
        with pytest.raises(SpamDataError, match="label"):
            load_spambase(path)

    def test_spam_study_smoke(self):
        X, y = synthesize_spambase_like(n_rows=900, seed=5)
        metrics = run_spam_study("<synthetic>", ("split", "tuc"), alpha=0.1,
                                 delta=0.1, seed=5, stride=60, passes=3,
                                 data=(X, y))
        methods = set(metrics.methods())
        assert {"split", "tuc", "online-tuc", "online-tupac"} <= methods
        for row in metrics.rows:
            assert 0.0 <= row.value <= 1.0
            if row.noninformative is not None:
                assert 0.0 <= row.noninformative <= 1.0
