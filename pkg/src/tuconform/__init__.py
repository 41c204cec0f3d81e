"""Anytime-valid (time-uniform) conformal and PAC prediction sets for IID streams.

Core pieces:

* ``SequentialCalibrator`` -- fixed-transformation streaming quantile rules
  (split conformal baseline plus the time-uniform cs/tuc/tupac rules).
* ``EpochEngine`` -- online prediction with geometrically refreshed
  transformations and per-epoch calibration windows.
* ``WeightPmf`` families -- the budget-allocation weight functions.
* ``tuconform.experiments`` -- simulation/real-data study drivers and a CLI.
"""

from .calibrators import (
    InfeasibleCalibrationError,
    PredictionReport,
    SequentialCalibrator,
    compute_t0,
    cs_offset,
    method_rank,
    offset_series,
    rank_series,
    tuc_offset,
    tupac_offset,
)
from .online import (
    CandidateReport,
    EngineReport,
    EpochEngine,
    IntervalSet,
    LabelSet,
    ScoreSublevelSet,
    WindowPlan,
    build_window_plan,
    calibration_count,
    compute_tk,
    epoch_start,
    online_tuc_offset,
    online_tupac_offset,
    set_size,
    window_last_step,
    window_sum_limit,
)
from .special import bernoulli_kl, invert_kl_rank, normal_cdf, normal_quantile
from .tracker import ScoreTracker
from .weights import (
    DiscretizedLogNormalWeights,
    GeometricWeights,
    PoissonWeights,
    TableWeights,
    WeightPmf,
    geometric_weights,
    lognormal_weights,
    parse_weight_spec,
    poisson_weights,
    table_weights,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "bernoulli_kl", "invert_kl_rank", "normal_cdf", "normal_quantile",
    "WeightPmf", "DiscretizedLogNormalWeights", "PoissonWeights",
    "GeometricWeights", "TableWeights", "lognormal_weights", "poisson_weights",
    "geometric_weights", "table_weights", "parse_weight_spec",
    "ScoreTracker",
    "SequentialCalibrator", "PredictionReport", "InfeasibleCalibrationError",
    "compute_t0", "cs_offset", "tuc_offset", "tupac_offset", "method_rank",
    "rank_series", "offset_series",
    "EpochEngine", "EngineReport", "CandidateReport", "WindowPlan",
    "build_window_plan", "compute_tk", "online_tuc_offset", "online_tupac_offset",
    "epoch_start", "window_last_step", "window_sum_limit", "calibration_count",
    "IntervalSet", "ScoreSublevelSet", "LabelSet", "set_size",
]
