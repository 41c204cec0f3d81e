"""Experiment drivers, synthetic streams, metrics and the CLI."""

from .metrics import RunMetrics, StepRecord, true_content_gaussian
from .streams import StreamSpec

__all__ = ["RunMetrics", "StepRecord", "StreamSpec", "true_content_gaussian"]
