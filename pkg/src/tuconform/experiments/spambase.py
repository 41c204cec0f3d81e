"""Spambase-format ingestion and a synthetic same-shape stand-in.

The real dataset is a comma-separated file of 57 numeric per-email features
followed by a {0,1} spam label (58 columns, 4601 rows). The loader is
strict: malformed rows are rejected loudly with row/column diagnostics, not
skipped. ``synthesize_spambase_like`` generates a dataset with the same
shape and a learnable logistic signal for tests and demos where the real
file is unavailable.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

N_FEATURES = 57


class SpamDataError(ValueError):
    """Raised on malformed spambase-format input."""


def load_spambase(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a spambase-format CSV into (features, labels).

    Returns X with shape (n, 57) and y with values in {0, 1}.
    """
    path = Path(path)
    if not path.exists():
        raise SpamDataError(f"spambase file not found: {path}")
    features: list[list[float]] = []
    labels: list[int] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != N_FEATURES + 1:
                raise SpamDataError(
                    f"{path}:{lineno}: expected {N_FEATURES + 1} columns, got {len(parts)}")
            try:
                row = [float(v) for v in parts]
            except ValueError as exc:
                bad = next(i for i, v in enumerate(parts) if not _is_number(v))
                raise SpamDataError(
                    f"{path}:{lineno}: non-numeric field in column {bad + 1}: {parts[bad]!r}"
                ) from exc
            if not all(math.isfinite(v) for v in row):
                raise SpamDataError(f"{path}:{lineno}: non-finite value")
            label = row[-1]
            if label not in (0.0, 1.0):
                raise SpamDataError(
                    f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            features.append(row[:-1])
            labels.append(int(label))
    if not features:
        raise SpamDataError(f"{path}: no data rows")
    return np.asarray(features, dtype=np.float64), np.asarray(labels, dtype=np.int64)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def synthesize_spambase_like(path=None, n_rows: int = 4601, seed: int = 2024,
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Generate a spambase-shaped dataset with a logistic ground truth.

    Features are nonnegative and right-skewed like word/character
    frequencies; labels follow a logistic model with enough signal for a
    linear classifier to be informative but not perfect. Writes CSV to
    ``path`` when given, and returns (X, y) either way.
    """
    rng = np.random.default_rng(seed)
    X = rng.gamma(shape=0.6, scale=1.2, size=(n_rows, N_FEATURES))
    sparsity = rng.random((n_rows, N_FEATURES)) < 0.55
    X[sparsity] = 0.0
    truth = rng.standard_normal(N_FEATURES) * 1.1
    logits = (X - X.mean(axis=0)) @ truth / math.sqrt(N_FEATURES) * 5.0
    y = (rng.random(n_rows) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int64)
    if path is not None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for i in range(n_rows):
                cells = [f"{v:.6g}" for v in X[i]]
                cells.append(str(int(y[i])))
                fh.write(",".join(cells) + "\n")
    return X, y


def fit_standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature affine scaling (mean, scale) fitted on the training split only."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def standardize(X: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return (X - mean) / scale
