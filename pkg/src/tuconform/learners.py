"""Nonconformity score families and the online learners that produce them.

A *learner* consumes one observation per ``update`` and can ``freeze`` its
current parameters into an immutable transformation whose ``score(z)``
measures how atypical a point is. Frozen transformations are freely
shareable; learner state is single-writer.

Families: identity (raw scores), absolute residual around a location,
absolute residual of a linear regression, absolute residual of a logistic
classifier, and the conformalized quantile-regression score built from a
pinball-trained quantile pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def sigmoid(z: float) -> float:
    # stable in both tails
    if z >= 0.0:
        ez = math.exp(-z)
        return 1.0 / (1.0 + ez)
    ez = math.exp(z)
    return ez / (1.0 + ez)


# ---------------------------------------------------------------------------
# scores (spec'd as standalone operations; the frozen classes wrap them)
# ---------------------------------------------------------------------------

def abs_residual_location(z: float, center: float) -> float:
    """|z - center|."""
    return abs(float(z) - float(center))


def abs_residual_regression(x, y: float, weights, bias: float) -> float:
    """|y - (w.x + b)|."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.shape != w.shape:
        raise ValueError(f"feature/weight dimension mismatch: {x.shape} vs {w.shape}")
    return abs(float(y) - (float(w @ x) + float(bias)))


def cqr_score(x, y: float, q_lo_model, q_hi_model) -> float:
    """max(q_lo(x) - y, y - q_hi(x)); negative strictly inside the band."""
    lo = float(q_lo_model(x))
    hi = float(q_hi_model(x))
    y = float(y)
    return max(lo - y, y - hi)


# ---------------------------------------------------------------------------
# frozen transformations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityScore:
    """Raw observations used directly as scores."""

    kind = "identity"

    def score(self, z) -> float:
        return float(z)

    def state_dict(self) -> dict:
        return {}

    @classmethod
    def from_state(cls, state: dict) -> "IdentityScore":
        return cls()


@dataclass(frozen=True)
class LocationScore:
    """Absolute residual around a fixed center."""

    center: float
    kind = "location"

    def score(self, z) -> float:
        return abs_residual_location(z, self.center)

    def interval(self, threshold: float) -> tuple[float, float]:
        """Endpoints of {z: |z - center| <= threshold}."""
        return (self.center - threshold, self.center + threshold)

    def state_dict(self) -> dict:
        return {"center": self.center}

    @classmethod
    def from_state(cls, state: dict) -> "LocationScore":
        return cls(center=float(state["center"]))


class LinearRegressionScore:
    """Absolute residual of a frozen linear predictor; z = (x, y)."""

    kind = "linear-regression"

    def __init__(self, weights, bias: float) -> None:
        w = np.array(weights, dtype=np.float64)
        w.setflags(write=False)
        self.weights = w
        self.bias = float(bias)

    def predict(self, x) -> float:
        return float(self.weights @ np.asarray(x, dtype=np.float64)) + self.bias

    def score(self, z) -> float:
        x, y = z
        return abs_residual_regression(x, y, self.weights, self.bias)

    def interval_at(self, x, threshold: float) -> tuple[float, float]:
        mu = self.predict(x)
        return (mu - threshold, mu + threshold)

    def state_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_state(cls, state: dict) -> "LinearRegressionScore":
        return cls(state["weights"], state["bias"])


class LogisticResidualScore:
    """Absolute residual |label - p_hat(x)| of a frozen logistic classifier."""

    kind = "logistic-residual"

    def __init__(self, weights, bias: float) -> None:
        w = np.array(weights, dtype=np.float64)
        w.setflags(write=False)
        self.weights = w
        self.bias = float(bias)

    def predict_proba(self, x) -> float:
        return sigmoid(float(self.weights @ np.asarray(x, dtype=np.float64)) + self.bias)

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        z = np.asarray(X, dtype=np.float64) @ self.weights + self.bias
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def score(self, z) -> float:
        x, y = z
        return abs(float(y) - self.predict_proba(x))

    def label_set_at(self, x, threshold: float) -> tuple[int, ...]:
        p = self.predict_proba(x)
        return tuple(lab for lab in (0, 1) if abs(lab - p) <= threshold)

    def state_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_state(cls, state: dict) -> "LogisticResidualScore":
        return cls(state["weights"], state["bias"])


class QuantilePairScore:
    """CQR score from a frozen pair of linear conditional-quantile models."""

    kind = "quantile-pair"

    def __init__(self, lo_weights, lo_bias: float, hi_weights, hi_bias: float) -> None:
        self._lo = LinearRegressionScore(lo_weights, lo_bias)
        self._hi = LinearRegressionScore(hi_weights, hi_bias)

    def quantiles(self, x) -> tuple[float, float]:
        return (self._lo.predict(x), self._hi.predict(x))

    def score(self, z) -> float:
        x, y = z
        return cqr_score(x, y, self._lo.predict, self._hi.predict)

    def interval_at(self, x, threshold: float) -> tuple[float, float]:
        lo, hi = self.quantiles(x)
        return (lo - threshold, hi + threshold)

    def state_dict(self) -> dict:
        return {
            "lo_weights": self._lo.weights.tolist(), "lo_bias": self._lo.bias,
            "hi_weights": self._hi.weights.tolist(), "hi_bias": self._hi.bias,
        }

    @classmethod
    def from_state(cls, state: dict) -> "QuantilePairScore":
        return cls(state["lo_weights"], state["lo_bias"],
                   state["hi_weights"], state["hi_bias"])


# ---------------------------------------------------------------------------
# online learners
# ---------------------------------------------------------------------------

class _LRSchedule:
    """Constant learning rate by default, optional 1/sqrt(t) decay."""

    def __init__(self, lr: float, decay: bool) -> None:
        if not lr > 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.lr = float(lr)
        self.decay = bool(decay)
        self.updates = 0

    def next_rate(self) -> float:
        self.updates += 1
        if self.decay:
            return self.lr / math.sqrt(self.updates)
        return self.lr


def _check_finite_gradient(*parts) -> None:
    for part in parts:
        arr = np.asarray(part, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite gradient; check inputs and learning rate")


def _check_features(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dim,):
        raise ValueError(f"expected feature shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature vector")
    return x


class IdentityLearner:
    """No-op learner: observations are their own scores."""

    kind = "identity"

    def update(self, z) -> None:
        pass

    def freeze(self) -> IdentityScore:
        return IdentityScore()

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state: dict) -> None:
        pass


class RunningMeanEstimator:
    """Running mean of the observations consumed so far.

    Accumulates the plain sum (matching a prefix-sum evaluation bit for
    bit); freezing yields the absolute-residual-around-the-mean
    transformation, with the configured initial center before any update.
    """

    kind = "running-mean"

    def __init__(self, initial_center: float = 0.0) -> None:
        self.initial_center = float(initial_center)
        self.n = 0
        self.total = 0.0

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n > 0 else self.initial_center

    def update(self, z) -> None:
        z = float(z)
        if not math.isfinite(z):
            raise ValueError(f"observations must be finite, got {z!r}")
        self.n += 1
        self.total += z

    def freeze(self) -> LocationScore:
        return LocationScore(self.mean)

    def state_dict(self) -> dict:
        return {"initial_center": self.initial_center, "n": self.n, "total": self.total}

    def load_state_dict(self, state: dict) -> None:
        self.initial_center = float(state["initial_center"])
        self.n = int(state["n"])
        self.total = float(state["total"])


class SGDLinearRegressor:
    """Linear model trained by SGD on the squared loss; z = (x, y)."""

    kind = "sgd-linear"

    def __init__(self, dim: int, lr: float = 0.01, decay: bool = False) -> None:
        self.dim = int(dim)
        self.w = np.zeros(self.dim, dtype=np.float64)
        self.b = 0.0
        self._schedule = _LRSchedule(lr, decay)

    def predict(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=np.float64)) + self.b

    def update(self, z) -> None:
        x, y = z
        x = _check_features(x, self.dim)
        residual = self.predict(x) - float(y)
        grad_w = 2.0 * residual * x
        grad_b = 2.0 * residual
        _check_finite_gradient(grad_w, grad_b)
        rate = self._schedule.next_rate()
        self.w -= rate * grad_w
        self.b -= rate * grad_b

    def freeze(self) -> LinearRegressionScore:
        return LinearRegressionScore(self.w, self.b)

    def state_dict(self) -> dict:
        return {"dim": self.dim, "w": self.w.tolist(), "b": self.b,
                "lr": self._schedule.lr, "decay": self._schedule.decay,
                "updates": self._schedule.updates}

    def load_state_dict(self, state: dict) -> None:
        self.dim = int(state["dim"])
        self.w = np.asarray(state["w"], dtype=np.float64).copy()
        self.b = float(state["b"])
        self._schedule = _LRSchedule(state["lr"], state["decay"])
        self._schedule.updates = int(state["updates"])


class SGDLogisticClassifier:
    """Logistic model trained by SGD on the log loss; z = (x, label)."""

    kind = "sgd-logistic"

    def __init__(self, dim: int, lr: float = 0.1, decay: bool = False) -> None:
        self.dim = int(dim)
        self.w = np.zeros(self.dim, dtype=np.float64)
        self.b = 0.0
        self._schedule = _LRSchedule(lr, decay)

    def predict_proba(self, x) -> float:
        return sigmoid(float(self.w @ np.asarray(x, dtype=np.float64)) + self.b)

    def update(self, z) -> None:
        x, label = z
        x = _check_features(x, self.dim)
        label = float(label)
        if label not in (0.0, 1.0):
            raise ValueError(f"labels must be 0 or 1, got {label}")
        err = self.predict_proba(x) - label
        grad_w = err * x
        grad_b = err
        _check_finite_gradient(grad_w, grad_b)
        rate = self._schedule.next_rate()
        self.w -= rate * grad_w
        self.b -= rate * grad_b

    def freeze(self) -> LogisticResidualScore:
        return LogisticResidualScore(self.w, self.b)

    def state_dict(self) -> dict:
        return {"dim": self.dim, "w": self.w.tolist(), "b": self.b,
                "lr": self._schedule.lr, "decay": self._schedule.decay,
                "updates": self._schedule.updates}

    def load_state_dict(self, state: dict) -> None:
        self.dim = int(state["dim"])
        self.w = np.asarray(state["w"], dtype=np.float64).copy()
        self.b = float(state["b"])
        self._schedule = _LRSchedule(state["lr"], state["decay"])
        self._schedule.updates = int(state["updates"])


class PinballSGDRegressor:
    """Linear conditional-quantile model trained by pinball-loss subgradient steps."""

    kind = "pinball-sgd"

    def __init__(self, dim: int, tau: float, lr: float = 0.01, decay: bool = False) -> None:
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {tau}")
        self.dim = int(dim)
        self.tau = float(tau)
        self.w = np.zeros(self.dim, dtype=np.float64)
        self.b = 0.0
        self._schedule = _LRSchedule(lr, decay)

    def predict(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=np.float64)) + self.b

    def update(self, z) -> None:
        x, y = z
        x = _check_features(x, self.dim)
        pred = self.predict(x)
        y = float(y)
        # subgradient of the pinball loss in the prediction
        if y > pred:
            g = -self.tau
        elif y < pred:
            g = 1.0 - self.tau
        else:
            g = 0.0
        grad_w = g * x
        _check_finite_gradient(grad_w, g)
        rate = self._schedule.next_rate()
        self.w -= rate * grad_w
        self.b -= rate * g

    def freeze(self) -> LinearRegressionScore:
        return LinearRegressionScore(self.w, self.b)

    def state_dict(self) -> dict:
        return {"dim": self.dim, "tau": self.tau, "w": self.w.tolist(), "b": self.b,
                "lr": self._schedule.lr, "decay": self._schedule.decay,
                "updates": self._schedule.updates}

    def load_state_dict(self, state: dict) -> None:
        self.dim = int(state["dim"])
        self.tau = float(state["tau"])
        self.w = np.asarray(state["w"], dtype=np.float64).copy()
        self.b = float(state["b"])
        self._schedule = _LRSchedule(state["lr"], state["decay"])
        self._schedule.updates = int(state["updates"])


class QuantilePairLearner:
    """Pinball-trained lower/upper quantile pair producing the CQR score."""

    kind = "quantile-pair-learner"

    def __init__(self, dim: int, alpha: float, lr: float = 0.01, decay: bool = False) -> None:
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha = float(alpha)
        self.lo = PinballSGDRegressor(dim, tau=alpha / 2.0, lr=lr, decay=decay)
        self.hi = PinballSGDRegressor(dim, tau=1.0 - alpha / 2.0, lr=lr, decay=decay)

    def update(self, z) -> None:
        self.lo.update(z)
        self.hi.update(z)

    def freeze(self) -> QuantilePairScore:
        return QuantilePairScore(self.lo.w, self.lo.b, self.hi.w, self.hi.b)

    def state_dict(self) -> dict:
        return {"alpha": self.alpha, "lo": self.lo.state_dict(), "hi": self.hi.state_dict()}

    def load_state_dict(self, state: dict) -> None:
        self.alpha = float(state["alpha"])
        self.lo.load_state_dict(state["lo"])
        self.hi.load_state_dict(state["hi"])


LEARNER_KINDS = {
    cls.kind: cls
    for cls in (IdentityLearner, RunningMeanEstimator, SGDLinearRegressor,
                SGDLogisticClassifier, PinballSGDRegressor)
}
LEARNER_KINDS[QuantilePairLearner.kind] = QuantilePairLearner

TRANSFORMATION_KINDS = {
    cls.kind: cls
    for cls in (IdentityScore, LocationScore, LinearRegressionScore,
                LogisticResidualScore, QuantilePairScore)
}


def restore_learner(kind: str, state: dict):
    """Rebuild a learner from its snapshot kind/state pair."""
    cls = LEARNER_KINDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown learner kind {kind!r}")
    if kind == "identity":
        return cls()
    if kind == "running-mean":
        learner = cls()
    elif kind == "pinball-sgd":
        learner = cls(dim=int(state["dim"]), tau=float(state["tau"]))
    elif kind == "quantile-pair-learner":
        learner = cls(dim=int(state["lo"]["dim"]), alpha=float(state["alpha"]))
    else:
        learner = cls(dim=int(state["dim"]))
    learner.load_state_dict(state)
    return learner


def restore_transformation(kind: str, state: dict):
    """Rebuild a frozen transformation from its snapshot kind/state pair."""
    cls = TRANSFORMATION_KINDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown transformation kind {kind!r}")
    return cls.from_state(state)
