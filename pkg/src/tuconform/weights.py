"""Budget-allocation weight functions over the nonnegative integers.

A ``WeightPmf`` spreads the miscoverage budget across time steps (or epoch
indices): it is a PMF h on {0, 1, 2, ...} with cached prefix sums, queried
for point masses, prefix masses and contiguous window masses. Supported
families: discretized log-normal (the floor of a log-normal variate),
Poisson, geometric, and explicit finite tables.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy import special as _sp

_SQRT2 = math.sqrt(2.0)


def _phi_interval(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Phi(b) - Phi(a) elementwise for b >= a, accurate in both tails.

    Same-sign intervals go through erfc so deep-tail masses keep relative
    precision instead of cancelling against 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    upper = 0.5 * (_sp.erfc(a / _SQRT2) - _sp.erfc(b / _SQRT2))
    lower = 0.5 * (_sp.erfc(-b / _SQRT2) - _sp.erfc(-a / _SQRT2))
    middle = 0.5 * (_sp.erf(b / _SQRT2) - _sp.erf(a / _SQRT2))
    out = np.where(a >= 0.0, upper, np.where(b <= 0.0, lower, middle))
    return np.maximum(out, 0.0)


class WeightPmf:
    """PMF over nonnegative integers with memoized prefix sums.

    Subclasses provide ``_pmf_block`` (vectorized point masses over an index
    range) and ``default_horizon`` (where the mass is numerically exhausted).
    Prefix caches grow lazily toward the largest queried index; extension is
    serialized behind a lock while readers see a consistent array reference.
    """

    kind: str = "abstract"

    def __init__(self) -> None:
        self._h = np.empty(0, dtype=np.float64)
        self._P = np.empty(0, dtype=np.float64)
        self._lock = threading.Lock()

    # -- subclass surface ---------------------------------------------------

    def _pmf_block(self, start: int, stop: int) -> np.ndarray:
        raise NotImplementedError

    def default_horizon(self) -> int:
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError

    # -- cache management ---------------------------------------------------

    def _ensure(self, t: int) -> None:
        if t < len(self._h):
            return
        with self._lock:
            if t < len(self._h):
                return
            new_len = max(t + 1, 2 * len(self._h), 1024)
            old_len = len(self._h)
            h = np.empty(new_len, dtype=np.float64)
            h[:old_len] = self._h
            h[old_len:] = self._pmf_block(old_len, new_len)
            P = np.cumsum(h)
            np.minimum(P, 1.0, out=P)
            self._h = h
            self._P = P

    # -- queries --------------------------------------------------------------

    def pmf(self, t: int) -> float:
        """Point mass h(t)."""
        t = self._check_index(t)
        self._ensure(t)
        return float(self._h[t])

    def prefix_mass(self, t: int) -> float:
        """Cumulative mass P(t) = sum of h(s) for s <= t; nondecreasing in t."""
        t = self._check_index(t)
        self._ensure(t)
        return float(self._P[t])

    def tail_mass(self, t: int) -> float:
        """1 - P(t), the budget left strictly after t."""
        return max(0.0, 1.0 - self.prefix_mass(t))

    def window_mass(self, lo: int, hi: int) -> float:
        """Sum of h(s) for lo <= s <= hi, via prefix-sum difference."""
        lo = self._check_index(lo)
        hi = self._check_index(hi)
        if lo > hi:
            raise ValueError(f"window requires lo <= hi, got [{lo}, {hi}]")
        self._ensure(hi)
        upper = self._P[hi]
        lower = self._P[lo - 1] if lo > 0 else 0.0
        return float(max(0.0, upper - lower))

    def pmf_range(self, stop: int) -> np.ndarray:
        """h(0), ..., h(stop - 1) as an array (read-only view of the cache)."""
        if stop <= 0:
            return np.empty(0, dtype=np.float64)
        self._ensure(stop - 1)
        view = self._h[:stop]
        view.flags.writeable = False
        return view

    def mass_up_to(self, horizon: int, chunk: int = 1 << 20) -> float:
        """Total mass on [0, horizon], summed in chunks without caching.

        Used by normalization checks at horizons far beyond run lengths.
        """
        horizon = self._check_index(horizon)
        total = 0.0
        start = 0
        while start <= horizon:
            stop = min(start + chunk, horizon + 1)
            total += float(math.fsum(self._pmf_block(start, stop)))
            start = stop
        return total

    @staticmethod
    def _check_index(t) -> int:
        it = int(t)
        if it != t or it < 0:
            raise ValueError(f"index must be a nonnegative integer, got {t!r}")
        return it

    def __repr__(self) -> str:  # pragma: no cover
        return f"{type(self).__name__}({self.spec_string()!r})"


class DiscretizedLogNormalWeights(WeightPmf):
    """PMF of floor(X) where log X ~ N(mu, sigma^2).

    h(t) = Phi((ln(t+1) - mu)/sigma) - Phi((ln t - mu)/sigma) for t >= 1 and
    h(0) = Phi(-mu/sigma), which is the floor definition applied at zero.
    """

    kind = "lognormal"

    def __init__(self, mu: float, sigma: float) -> None:
        if not math.isfinite(mu):
            raise ValueError(f"mu must be finite, got {mu}")
        if not (math.isfinite(sigma) and sigma > 0):
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        super().__init__()

    def _pmf_block(self, start: int, stop: int) -> np.ndarray:
        edges = np.arange(start, stop + 1, dtype=np.float64)
        with np.errstate(divide="ignore"):
            z = (np.log(edges) - self.mu) / self.sigma
        return _phi_interval(z[:-1], z[1:])

    def default_horizon(self) -> int:
        return max(1024, int(math.ceil(10.0 * math.exp(self.mu + self.sigma))))

    def spec_string(self) -> str:
        return f"lognormal mu={self.mu:g} sigma={self.sigma:g}"


class PoissonWeights(WeightPmf):
    """Poisson(rate) point masses."""

    kind = "poisson"

    def __init__(self, rate: float) -> None:
        if not (math.isfinite(rate) and rate > 0):
            raise ValueError(f"rate must be positive, got {rate}")
        self.rate = float(rate)
        super().__init__()

    def _pmf_block(self, start: int, stop: int) -> np.ndarray:
        t = np.arange(start, stop, dtype=np.float64)
        logp = t * math.log(self.rate) - self.rate - _sp.gammaln(t + 1.0)
        return np.exp(logp)

    def default_horizon(self) -> int:
        return int(self.rate + 20.0 * math.sqrt(self.rate) + 64)

    def spec_string(self) -> str:
        return f"poisson rate={self.rate:g}"


class GeometricWeights(WeightPmf):
    """Geometric on {0, 1, ...}: h(t) = rho (1 - rho)^t."""

    kind = "geometric"

    def __init__(self, rho: float) -> None:
        if not (math.isfinite(rho) and 0.0 < rho <= 1.0):
            raise ValueError(f"rho must lie in (0, 1], got {rho}")
        self.rho = float(rho)
        super().__init__()

    def _pmf_block(self, start: int, stop: int) -> np.ndarray:
        t = np.arange(start, stop, dtype=np.float64)
        if self.rho == 1.0:
            return np.where(t == 0, 1.0, 0.0)
        return self.rho * np.exp(t * math.log1p(-self.rho))

    def default_horizon(self) -> int:
        if self.rho == 1.0:
            return 1
        return int(math.ceil(math.log(1e-15) / math.log1p(-self.rho))) + 1

    def spec_string(self) -> str:
        return f"geometric rho={self.rho:g}"


class TableWeights(WeightPmf):
    """Explicit finite-support table; h(t) = 0 beyond the table."""

    kind = "table"

    def __init__(self, values) -> None:
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 1 or len(vals) == 0:
            raise ValueError("table weights require a nonempty 1-D sequence")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("table weights must be finite and nonnegative")
        total = float(math.fsum(vals))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"table weights must sum to 1, got {total}")
        self.values = vals
        super().__init__()

    def _pmf_block(self, start: int, stop: int) -> np.ndarray:
        out = np.zeros(stop - start, dtype=np.float64)
        upper = min(stop, len(self.values))
        if upper > start:
            out[: upper - start] = self.values[start:upper]
        return out

    def default_horizon(self) -> int:
        return len(self.values)

    def spec_string(self) -> str:
        return "table " + ",".join(f"{v:g}" for v in self.values)


def lognormal_weights(mu: float, sigma: float) -> DiscretizedLogNormalWeights:
    return DiscretizedLogNormalWeights(mu, sigma)


def poisson_weights(rate: float) -> PoissonWeights:
    return PoissonWeights(rate)


def geometric_weights(rho: float) -> GeometricWeights:
    return GeometricWeights(rho)


def table_weights(values) -> TableWeights:
    return TableWeights(values)


_KIND_ALIASES = {
    "lognormal": "lognormal",
    "log-normal": "lognormal",
    "poisson": "poisson",
    "geometric": "geometric",
    "table": "table",
}


def parse_weight_spec(text: str) -> WeightPmf:
    """Build a WeightPmf from a config string.

    Examples: ``lognormal mu=11 sigma=1``, ``poisson rate=100``,
    ``geometric rho=0.05``, ``table 0.2,0.8``.
    """
    tokens = text.strip().split()
    if not tokens:
        raise ValueError("empty weight-function spec")
    kind = _KIND_ALIASES.get(tokens[0].lower())
    if kind is None:
        raise ValueError(f"unknown weight-function kind {tokens[0]!r}")
    if kind == "table":
        if len(tokens) != 2:
            raise ValueError("table spec expects a single comma-separated value list")
        return TableWeights([float(v) for v in tokens[1].split(",")])
    params: dict[str, float] = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValueError(f"expected key=value parameter, got {tok!r}")
        key, _, val = tok.partition("=")
        params[key.strip().lower()] = float(val)
    if kind == "lognormal":
        built: WeightPmf = DiscretizedLogNormalWeights(params.pop("mu"), params.pop("sigma"))
    elif kind == "poisson":
        rate = params.pop("rate", None)
        if rate is None:
            rate = params.pop("lambda")
        built = PoissonWeights(rate)
    else:
        built = GeometricWeights(params.pop("rho"))
    if params:
        raise ValueError(f"unexpected weight-function parameters: {sorted(params)}")
    return built
