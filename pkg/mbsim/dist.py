"""Value distributions: sampling, cdf/pdf/quantile, virtual values, hazard class.

Continuous variants delegate the closed forms to frozen ``scipy.stats``
distributions; sampling goes through the caller's numpy Generator so every
draw is tied to a counter-based trial stream.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any, Optional, Tuple, Union

import numpy as np
from scipy import stats

from .errors import DomainError, UnsupportedOperationError, UsageError

ArrayLike = Union[float, np.ndarray]

PROB_SUM_TOL = 1e-12


class HazardClass(str, Enum):
    """Monotonicity of the hazard rate f/(1-F)."""
    MHR = "MHR"
    ANTI_MHR = "AntiMHR"
    CONSTANT = "Constant"
    NEITHER = "Neither"


def _out(x: np.ndarray, like: Any) -> ArrayLike:
    return float(x) if np.ndim(like) == 0 else x


def _check_quantile_arg(q: ArrayLike) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any((arr < 0.0) | (arr > 1.0)):
        raise UsageError(f"quantile level outside [0, 1]: {q}")
    return arr


class DistributionSpec(ABC):
    """A one-dimensional value distribution with nonnegative support."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: Any = None) -> ArrayLike:
        ...

    @abstractmethod
    def cdf(self, v: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def pdf(self, v: ArrayLike) -> ArrayLike:
        ...

    @abstractmethod
    def quantile(self, q: ArrayLike) -> ArrayLike:
        ...

    @property
    @abstractmethod
    def hazard_class(self) -> HazardClass:
        ...

    @abstractmethod
    def to_text(self) -> str:
        ...

    @property
    def is_continuous(self) -> bool:
        return True

    def virtual_value(self, v: ArrayLike) -> ArrayLike:
        raise UnsupportedOperationError(f"virtual value undefined for {self.to_text()}")

    def hazard_rate(self, v: ArrayLike) -> ArrayLike:
        raise UnsupportedOperationError(f"hazard rate undefined for {self.to_text()}")

    def __str__(self) -> str:
        return self.to_text()


class _ContinuousSpec(DistributionSpec):
    """Shared closed forms on top of a frozen scipy distribution."""

    @property
    @abstractmethod
    def _rv(self) -> Any:
        ...

    def cdf(self, v: ArrayLike) -> ArrayLike:
        return _out(self._rv.cdf(v), v)

    def pdf(self, v: ArrayLike) -> ArrayLike:
        return _out(self._rv.pdf(v), v)

    def quantile(self, q: ArrayLike) -> ArrayLike:
        arr = _check_quantile_arg(q)
        return _out(self._rv.ppf(arr), q)

    def virtual_value(self, v: ArrayLike) -> ArrayLike:
        """(1 - F(v)) / f(v); requires positive density at every v."""
        density = np.asarray(self._rv.pdf(v), dtype=float)
        if np.any(density <= 0.0):
            raise DomainError(f"density is zero at {v} for {self.to_text()}")
        return _out(self._rv.sf(v) / density, v)

    def hazard_rate(self, v: ArrayLike) -> ArrayLike:
        survival = np.asarray(self._rv.sf(v), dtype=float)
        if np.any(survival <= 0.0):
            raise DomainError(f"survival is zero at {v} for {self.to_text()}")
        return _out(self._rv.pdf(v) / survival, v)


@dataclass(frozen=True)
class Uniform(_ContinuousSpec):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise UsageError("uniform bounds must be finite")
        if self.lo < 0 or not self.lo < self.hi:
            raise UsageError(f"uniform needs 0 <= lo < hi, got lo={self.lo}, hi={self.hi}")

    @cached_property
    def _rv(self) -> Any:
        return stats.uniform(loc=self.lo, scale=self.hi - self.lo)

    def sample(self, rng: np.random.Generator, size: Any = None) -> ArrayLike:
        return rng.uniform(self.lo, self.hi, size)

    @property
    def hazard_class(self) -> HazardClass:
        return HazardClass.MHR

    def to_text(self) -> str:
        return f"uniform:{self.lo!r},{self.hi!r}"


@dataclass(frozen=True)
class Pareto(_ContinuousSpec):
    """Classical Pareto: F(v) = 1 - (scale/v)^alpha for v >= scale."""
    alpha: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.scale > 0):
            raise UsageError(f"pareto needs alpha > 0 and scale > 0, got {self.alpha}, {self.scale}")

    @cached_property
    def _rv(self) -> Any:
        return stats.pareto(b=self.alpha, scale=self.scale)

    def sample(self, rng: np.random.Generator, size: Any = None) -> ArrayLike:
        # numpy's pareto is the Lomax (shifted) form
        return self.scale * (1.0 + rng.pareto(self.alpha, size))

    @property
    def hazard_class(self) -> HazardClass:
        return HazardClass.ANTI_MHR

    def to_text(self) -> str:
        return f"pareto:{self.alpha!r},{self.scale!r}"


@dataclass(frozen=True)
class Exponential(_ContinuousSpec):
    rate: float = 1.0

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise UsageError(f"exponential needs rate > 0, got {self.rate}")

    @cached_property
    def _rv(self) -> Any:
        return stats.expon(scale=1.0 / self.rate)

    def sample(self, rng: np.random.Generator, size: Any = None) -> ArrayLike:
        return rng.exponential(1.0 / self.rate, size)

    @property
    def hazard_class(self) -> HazardClass:
        return HazardClass.CONSTANT

    def to_text(self) -> str:
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class Discrete(DistributionSpec):
    """Finite support with point masses; support strictly increasing."""
    support: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self) -> None:
        support = tuple(float(v) for v in self.support)
        probs = tuple(float(p) for p in self.probs)
        if not support or len(support) != len(probs):
            raise UsageError("discrete needs matching, non-empty support and probs")
        if any(v < 0 for v in support):
            raise UsageError("discrete support must be nonnegative")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise UsageError("discrete support must be strictly increasing")
        if any(p < 0 for p in probs):
            raise UsageError("discrete probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > PROB_SUM_TOL:
            raise UsageError(f"discrete probabilities sum to {sum(probs)}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @cached_property
    def _support(self) -> np.ndarray:
        return np.array(self.support)

    @cached_property
    def _cum(self) -> np.ndarray:
        return np.cumsum(self.probs)

    @property
    def is_continuous(self) -> bool:
        return False

    def sample(self, rng: np.random.Generator, size: Any = None) -> ArrayLike:
        return rng.choice(self._support, size=size, p=np.array(self.probs))

    def cdf(self, v: ArrayLike) -> ArrayLike:
        idx = np.searchsorted(self._support, v, side="right")
        cum = np.concatenate(([0.0], self._cum))
        return _out(np.minimum(cum[idx], 1.0), v)

    def pdf(self, v: ArrayLike) -> ArrayLike:
        """Point mass at ``v`` (zero off the support)."""
        arr = np.asarray(v, dtype=float)
        idx = np.clip(np.searchsorted(self._support, arr, side="left"), 0, len(self.support) - 1)
        hit = self._support[idx] == arr
        return _out(np.where(hit, np.array(self.probs)[idx], 0.0), v)

    def quantile(self, q: ArrayLike) -> ArrayLike:
        """Smallest support point x with F(x) >= q."""
        arr = _check_quantile_arg(q)
        idx = np.searchsorted(self._cum, arr - PROB_SUM_TOL, side="left")
        idx = np.clip(idx, 0, len(self.support) - 1)
        return _out(self._support[idx], q)

    @property
    def hazard_class(self) -> HazardClass:
        return HazardClass.NEITHER

    def to_text(self) -> str:
        return "discrete:" + ",".join(f"{v!r}@{p!r}" for v, p in zip(self.support, self.probs))


def _floats(body: str, text: str, count: Optional[int] = None) -> Tuple[float, ...]:
    try:
        out = tuple(float(x) for x in body.split(","))
    except ValueError as exc:
        raise UsageError(f"malformed distribution {text!r}") from exc
    if count is not None and len(out) != count:
        raise UsageError(f"distribution {text!r} expects {count} parameters")
    return out


def parse_distribution(text: str) -> DistributionSpec:
    """Parse ``uniform:lo,hi``, ``discrete:v@p,...``, ``pareto:alpha,scale`` or ``exp:rate``."""
    kind, sep, body = text.strip().partition(":")
    if not sep or not body:
        raise UsageError(f"malformed distribution {text!r}")
    kind = kind.lower()
    if kind == "uniform":
        lo, hi = _floats(body, text, 2)
        return Uniform(lo, hi)
    if kind == "pareto":
        alpha, scale = _floats(body, text, 2)
        return Pareto(alpha, scale)
    if kind in ("exp", "exponential"):
        (rate,) = _floats(body, text, 1)
        return Exponential(rate)
    if kind == "discrete":
        support, probs = [], []
        for atom in body.split(","):
            value, at, prob = atom.partition("@")
            if not at:
                raise UsageError(f"discrete atom {atom!r} must look like value@prob")
            try:
                support.append(float(value))
                probs.append(float(prob))
            except ValueError as exc:
                raise UsageError(f"malformed distribution {text!r}") from exc
        return Discrete(tuple(support), tuple(probs))
    raise UsageError(f"unknown distribution kind {kind!r} in {text!r}")


# Module-level spellings of the per-variant methods


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    return float(spec.sample(rng))


def cdf(spec: DistributionSpec, v: ArrayLike) -> ArrayLike:
    return spec.cdf(v)


def pdf(spec: DistributionSpec, v: ArrayLike) -> ArrayLike:
    return spec.pdf(v)


def quantile(spec: DistributionSpec, q: ArrayLike) -> ArrayLike:
    return spec.quantile(q)


def virtual_value(spec: DistributionSpec, v: ArrayLike) -> ArrayLike:
    return spec.virtual_value(v)


def hazard_rate(spec: DistributionSpec, v: ArrayLike) -> ArrayLike:
    return spec.hazard_rate(v)


def hazard_class(spec: DistributionSpec) -> HazardClass:
    return spec.hazard_class
