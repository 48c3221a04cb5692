"""Statistical estimators for Monte Carlo samples.

Means come with sample standard errors and normal 95% intervals; ratios of
means use the delta method on paired samples; paired differences report a
z-score and a one-sided p-value.
"""

import logging
import math
from typing import Sequence, Union

import numpy as np
from scipy.stats import norm

from .schemas import CheckResult, EstimateWithCI, PairedComparison

logger = logging.getLogger(__name__)

Samples = Union[Sequence[float], np.ndarray]


def estimate(samples: Samples) -> EstimateWithCI:
    """Mean and standard error of i.i.d. samples."""
    arr = np.asarray(samples, dtype=float)
    count = len(arr)
    if count == 0:
        raise ValueError("cannot estimate from zero samples")
    mean = float(np.mean(arr))
    stderr = float(np.std(arr, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return EstimateWithCI(mean=mean, stderr=stderr, trials=count)


def z_score(mean: float, stderr: float) -> float:
    """mean / stderr; an exactly zero mean with zero stderr scores 0."""
    if stderr > 0:
        return mean / stderr
    if mean == 0:
        return 0.0
    return math.copysign(math.inf, mean)


def paired_difference(a: Samples, b: Samples) -> PairedComparison:
    """Compare paired samples a and b through their per-trial differences."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    diff = estimate(a - b)
    z = z_score(diff.mean, diff.stderr)
    return PairedComparison(difference=diff, z=z, p_value=float(norm.sf(z)))


def ratio_estimate(numerator: Samples, denominator: Samples) -> EstimateWithCI:
    """E[num] / E[den] with a delta-method standard error on paired samples."""
    num = np.asarray(numerator, dtype=float)
    den = np.asarray(denominator, dtype=float)
    if num.shape != den.shape or len(num) == 0:
        raise ValueError("ratio needs paired, non-empty samples")
    count = len(num)
    den_mean = float(np.mean(den))
    if den_mean == 0.0:
        logger.warning("ratio denominator has zero mean over %d trials", count)
        return EstimateWithCI(mean=math.nan, stderr=math.nan, trials=count)
    ratio = float(np.mean(num)) / den_mean
    if count > 1:
        residual = num - ratio * den
        stderr = float(np.std(residual, ddof=1) / math.sqrt(count)) / abs(den_mean)
    else:
        stderr = 0.0
    return EstimateWithCI(mean=ratio, stderr=stderr, trials=count)


def check_at_least(name: str, est: EstimateWithCI, bound: float,
                   sigmas: float = 3.0, gating: bool = True) -> CheckResult:
    """Pass when ``est`` is no more than ``sigmas`` standard errors below ``bound``."""
    return CheckResult(
        name=name,
        measured=est.mean,
        bound=bound,
        relation="ge",
        passed=bool(est.mean >= bound - sigmas * est.stderr),
        stderr=est.stderr,
        slack=sigmas,
        gating=gating,
    )


def check_at_most(name: str, est: EstimateWithCI, bound: float,
                  sigmas: float = 3.0, gating: bool = True) -> CheckResult:
    """Pass when ``est`` is no more than ``sigmas`` standard errors above ``bound``."""
    return CheckResult(
        name=name,
        measured=est.mean,
        bound=bound,
        relation="le",
        passed=bool(est.mean <= bound + sigmas * est.stderr),
        stderr=est.stderr,
        slack=sigmas,
        gating=gating,
    )


def check_close(name: str, measured: float, expected: float, tol: float,
                gating: bool = True) -> CheckResult:
    """Exact (deterministic) check |measured - expected| <= tol."""
    return CheckResult(
        name=name,
        measured=measured,
        bound=expected,
        relation="approx",
        passed=bool(abs(measured - expected) <= tol),
        slack=tol,
        gating=gating,
    )


def check_within(name: str, est: EstimateWithCI, expected: float,
                 sigmas: float = 3.0, gating: bool = True) -> CheckResult:
    """Pass when ``est`` lies within ``sigmas`` standard errors of ``expected``."""
    return CheckResult(
        name=name,
        measured=est.mean,
        bound=expected,
        relation="approx",
        passed=bool(abs(est.mean - expected) <= sigmas * est.stderr),
        stderr=est.stderr,
        slack=sigmas,
        gating=gating,
    )
