"""Quantile-space virtual values and their ironing.

theta(q) is the virtual value at the value whose upper tail has mass q,
i.e. theta(q) = phi(F^-1(1 - q)). Ironing replaces the cumulative of theta by
its least concave majorant and reads the slopes back off, giving a
nonincreasing ironed curve.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

from .dist import DistributionSpec
from .errors import UnsupportedOperationError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 4096
MIN_GRID_SIZE = 16


@dataclass(frozen=True, eq=False)
class ThetaCurve:
    """theta on K cells of [0, 1] and its left-Riemann cumulative.

    ``grid`` has K + 1 points k/K, ``theta`` K midpoint values and
    ``cumulative`` K + 1 partial sums starting at 0.
    """
    grid: np.ndarray
    theta: np.ndarray
    cumulative: np.ndarray

    @property
    def grid_size(self) -> int:
        return len(self.theta)

    @property
    def q_mid(self) -> np.ndarray:
        return 0.5 * (self.grid[:-1] + self.grid[1:])


@dataclass(frozen=True, eq=False)
class IroningResult:
    grid: np.ndarray
    theta: np.ndarray
    ironed_theta: np.ndarray
    hull: np.ndarray

    @property
    def q_mid(self) -> np.ndarray:
        return 0.5 * (self.grid[:-1] + self.grid[1:])

    def to_rows(self) -> List[Dict[str, float]]:
        return [
            {"q_mid": float(q), "theta": float(t), "ironed_theta": float(s)}
            for q, t, s in zip(self.q_mid, self.theta, self.ironed_theta)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid_size": len(self.theta),
            "theta_min": float(self.theta.min()),
            "theta_max": float(self.theta.max()),
            "ironed_min": float(self.ironed_theta.min()),
            "ironed_max": float(self.ironed_theta.max()),
            "max_abs_change": float(np.max(np.abs(self.ironed_theta - self.theta))),
        }


def build_curve(spec: DistributionSpec, grid_size: int = DEFAULT_GRID_SIZE) -> ThetaCurve:
    """Evaluate theta at cell midpoints and accumulate it.

    Args:
        spec: Continuous value distribution
        grid_size: Number of cells K (at least 16)

    Returns:
        ThetaCurve on the uniform grid k/K
    """
    if grid_size < MIN_GRID_SIZE:
        raise UsageError(f"grid size must be >= {MIN_GRID_SIZE}, got {grid_size}")
    if not spec.is_continuous:
        raise UnsupportedOperationError(f"cannot iron discrete distribution {spec.to_text()}")

    grid = np.arange(grid_size + 1, dtype=float) / grid_size
    q_mid = (np.arange(grid_size, dtype=float) + 0.5) / grid_size
    values = np.asarray(spec.quantile(1.0 - q_mid), dtype=float)
    theta = np.asarray(spec.virtual_value(values), dtype=float)
    cumulative = np.concatenate(([0.0], np.cumsum(theta) / grid_size))
    return ThetaCurve(grid=grid, theta=theta, cumulative=cumulative)


def _upper_hull(x: List[float], y: List[float]) -> List[int]:
    """Indices of the least concave majorant's vertices (monotone chain)."""
    hull: List[int] = []
    for k in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[k] - y[o]) - (y[a] - y[o]) * (x[k] - x[o])
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(k)
    return hull


def iron(grid: np.ndarray, cumulative: np.ndarray) -> IroningResult:
    """Iron a cumulative curve sampled on ``grid``.

    ``theta`` in the result is the slope of ``cumulative`` per cell and
    ``ironed_theta`` the slope of its concave hull, which is nonincreasing.
    """
    grid = np.asarray(grid, dtype=float)
    cumulative = np.asarray(cumulative, dtype=float)
    if grid.ndim != 1 or grid.shape != cumulative.shape or len(grid) < 2:
        raise UsageError("grid and cumulative must be 1-D arrays of equal length >= 2")
    widths = np.diff(grid)
    if np.any(widths <= 0):
        raise UsageError("grid must be strictly increasing")

    vertices = _upper_hull(grid.tolist(), cumulative.tolist())
    hull = np.interp(grid, grid[vertices], cumulative[vertices])
    theta = np.diff(cumulative) / widths
    ironed = np.diff(hull) / widths
    logger.debug("ironed %d cells onto %d hull vertices", len(widths), len(vertices))
    return IroningResult(grid=grid, theta=theta, ironed_theta=ironed, hull=hull)


def iron_distribution(spec: DistributionSpec, grid_size: int = DEFAULT_GRID_SIZE) -> IroningResult:
    """Build and iron the curve of ``spec``, keeping the exact midpoint theta."""
    curve = build_curve(spec, grid_size)
    result = iron(curve.grid, curve.cumulative)
    return IroningResult(
        grid=result.grid,
        theta=curve.theta,
        ironed_theta=result.ironed_theta,
        hull=result.hull,
    )
