"""Maximum-weight bipartite matching and unit-demand VCG.

The optimum itself comes from scipy's shortest-augmenting-path assignment
solver. Among optimal matchings we return the lexicographically smallest,
comparing bidders in ascending order by assigned item (unassigned last), so
equal-weight ties always resolve the same way.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Assignment, Outcome, ValueProfile, welfare

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12


@dataclass(frozen=True)
class MatchingResult:
    assignment: Assignment
    total_weight: float


def optimal_weight(values: np.ndarray) -> float:
    """Weight of a maximum-weight matching of a nonnegative matrix."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(values, maximize=True)
    return float(values[rows, cols].sum())


def _solve_with(
    values: np.ndarray, fixed: Dict[int, int], dropped: List[int]
) -> Tuple[float, Dict[int, int]]:
    """Best matching that keeps ``fixed`` pairs and leaves ``dropped`` bidders out."""
    n, m = values.shape
    taken_rows = set(fixed) | set(dropped)
    taken_cols = set(fixed.values())
    rows = [i for i in range(n) if i not in taken_rows]
    cols = [j for j in range(m) if j not in taken_cols]
    total = float(sum(values[i, j] for i, j in fixed.items()))
    pairs = dict(fixed)
    if rows and cols:
        sub = values[np.ix_(rows, cols)]
        r, c = linear_sum_assignment(sub, maximize=True)
        total += float(sub[r, c].sum())
        pairs.update({rows[a]: cols[b] for a, b in zip(r, c)})
    return total, pairs


def max_weight_matching(profile: ValueProfile) -> MatchingResult:
    """Maximum-weight partial matching with deterministic tie-break."""
    values = profile.values
    best, current = _solve_with(values, {}, [])
    tol = TIE_TOL * max(1.0, abs(best))

    fixed: Dict[int, int] = {}
    dropped: List[int] = []
    for bidder in range(profile.n):
        target: Optional[int] = current.get(bidder)
        used = set(fixed.values())
        limit = target if target is not None else profile.m
        chosen = target
        for item in range(limit):
            if item in used:
                continue
            weight, pairs = _solve_with(values, {**fixed, bidder: item}, dropped)
            if weight >= best - tol:
                chosen, current = item, pairs
                break
        if chosen is None:
            dropped.append(bidder)
        else:
            fixed[bidder] = chosen

    assignment = Assignment.from_mapping(fixed)
    return MatchingResult(assignment=assignment, total_weight=welfare(profile, assignment))


def vcg(profile: ValueProfile) -> Outcome:
    """Efficient matching; each winner pays the externality imposed on the others."""
    result = max_weight_matching(profile)
    values = profile.values
    prices: Dict[int, float] = {}
    for bidder, item in result.assignment.pairs:
        without = optimal_weight(np.delete(values, bidder, axis=0)) if profile.n > 1 else 0.0
        others_with = result.total_weight - float(values[bidder, item])
        prices[bidder] = max(0.0, without - others_with)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("vcg pairs=%s prices=%s", result.assignment.pairs, prices)
    return Outcome.build(profile.n, result.assignment.pairs, prices)
