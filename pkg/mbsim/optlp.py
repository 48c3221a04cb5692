"""Exact optimal BIC mechanisms for finite type spaces.

A finite instance lists, per bidder, a small set of types (a value vector
and its probability); types are independent across bidders. The optimal
interim-BIC, interim-IR mechanism that maximizes expected welfare minus
payments is a linear program over per-profile allocation probabilities
x[i, j, s] and payments p[i, s]; full allocation adds the requirement that
every item is always handed out.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import FractionalAllocation
from .errors import SizeGuardError, UsageError
from .matching import optimal_weight
from .simplex import DenseSimplex

logger = logging.getLogger(__name__)

MAX_PROFILES = 10_000
PROB_SUM_TOL = 1e-12

Profile = Tuple[int, ...]


class TypeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    values: List[float]
    prob: float = Field(gt=0.0, le=1.0)


class BidderTypes(BaseModel):
    model_config = ConfigDict(frozen=True)

    types: List[TypeSpec] = Field(min_length=1)


class FiniteInstance(BaseModel):
    """{"m": int, "bidders": [{"types": [{"values": [...], "prob": p}]}]}"""
    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    bidders: List[BidderTypes] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_types(self) -> "FiniteInstance":
        for i, bidder in enumerate(self.bidders):
            for t, spec in enumerate(bidder.types):
                if len(spec.values) != self.m:
                    raise ValueError(f"bidder {i} type {t} has {len(spec.values)} values, expected {self.m}")
                if any(v < 0 or not math.isfinite(v) for v in spec.values):
                    raise ValueError(f"bidder {i} type {t} has a negative or non-finite value")
            total = sum(spec.prob for spec in bidder.types)
            if abs(total - 1.0) > PROB_SUM_TOL:
                raise ValueError(f"bidder {i} type probabilities sum to {total}, not 1")
        return self

    @property
    def n(self) -> int:
        return len(self.bidders)

    @property
    def profile_count(self) -> int:
        return math.prod(len(b.types) for b in self.bidders)

    def profiles(self) -> List[Profile]:
        """Joint type profiles in lexicographic order of type indices."""
        return list(itertools.product(*(range(len(b.types)) for b in self.bidders)))

    def probability(self, profile: Profile) -> float:
        return math.prod(self.bidders[i].types[t].prob for i, t in enumerate(profile))

    def others_probability(self, profile: Profile, bidder: int) -> float:
        return math.prod(
            self.bidders[i].types[t].prob for i, t in enumerate(profile) if i != bidder
        )

    def type_values(self, bidder: int, type_index: int) -> np.ndarray:
        return np.array(self.bidders[bidder].types[type_index].values, dtype=float)

    def values_at(self, profile: Profile) -> np.ndarray:
        return np.array([self.bidders[i].types[t].values for i, t in enumerate(profile)], dtype=float)


def load_instance(path: str) -> FiniteInstance:
    file_path = Path(path)
    if not file_path.exists():
        raise UsageError(f"instance file not found: {path}")
    try:
        return FiniteInstance.model_validate(json.loads(file_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise UsageError(f"invalid instance file {path}: {exc}") from exc


def discard_instance(c: float = 4.0) -> FiniteInstance:
    """Two bidders, two items, where the optimum must sometimes discard an item.

    Bidder 0 has the single type (1, 3); bidder 1 is (c, c + 1) or (1, 4)
    with probability 1/2 each.
    """
    return FiniteInstance.model_validate({
        "m": 2,
        "bidders": [
            {"types": [{"values": [1.0, 3.0], "prob": 1.0}]},
            {"types": [
                {"values": [c, c + 1.0], "prob": 0.5},
                {"values": [1.0, 4.0], "prob": 0.5},
            ]},
        ],
    })


@dataclass
class LPLayout:
    """Column positions of x[i, j, s] and p[i, s] in the LP vector."""
    n: int
    m: int
    profiles: List[Profile]

    @property
    def profile_count(self) -> int:
        return len(self.profiles)

    @property
    def size(self) -> int:
        return (self.n * self.m + self.n) * self.profile_count

    def x_index(self, bidder: int, item: int, s: int) -> int:
        return (bidder * self.m + item) * self.profile_count + s

    def p_index(self, bidder: int, s: int) -> int:
        return self.n * self.m * self.profile_count + bidder * self.profile_count + s

    def unpack(self, vector: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Split an LP vector into allocation (n, m, S) and payments (n, S)."""
        split = self.n * self.m * self.profile_count
        allocation = vector[:split].reshape(self.n, self.m, self.profile_count)
        payments = vector[split:].reshape(self.n, self.profile_count)
        return allocation, payments


@dataclass
class LinearProgram:
    """maximize objective.v  s.t.  matrix v (senses) rhs,  v >= 0 (no upper bounds)."""
    objective: np.ndarray
    matrix: np.ndarray
    senses: List[str]
    rhs: np.ndarray
    layout: LPLayout
    row_labels: List[str] = field(default_factory=list)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape


def build_lp(instance: FiniteInstance, full_allocation: bool = False) -> LinearProgram:
    """Assemble the feasibility, interim BIC and interim IR constraints."""
    count = instance.profile_count
    if count > MAX_PROFILES:
        raise SizeGuardError(count, MAX_PROFILES)
    profiles = instance.profiles()
    position = {s: k for k, s in enumerate(profiles)}
    layout = LPLayout(instance.n, instance.m, profiles)
    n, m = instance.n, instance.m

    objective = np.zeros(layout.size)
    for k, s in enumerate(profiles):
        prob = instance.probability(s)
        for i, t in enumerate(s):
            values = instance.type_values(i, t)
            for j in range(m):
                objective[layout.x_index(i, j, k)] += prob * values[j]
            objective[layout.p_index(i, k)] -= prob

    rows: List[np.ndarray] = []
    senses: List[str] = []
    rhs: List[float] = []
    labels: List[str] = []

    def add(row: np.ndarray, sense: str, bound: float, label: str) -> None:
        rows.append(row)
        senses.append(sense)
        rhs.append(bound)
        labels.append(label)

    for k, s in enumerate(profiles):
        for i in range(n):
            row = np.zeros(layout.size)
            for j in range(m):
                row[layout.x_index(i, j, k)] = 1.0
            add(row, "<=", 1.0, f"bidder {i} unit demand at {s}")
        for j in range(m):
            row = np.zeros(layout.size)
            for i in range(n):
                row[layout.x_index(i, j, k)] = 1.0
            add(row, "==" if full_allocation else "<=", 1.0, f"item {j} supply at {s}")

    def interim_row(bidder: int, true_t: int, report_t: int) -> np.ndarray:
        """Coefficients of bidder's interim utility at true_t when reporting report_t."""
        row = np.zeros(layout.size)
        values = instance.type_values(bidder, true_t)
        for s in profiles:
            if s[bidder] != report_t:
                continue
            k = position[s]
            weight = instance.others_probability(s, bidder)
            for j in range(m):
                row[layout.x_index(bidder, j, k)] += weight * values[j]
            row[layout.p_index(bidder, k)] -= weight
        return row

    for i, bidder in enumerate(instance.bidders):
        n_types = len(bidder.types)
        for t in range(n_types):
            truthful = interim_row(i, t, t)
            for r in range(n_types):
                if r != t:
                    add(truthful - interim_row(i, t, r), ">=", 0.0,
                        f"bidder {i} type {t} prefers truth over type {r}")
            add(truthful, ">=", 0.0, f"bidder {i} type {t} participates")

    matrix = np.vstack(rows) if rows else np.zeros((0, layout.size))
    logger.debug("built LP with %d variables and %d constraints", layout.size, len(rows))
    return LinearProgram(objective, matrix, senses, np.array(rhs), layout, labels)


@dataclass
class LPSolution:
    status: str
    objective: float
    iterations: int
    vector: Optional[np.ndarray] = None
    allocation: Optional[np.ndarray] = None  # (n, m, profiles)
    payments: Optional[np.ndarray] = None  # (n, profiles)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "objective": self.objective,
            "iterations": self.iterations,
            "allocation": None if self.allocation is None else self.allocation.tolist(),
            "payments": None if self.payments is None else self.payments.tolist(),
        }


def solve(lp: LinearProgram, max_iterations: int = 50_000) -> LPSolution:
    """Solve ``lp`` with the dense simplex and unpack the optimum."""
    result = DenseSimplex(max_iterations=max_iterations).maximize(
        lp.objective, lp.matrix, lp.senses, lp.rhs
    )
    if result.status != "optimal" or result.x is None:
        logger.warning("LP ended with status %s after %d pivots", result.status, result.iterations)
        return LPSolution(result.status, result.objective, result.iterations)
    allocation, payments = lp.layout.unpack(result.x)
    return LPSolution(
        status="optimal",
        objective=result.objective,
        iterations=result.iterations,
        vector=result.x,
        allocation=allocation,
        payments=payments,
    )


def _row_violations(lp: LinearProgram, vector: np.ndarray) -> np.ndarray:
    lhs = lp.matrix @ vector
    out = np.zeros(len(lhs))
    for k, (value, sense, bound) in enumerate(zip(lhs, lp.senses, lp.rhs)):
        if sense == "<=":
            out[k] = value - bound
        elif sense == ">=":
            out[k] = bound - value
        else:
            out[k] = abs(value - bound)
    return out


def constraint_residuals(lp: LinearProgram, vector: np.ndarray) -> float:
    """Largest violation of any constraint or nonnegativity bound."""
    worst = float(max(0.0, -float(np.min(vector)))) if len(vector) else 0.0
    violations = _row_violations(lp, vector)
    if len(violations):
        worst = max(worst, float(violations.max()))
    return worst


def worst_constraint(lp: LinearProgram, vector: np.ndarray) -> Optional[str]:
    """Label of the most violated (or tightest) constraint row."""
    violations = _row_violations(lp, vector)
    if not len(violations):
        return None
    return lp.row_labels[int(np.argmax(violations))]


def evaluate_objective(instance: FiniteInstance, allocation: np.ndarray,
                       payments: np.ndarray) -> float:
    """Expected welfare minus payments of a per-profile mechanism table."""
    total = 0.0
    for k, s in enumerate(instance.profiles()):
        values = instance.values_at(s)
        surplus = 0.0
        for i in range(instance.n):
            surplus += float(np.dot(allocation[i, :, k], values[i])) - float(payments[i, k])
        total += instance.probability(s) * surplus
    return total


def expected_efficient_welfare(instance: FiniteInstance) -> float:
    """Expected welfare of the max-weight matching, ignoring incentives."""
    if instance.profile_count > MAX_PROFILES:
        raise SizeGuardError(instance.profile_count, MAX_PROFILES)
    return float(sum(
        instance.probability(s) * optimal_weight(instance.values_at(s))
        for s in instance.profiles()
    ))


@dataclass
class DiscardEntry:
    """Probability that each item goes unallocated at one type profile."""
    profile: Profile
    values: List[List[float]]
    probability: float
    unallocated: List[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": list(self.profile),
            "values": self.values,
            "probability": self.probability,
            "unallocated": self.unallocated,
        }


@dataclass
class OptimalMechanism:
    """Result of ``optimal_utility``."""
    full_allocation: bool
    solution: LPSolution
    efficient_welfare: float
    residual: float
    worst_constraint: Optional[str] = None
    discard: List[DiscardEntry] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.solution.objective

    @property
    def max_discard(self) -> float:
        return max((max(e.unallocated) for e in self.discard), default=0.0)

    def discard_at(self, values: List[List[float]]) -> List[float]:
        """Unallocated mass per item at the profile with these value rows."""
        for entry in self.discard:
            if entry.values == values:
                return entry.unallocated
        raise KeyError(values)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": 1,
            "full_allocation": self.full_allocation,
            "status": self.solution.status,
            "objective": self.solution.objective,
            "efficient_welfare": self.efficient_welfare,
            "residual": self.residual,
            "worst_constraint": self.worst_constraint,
            "iterations": self.solution.iterations,
            "max_discard": self.max_discard,
            "discard": [e.to_dict() for e in self.discard],
            "payments": None if self.solution.payments is None else self.solution.payments.tolist(),
        }


def optimal_utility(instance: FiniteInstance, full_allocation: bool = False) -> OptimalMechanism:
    """Maximize expected utility over interim BIC, interim IR mechanisms."""
    lp = build_lp(instance, full_allocation)
    solution = solve(lp)
    efficient = expected_efficient_welfare(instance)
    mechanism = OptimalMechanism(
        full_allocation=full_allocation,
        solution=solution,
        efficient_welfare=efficient,
        residual=float("nan"),
    )
    if solution.vector is None or solution.allocation is None:
        return mechanism
    mechanism.residual = constraint_residuals(lp, solution.vector)
    mechanism.worst_constraint = worst_constraint(lp, solution.vector)
    logger.debug("largest residual %.3g at %s", mechanism.residual, mechanism.worst_constraint)
    for k, s in enumerate(lp.layout.profiles):
        table = FractionalAllocation(solution.allocation[:, :, k])
        mechanism.discard.append(DiscardEntry(
            profile=s,
            values=instance.values_at(s).tolist(),
            probability=instance.probability(s),
            unallocated=[float(u) for u in table.unallocated()],
        ))
    logger.info(
        "optimal %s mechanism: utility %.6f vs efficient welfare %.6f",
        "full-allocation" if full_allocation else "unconstrained",
        solution.objective, efficient,
    )
    return mechanism
