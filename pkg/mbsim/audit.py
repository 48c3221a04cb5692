"""Statistical Bayesian incentive-compatibility audit.

For one bidder with a fixed true type, estimate the interim utility of each
candidate report by Monte Carlo over the other bidders' values and the
mechanism's coins. Trial t draws the same opponents and the same coin stream
for every report, so gains over truthful reporting are paired differences.
Utility is always credited at the true type.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator

from .analyzer import estimate, paired_difference
from .core import ValueProfile, check_outcome
from .dist import DistributionSpec, Discrete, Uniform, parse_distribution
from .errors import InvariantViolation, UsageError
from .mechanisms import Mechanism, run
from .schemas import AuditEntry, AuditReport, EstimateWithCI
from .streams import VALUE_LANE, trial_stream

logger = logging.getLogger(__name__)

Market = Tuple[Tuple[DistributionSpec, ...], ...]


def iid_market(n: int, m: int, spec: DistributionSpec) -> Market:
    if n < 1 or m < 1:
        raise UsageError(f"market needs n >= 1 and m >= 1, got n={n}, m={m}")
    return tuple(tuple(spec for _ in range(m)) for _ in range(n))


def uniform_favorites_market(n: int = 4) -> Market:
    """Item 0 ~ U(0, 1) and item 1 ~ U{0, 1} for every bidder."""
    row = (Uniform(0.0, 1.0), Discrete((0.0, 1.0), (0.5, 0.5)))
    return tuple(row for _ in range(n))


class _BidderFile(BaseModel):
    items: List[str]


class MarketFile(BaseModel):
    """JSON market: {"m": int, "bidders": [{"items": ["uniform:0,1", ...]}]}."""
    m: int
    bidders: List[_BidderFile]

    @field_validator("m")
    @classmethod
    def _positive_items(cls, v: int) -> int:
        if v < 1:
            raise ValueError("m must be >= 1")
        return v

    def to_market(self) -> Market:
        if not self.bidders:
            raise UsageError("market file lists no bidders")
        rows = []
        for i, bidder in enumerate(self.bidders):
            if len(bidder.items) != self.m:
                raise UsageError(f"bidder {i} lists {len(bidder.items)} items, expected {self.m}")
            rows.append(tuple(parse_distribution(text) for text in bidder.items))
        return tuple(rows)


def market_to_dict(market: Market) -> Dict[str, Any]:
    """Inverse of ``MarketFile.to_market``."""
    return {
        "m": len(market[0]),
        "bidders": [{"items": [spec.to_text() for spec in row]} for row in market],
    }


def load_market_file(path: str) -> Market:
    file_path = Path(path)
    if not file_path.exists():
        raise UsageError(f"market file not found: {path}")
    try:
        data = json.loads(file_path.read_text(encoding="utf-8"))
        return MarketFile.model_validate(data).to_market()
    except (json.JSONDecodeError, ValidationError) as exc:
        raise UsageError(f"invalid market file {path}: {exc}") from exc


def misreport_grid(true_type: Sequence[float], points: int = 20) -> List[Tuple[float, ...]]:
    """Candidate misreports around ``true_type``.

    The first half declares another favorite while bidding its true value:
    report p names item p mod m, whose coordinate keeps its true value while
    every other coordinate is capped at a fraction of it. The second half
    keeps the true favorite and rescales the whole type, shading by factors
    in [0.5, 1) and inflating by factors in (1, 1.5].
    """
    true_type = tuple(float(v) for v in true_type)
    if points < 2:
        raise UsageError(f"misreport grid needs at least 2 points, got {points}")
    m = len(true_type)
    switches = points // 2
    per_item = -(-switches // m)
    grid = []
    for p in range(switches):
        item = p % m
        scale = (p // m + 1) / (per_item + 1)
        top = true_type[item]
        grid.append(tuple(
            top if j == item else min(true_type[j], scale * top)
            for j in range(m)
        ))
    levels = points - switches
    shades = levels - levels // 2
    inflations = levels // 2
    factors = [0.5 + 0.5 * k / shades for k in range(shades)]
    factors += [1.0 + 0.5 * k / inflations for k in range(1, inflations + 1)]
    for factor in factors:
        grid.append(tuple(factor * v for v in true_type))
    return grid


@dataclass
class AuditConfig:
    """Everything needed to audit one bidder's incentives."""
    mechanism: Mechanism
    market: Market
    bidder: int
    true_type: Tuple[float, ...]
    reports: List[Tuple[float, ...]] = field(default_factory=list)
    trials: int = 100_000
    seed: int = 42
    validate: bool = False

    def __post_init__(self) -> None:
        self.true_type = tuple(float(v) for v in self.true_type)
        self.reports = [tuple(float(v) for v in r) for r in self.reports]
        if not self.market or any(len(row) != len(self.market[0]) for row in self.market):
            raise UsageError("market must be a non-empty n x m grid of distributions")
        if not 0 <= self.bidder < self.n:
            raise UsageError(f"bidder {self.bidder} outside market with {self.n} bidders")
        for report in [self.true_type, *self.reports]:
            if len(report) != self.m:
                raise UsageError(f"report {report} has {len(report)} entries, market has {self.m} items")
            if any(v < 0 or not np.isfinite(v) for v in report):
                raise UsageError(f"report {report} must be finite and nonnegative")
        if self.trials < 2:
            raise UsageError(f"audit needs at least 2 trials, got {self.trials}")

    @property
    def n(self) -> int:
        return len(self.market)

    @property
    def m(self) -> int:
        return len(self.market[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mechanism": self.mechanism.to_dict(),
            "market": market_to_dict(self.market),
            "bidder": self.bidder,
            "true_type": list(self.true_type),
            "reports": [list(r) for r in self.reports],
            "seed": self.seed,
            "trials": self.trials,
            "validate": self.validate,
        }

    def candidate_reports(self) -> List[Tuple[float, ...]]:
        """Truth first, then each single coordinate zeroed, then user reports."""
        candidates = [self.true_type]
        for j in range(self.m):
            zeroed = list(self.true_type)
            zeroed[j] = 0.0
            candidates.append(tuple(zeroed))
        candidates.extend(self.reports)
        unique: List[Tuple[float, ...]] = []
        for report in candidates:
            if report not in unique:
                unique.append(report)
        return unique


class _MarketSampler:
    """Draws a full n x m profile, one vectorized call per distinct distribution."""

    def __init__(self, market: Market):
        self.shape = (len(market), len(market[0]))
        cells: Dict[DistributionSpec, List[Tuple[int, int]]] = {}
        for i, row in enumerate(market):
            for j, spec in enumerate(row):
                cells.setdefault(spec, []).append((i, j))
        self.groups = [
            (spec, tuple(np.array(idx).T)) for spec, idx in cells.items()
        ]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        values = np.empty(self.shape)
        for spec, index in self.groups:
            values[index] = spec.sample(rng, len(index[0]))
        return values


def _credited_utilities(config: AuditConfig, reports: Sequence[Tuple[float, ...]]) -> np.ndarray:
    """Matrix (trials, reports) of utilities credited at the true type."""
    sampler = _MarketSampler(config.market)
    true_values = np.array(config.true_type)
    out = np.zeros((config.trials, len(reports)))
    for trial in range(config.trials):
        drawn = ValueProfile(sampler.sample(trial_stream(config.seed, trial, VALUE_LANE)))
        for k, report in enumerate(reports):
            profile = drawn.with_row(config.bidder, report)
            outcome = run(config.mechanism, profile,
                          trial_stream(config.seed, trial, config.mechanism.lane))
            if config.validate:
                check_outcome(profile, outcome)
            won = outcome.assignment.items_of(config.bidder)
            payment = outcome.payments[config.bidder]
            if payment > sum(report[j] for j in won) + 1e-9:
                raise InvariantViolation(
                    f"bidder {config.bidder} pays {payment} above reported value in trial {trial}"
                )
            out[trial, k] = float(true_values[won].sum()) - payment
    return out


def interim_utility(config: AuditConfig, report: Optional[Sequence[float]] = None) -> EstimateWithCI:
    """Interim utility of reporting ``report`` (default: the truth)."""
    chosen = tuple(float(v) for v in (report if report is not None else config.true_type))
    if len(chosen) != config.m:
        raise UsageError(f"report {chosen} has {len(chosen)} entries, market has {config.m} items")
    return estimate(_credited_utilities(config, [chosen])[:, 0])


def best_response_gain(config: AuditConfig) -> AuditReport:
    """Audit every candidate report and return the largest mean gain over truth."""
    reports = config.candidate_reports()
    utilities = _credited_utilities(config, reports)
    truthful = utilities[:, 0]
    report = AuditReport(
        mechanism=config.mechanism.name,
        bidder=config.bidder,
        true_type=config.true_type,
        seed=config.seed,
        trials=config.trials,
        truthful=estimate(truthful),
        config=config.to_dict(),
    )
    for k, candidate in enumerate(reports):
        report.entries.append(AuditEntry(
            report=candidate,
            interim_utility=estimate(utilities[:, k]),
            gain=paired_difference(utilities[:, k], truthful),
        ))
    report.best = max(report.entries, key=lambda e: e.gain.difference.mean)
    if logger.isEnabledFor(logging.INFO):
        logger.info(
            "audit %s bidder %d: best report %s gains %.5f (z=%.2f)",
            report.mechanism, config.bidder, report.best.report,
            report.best.gain.difference.mean, report.best.gain.z,
        )
    return report
