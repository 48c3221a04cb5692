"""Core data models shared by the runner, audit, analyzer and CLI.

Every report type serializes through ``to_dict`` with a fixed key order so
JSON output is byte-stable for a fixed seed.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .dist import DistributionSpec
from .errors import UsageError

SCHEMA_VERSION = 1
Z_95 = 1.96


@dataclass(frozen=True)
class EstimateWithCI:
    """Sample mean with its standard error and normal 95% interval."""
    mean: float
    stderr: float
    trials: int

    @property
    def ci95(self) -> Tuple[float, float]:
        return (self.mean - Z_95 * self.stderr, self.mean + Z_95 * self.stderr)

    def to_dict(self) -> Dict[str, Any]:
        lo, hi = self.ci95
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "trials": self.trials,
            "ci95": [lo, hi],
        }


@dataclass(frozen=True)
class PairedComparison:
    """Mean of paired differences a - b with its z-score."""
    difference: EstimateWithCI
    z: float
    p_value: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "difference": self.difference.to_dict(),
            "z": self.z,
            "p_value": self.p_value,
        }


@dataclass(frozen=True)
class CheckResult:
    """One statistical or exact check inside an experiment."""
    name: str
    measured: float
    bound: float
    relation: str  # "ge", "le" or "approx"
    passed: bool
    stderr: float = 0.0
    slack: float = 0.0
    gating: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "measured": self.measured,
            "stderr": self.stderr,
            "relation": self.relation,
            "bound": self.bound,
            "slack": self.slack,
            "gating": self.gating,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class MarketConfig:
    """An i.i.d. market: n bidders, m items, every value drawn from ``spec``."""
    n: int
    m: int
    spec: DistributionSpec
    seed: int = 42
    trials: int = 10_000

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise UsageError(f"market needs n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError(f"seed must be in [0, 2**64), got {self.seed}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "dist": self.spec.to_text(),
            "seed": self.seed,
            "trials": self.trials,
        }


@dataclass
class MechanismEstimates:
    """Per-mechanism estimates from one simulation run."""
    mechanism: str
    utility: EstimateWithCI
    welfare: EstimateWithCI
    revenue: EstimateWithCI
    allocation_rate: EstimateWithCI
    utility_ratio: EstimateWithCI  # E[utility] / E[benchmark welfare]
    welfare_ratio: EstimateWithCI  # E[benchmark welfare] / E[utility]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mechanism": self.mechanism,
            "utility": self.utility.to_dict(),
            "welfare": self.welfare.to_dict(),
            "revenue": self.revenue.to_dict(),
            "allocation_rate": self.allocation_rate.to_dict(),
            "utility_ratio": self.utility_ratio.to_dict(),
            "welfare_ratio": self.welfare_ratio.to_dict(),
        }


@dataclass
class SimReport:
    """Result of ``run_trials``: one entry per mechanism plus the benchmark."""
    config: MarketConfig
    benchmark_welfare: EstimateWithCI
    mechanisms: List[MechanismEstimates] = field(default_factory=list)

    def get(self, mechanism: str) -> MechanismEstimates:
        for entry in self.mechanisms:
            if entry.mechanism == mechanism:
                return entry
        raise KeyError(mechanism)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "benchmark_welfare": self.benchmark_welfare.to_dict(),
            "mechanisms": [m.to_dict() for m in self.mechanisms],
        }

    def to_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for entry in self.mechanisms:
            rows.append({
                "mechanism": entry.mechanism,
                "n": self.config.n,
                "m": self.config.m,
                "trials": self.config.trials,
                "utility": entry.utility.mean,
                "utility_stderr": entry.utility.stderr,
                "welfare": entry.welfare.mean,
                "revenue": entry.revenue.mean,
                "allocation_rate": entry.allocation_rate.mean,
                "utility_ratio": entry.utility_ratio.mean,
                "utility_ratio_stderr": entry.utility_ratio.stderr,
                "benchmark_welfare": self.benchmark_welfare.mean,
            })
        return rows


@dataclass
class AuditEntry:
    """Interim utility of one candidate report and its gain over truth."""
    report: Tuple[float, ...]
    interim_utility: EstimateWithCI
    gain: PairedComparison

    def to_dict(self) -> Dict[str, Any]:
        return {
            "report": list(self.report),
            "interim_utility": self.interim_utility.to_dict(),
            "gain": self.gain.to_dict(),
        }


@dataclass
class AuditReport:
    """Best-response search over candidate reports for one bidder.

    ``config`` echoes the AuditConfig, market included, so a report can be
    rerun from its own JSON.
    """
    mechanism: str
    bidder: int
    true_type: Tuple[float, ...]
    seed: int
    trials: int
    truthful: EstimateWithCI
    entries: List[AuditEntry] = field(default_factory=list)
    best: Optional[AuditEntry] = None
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "mechanism": self.mechanism,
            "config": self.config,
            "bidder": self.bidder,
            "true_type": list(self.true_type),
            "seed": self.seed,
            "trials": self.trials,
            "truthful_utility": self.truthful.to_dict(),
            "best_gain": self.best.to_dict() if self.best else None,
            "candidates": [e.to_dict() for e in self.entries],
        }

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "report": " ".join(repr(v) for v in e.report),
                "interim_utility": e.interim_utility.mean,
                "interim_stderr": e.interim_utility.stderr,
                "gain": e.gain.difference.mean,
                "gain_stderr": e.gain.difference.stderr,
                "z": e.gain.z,
            }
            for e in self.entries
        ]


@dataclass
class ExperimentResult:
    """Outcome of a named experiment, with the parameters it ran under."""
    experiment: str
    seed: int
    trials: int
    checks: List[CheckResult] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "trials": self.trials,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "rows": self.rows,
            "details": self.details,
        }
