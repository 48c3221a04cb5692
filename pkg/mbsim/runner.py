"""Monte Carlo runner: i.i.d. markets, common random numbers, paired ratios.

Each trial draws its value profile from lane 0 of its own counter-based
stream and runs every requested mechanism on that same profile, each on its
own lane. The matching benchmark is computed on the same profile, so
utility/benchmark ratios are paired estimates.
"""

import concurrent.futures
import logging
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analyzer import estimate, ratio_estimate
from .core import ValueProfile, check_outcome, revenue, welfare
from .errors import InvariantViolation, UsageError
from .matching import optimal_weight
from .mechanisms import Mechanism, run, uses_copies_accounting
from .schemas import EstimateWithCI, MarketConfig, MechanismEstimates, SimReport
from .streams import VALUE_LANE, trial_stream

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 2048
BENCHMARK_TOL = 1e-9


@dataclass
class TrialSamples:
    """Per-trial metrics, shape (mechanisms, trials) except ``benchmark``."""
    welfare: np.ndarray
    revenue: np.ndarray
    utility: np.ndarray
    allocated: np.ndarray
    benchmark: np.ndarray

    @classmethod
    def concatenate(cls, parts: Sequence["TrialSamples"]) -> "TrialSamples":
        return cls(
            welfare=np.concatenate([p.welfare for p in parts], axis=1),
            revenue=np.concatenate([p.revenue for p in parts], axis=1),
            utility=np.concatenate([p.utility for p in parts], axis=1),
            allocated=np.concatenate([p.allocated for p in parts], axis=1),
            benchmark=np.concatenate([p.benchmark for p in parts]),
        )


class MonteCarloRunner:
    """Runs trials in fixed-size chunks, optionally on a thread pool."""

    def __init__(self, threads: int = 1, validate: bool = False,
                 chunk_size: int = DEFAULT_CHUNK_SIZE):
        """Initialize the runner.

        Args:
            threads: Worker threads; results never depend on this
            validate: Check every outcome against its profile
            chunk_size: Trials per unit of work
        """
        if threads < 1:
            raise UsageError(f"threads must be >= 1, got {threads}")
        if chunk_size < 1:
            raise UsageError(f"chunk size must be >= 1, got {chunk_size}")
        self.threads = threads
        self.validate = validate
        self.chunk_size = chunk_size

    def _run_chunk(self, config: MarketConfig, mechanisms: Sequence[Mechanism],
                   start: int, stop: int) -> TrialSamples:
        count = stop - start
        shape = (len(mechanisms), count)
        out = TrialSamples(
            welfare=np.zeros(shape),
            revenue=np.zeros(shape),
            utility=np.zeros(shape),
            allocated=np.zeros(shape),
            benchmark=np.zeros(count),
        )
        for offset, trial in enumerate(range(start, stop)):
            values = config.spec.sample(trial_stream(config.seed, trial, VALUE_LANE),
                                        (config.n, config.m))
            profile = ValueProfile(values)
            bench = optimal_weight(profile.values)
            out.benchmark[offset] = bench
            for k, mechanism in enumerate(mechanisms):
                outcome = run(mechanism, profile, trial_stream(config.seed, trial, mechanism.lane))
                w = welfare(profile, outcome.assignment)
                r = revenue(outcome.payments)
                if self.validate:
                    check_outcome(profile, outcome)
                    if not uses_copies_accounting(mechanism, config.m) and w > bench + BENCHMARK_TOL:
                        raise InvariantViolation(
                            f"{mechanism.name} welfare {w} exceeds benchmark {bench} in trial {trial}"
                        )
                out.welfare[k, offset] = w
                out.revenue[k, offset] = r
                out.utility[k, offset] = w - r
                out.allocated[k, offset] = len(outcome.assignment.bidders) / config.n
        return out

    def sample_trials(self, config: MarketConfig,
                      mechanisms: Sequence[Mechanism]) -> TrialSamples:
        """Per-trial samples in trial order, independent of the thread count."""
        if not mechanisms:
            raise UsageError("at least one mechanism is required")
        bounds = [
            (start, min(start + self.chunk_size, config.trials))
            for start in range(0, config.trials, self.chunk_size)
        ]
        if self.threads == 1 or len(bounds) == 1:
            parts = [self._run_chunk(config, mechanisms, a, b) for a, b in bounds]
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=self.threads) as executor:
                futures = [
                    executor.submit(self._run_chunk, config, mechanisms, a, b)
                    for a, b in bounds
                ]
                parts = [f.result() for f in futures]
        return TrialSamples.concatenate(parts)

    def run_trials(self, config: MarketConfig, mechanisms: Sequence[Mechanism]) -> SimReport:
        """Estimate utility, welfare, revenue and ratios for each mechanism."""
        started = time.perf_counter()
        report = summarize(config, mechanisms, self.sample_trials(config, mechanisms))
        logger.info(
            "ran %d trials of %s (n=%d, m=%d) in %.2fs",
            config.trials, ", ".join(m.name for m in mechanisms),
            config.n, config.m, time.perf_counter() - started,
        )
        return report

    def allocation_probability(self, config: MarketConfig,
                               mechanism: Mechanism) -> EstimateWithCI:
        """Fraction of (trial, bidder) pairs that receive an item."""
        samples = self.sample_trials(config, [mechanism])
        return estimate(samples.allocated[0])


def summarize(config: MarketConfig, mechanisms: Sequence[Mechanism],
              samples: TrialSamples) -> SimReport:
    """Reduce per-trial samples to a SimReport."""
    report = SimReport(config=config, benchmark_welfare=estimate(samples.benchmark))
    for k, mechanism in enumerate(mechanisms):
        report.mechanisms.append(MechanismEstimates(
            mechanism=mechanism.name,
            utility=estimate(samples.utility[k]),
            welfare=estimate(samples.welfare[k]),
            revenue=estimate(samples.revenue[k]),
            allocation_rate=estimate(samples.allocated[k]),
            utility_ratio=ratio_estimate(samples.utility[k], samples.benchmark),
            welfare_ratio=ratio_estimate(samples.benchmark, samples.utility[k]),
        ))
    return report


def run_trials(config: MarketConfig, mechanisms: Sequence[Mechanism],
               threads: int = 1, validate: bool = False) -> SimReport:
    return MonteCarloRunner(threads=threads, validate=validate).run_trials(config, mechanisms)


def allocation_probability(config: MarketConfig, mechanism: Mechanism,
                           threads: int = 1) -> EstimateWithCI:
    return MonteCarloRunner(threads=threads).allocation_probability(config, mechanism)

