"""Simulation toolkit for utility-maximizing mechanisms with money burning.

Bidders are unit-demand and every payment is burnt, so the objective is
expected welfare minus payments. The package covers value distributions,
ironing, matching benchmarks, the favorites mechanisms, a Monte Carlo runner,
a Bayesian incentive audit and an exact LP for finite type spaces.

Note: runner, audit, optlp and experiments are not imported here; import
them explicitly where needed.
"""

from .core import Assignment, FractionalAllocation, Outcome, ValueProfile  # noqa: F401
from .dist import (  # noqa: F401
    Discrete,
    DistributionSpec,
    Exponential,
    HazardClass,
    Pareto,
    Uniform,
    parse_distribution,
)
from .errors import MbsimError, UsageError  # noqa: F401
from .mechanisms import Mechanism, MechanismId, run  # noqa: F401
from .schemas import EstimateWithCI, MarketConfig, SimReport  # noqa: F401

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "FractionalAllocation",
    "Outcome",
    "ValueProfile",
    "Discrete",
    "DistributionSpec",
    "Exponential",
    "HazardClass",
    "Pareto",
    "Uniform",
    "parse_distribution",
    "MbsimError",
    "UsageError",
    "Mechanism",
    "MechanismId",
    "run",
    "EstimateWithCI",
    "MarketConfig",
    "SimReport",
]
