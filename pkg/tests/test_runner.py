"""Tests for the Monte Carlo runner and counter-based streams."""

import json
import math

import numpy as np
import pytest

from mbsim.dist import Pareto, Uniform
from mbsim.errors import UsageError
from mbsim.mechanisms import Mechanism, MechanismId
from mbsim.runner import MonteCarloRunner, allocation_probability, run_trials
from mbsim.schemas import MarketConfig
from mbsim.streams import trial_stream


@pytest.fixture
def config():
    """A small uniform market."""
    return MarketConfig(n=3, m=2, spec=Uniform(), seed=11, trials=600)


@pytest.fixture
def mechanisms():
    """A free, a burning and a benchmark mechanism."""
    return [
        Mechanism(MechanismId.RANDOM_FAVORITES),
        Mechanism(MechanismId.PRIOR_FREE_FAVORITES),
        Mechanism(MechanismId.VCG),
    ]


class TestStreams:
    """Tests for counter-based trial streams."""

    def test_reproducible(self):
        """Test the same triple gives the same draws."""
        a = trial_stream(5, 10, 2).random(4)
        b = trial_stream(5, 10, 2).random(4)
        assert np.array_equal(a, b)

    def test_lanes_and_trials_differ(self):
        """Test neighbouring lanes and trials are distinct streams."""
        base = trial_stream(5, 10, 0).random(4)
        assert not np.array_equal(base, trial_stream(5, 10, 1).random(4))
        assert not np.array_equal(base, trial_stream(5, 11, 0).random(4))

    def test_negative_trial(self):
        """Test negative counters are rejected."""
        with pytest.raises(UsageError):
            trial_stream(1, -1)


class TestMonteCarloRunner:
    """Tests for MonteCarloRunner."""

    def test_deterministic(self, config, mechanisms):
        """Test two runs with one seed serialize identically."""
        first = run_trials(config, mechanisms).to_dict()
        second = run_trials(config, mechanisms).to_dict()
        assert json.dumps(first) == json.dumps(second)

    def test_thread_count_invariant(self, config, mechanisms):
        """Test results do not depend on threads or chunking."""
        serial = MonteCarloRunner(threads=1, chunk_size=1000).run_trials(config, mechanisms)
        pooled = MonteCarloRunner(threads=3, chunk_size=64).run_trials(config, mechanisms)
        assert json.dumps(serial.to_dict()) == json.dumps(pooled.to_dict())

    def test_utility_identity(self, config, mechanisms):
        """Test mean utility equals mean welfare minus mean revenue."""
        report = run_trials(config, mechanisms)
        for entry in report.mechanisms:
            assert entry.utility.mean == pytest.approx(
                entry.welfare.mean - entry.revenue.mean, abs=1e-9)

    def test_benchmark_dominates_welfare(self, config, mechanisms):
        """Test validation mode accepts every non-copies mechanism."""
        report = run_trials(config, mechanisms, validate=True)
        assert report.get("vcg").welfare.mean == pytest.approx(report.benchmark_welfare.mean)
        assert report.get("random-favorites").revenue.mean == 0.0

    def test_common_random_numbers(self, config):
        """Test adding a mechanism leaves another's estimates untouched."""
        alone = run_trials(config, [Mechanism(MechanismId.PRIOR_FREE_FAVORITES)])
        together = run_trials(config, [Mechanism(MechanismId.FREE_LOTTERY),
                                       Mechanism(MechanismId.PRIOR_FREE_FAVORITES)])
        assert alone.mechanisms[0].to_dict() == together.get("prior-free-favorites").to_dict()

    def test_copies_mechanism_validates(self):
        """Test copies accounting is exempt from the benchmark check."""
        config = MarketConfig(n=2, m=3, spec=Pareto(3.0), seed=3, trials=300)
        report = run_trials(config, [Mechanism(MechanismId.COPIES_VICKREY)], validate=True)
        assert report.mechanisms[0].welfare.trials == 300

    def test_single_trial(self, mechanisms):
        """Test one trial gives zero standard errors."""
        config = MarketConfig(n=2, m=2, spec=Uniform(), trials=1)
        report = run_trials(config, mechanisms)
        assert report.mechanisms[0].utility.stderr == 0.0

    def test_no_mechanisms(self, config):
        """Test an empty mechanism list is rejected."""
        with pytest.raises(UsageError):
            run_trials(config, [])

    def test_report_schema(self, config, mechanisms):
        """Test the JSON layout carries the schema version and config."""
        payload = run_trials(config, mechanisms).to_dict()
        assert payload["schema"] == 1
        assert payload["config"] == {"n": 3, "m": 2, "dist": "uniform:0.0,1.0",
                                     "seed": 11, "trials": 600}
        assert [m["mechanism"] for m in payload["mechanisms"]] == [
            "random-favorites", "prior-free-favorites", "vcg"]


class TestAllocationRates:
    """Tests for random-favorites allocation probabilities."""

    @pytest.mark.parametrize("n,m,expected", [(2, 2, 0.75), (2, 4, 0.875)])
    def test_random_favorites_rate(self, n, m, expected):
        """Test the per-bidder allocation probability."""
        config = MarketConfig(n=n, m=m, spec=Uniform(), seed=1, trials=20000)
        est = allocation_probability(config, Mechanism(MechanismId.RANDOM_FAVORITES))
        assert abs(est.mean - expected) <= 4 * est.stderr

    def test_random_favorites_ratio(self):
        """Test random favorites keeps at least 1 - 1/e of the benchmark when n = m."""
        config = MarketConfig(n=10, m=10, spec=Uniform(), seed=2, trials=3000)
        entry = run_trials(config, [Mechanism(MechanismId.RANDOM_FAVORITES)]).mechanisms[0]
        assert entry.utility_ratio.mean >= 1 - 1 / math.e - 3 * entry.utility_ratio.stderr
