"""Tests for the Bayesian incentive-compatibility audit."""

import json

import pytest

from mbsim.audit import (
    AuditConfig,
    MarketFile,
    best_response_gain,
    iid_market,
    interim_utility,
    load_market_file,
    misreport_grid,
    uniform_favorites_market,
)
from mbsim.dist import Discrete, Uniform
from mbsim.errors import UsageError
from mbsim.mechanisms import Mechanism, MechanismId, parse_mechanism

UNIFORM_FAVORITES_TRUTHFUL = 1 / 8 + (3 / 8) / 4 + (3 / 8) / 6 + (1 / 8) / 12


@pytest.fixture
def rf_config():
    """Random favorites, two bidders, two U(0, 1) items."""
    return AuditConfig(
        mechanism=Mechanism(MechanismId.RANDOM_FAVORITES),
        market=iid_market(2, 2, Uniform()),
        bidder=0,
        true_type=(0.9, 0.2),
        trials=20000,
        seed=3,
    )


class TestAuditConfig:
    """Tests for audit configuration."""

    def test_candidates(self, rf_config):
        """Test truth first, then zeroed coordinates, then extras without duplicates."""
        rf_config.reports = [(0.5, 0.5), (0.9, 0.2)]
        assert rf_config.candidate_reports() == [
            (0.9, 0.2), (0.0, 0.2), (0.9, 0.0), (0.5, 0.5)]

    def test_bidder_out_of_range(self):
        """Test the audited bidder must exist."""
        with pytest.raises(UsageError):
            AuditConfig(Mechanism(MechanismId.VCG), iid_market(2, 2, Uniform()),
                        bidder=2, true_type=(0.5, 0.5))

    def test_report_length(self):
        """Test reports must list one value per item."""
        with pytest.raises(UsageError):
            AuditConfig(Mechanism(MechanismId.VCG), iid_market(2, 2, Uniform()),
                        bidder=0, true_type=(0.5,))

    def test_too_few_trials(self):
        """Test a standard error needs at least two trials."""
        with pytest.raises(UsageError):
            AuditConfig(Mechanism(MechanismId.VCG), iid_market(2, 2, Uniform()),
                        bidder=0, true_type=(0.5, 0.5), trials=1)


class TestMarkets:
    """Tests for market construction."""

    def test_uniform_favorites(self):
        """Test the mixed uniform and coin-flip market."""
        market = uniform_favorites_market(4)
        assert len(market) == 4
        assert market[0] == (Uniform(0.0, 1.0), Discrete((0.0, 1.0), (0.5, 0.5)))

    def test_load_market_file(self, instances_dir):
        """Test the shipped market file matches the built-in market."""
        assert load_market_file(str(instances_dir / "uniform_favorites_n4.json")) == \
            uniform_favorites_market(4)

    def test_bad_market_file(self, tmp_path):
        """Test a bidder with the wrong number of items is rejected."""
        path = tmp_path / "market.json"
        path.write_text(json.dumps({"m": 2, "bidders": [{"items": ["uniform:0,1"]}]}))
        with pytest.raises(UsageError):
            load_market_file(str(path))

    def test_missing_market_file(self, tmp_path):
        """Test a missing file is a usage error."""
        with pytest.raises(UsageError):
            load_market_file(str(tmp_path / "absent.json"))


class TestMisreportGrid:
    """Tests for the misreport grid."""

    def test_favorite_switches(self):
        """Test the first half declares each item while bidding its true value."""
        true_type = (0.8, 0.5, 0.3)
        grid = misreport_grid(true_type, 20)
        assert len(grid) == 20
        for p, report in enumerate(grid[:10]):
            item = p % 3
            assert report[item] == true_type[item]
            assert all(report[j] <= true_type[item] for j in range(3))
            assert all(report[j] <= true_type[j] for j in range(3))

    def test_rescaled_reports(self):
        """Test the second half shades and inflates the whole type."""
        true_type = (0.8, 0.5, 0.3)
        factors = [report[0] / 0.8 for report in misreport_grid(true_type, 20)[10:]]
        assert factors == pytest.approx([0.5, 0.6, 0.7, 0.8, 0.9, 1.1, 1.2, 1.3, 1.4, 1.5])
        for report in misreport_grid(true_type, 20)[10:]:
            assert report[0] > report[1] > report[2]

    def test_too_few_points(self):
        """Test a grid needs room for both halves."""
        with pytest.raises(UsageError):
            misreport_grid((0.5, 0.5), 1)


class TestInterimUtility:
    """Tests for interim utility estimates."""

    def test_random_favorites(self, rf_config):
        """Test 0.9 times the 3/4 chance of receiving the favorite."""
        est = interim_utility(rf_config)
        assert abs(est.mean - 0.675) <= 4 * est.stderr

    def test_report_identical_to_truth(self, rf_config):
        """Test a report with the same favorite and bid gains exactly nothing."""
        rf_config.trials = 2000
        audit = best_response_gain(rf_config)
        same = next(e for e in audit.entries if e.report == (0.9, 0.0))
        assert same.gain.difference.mean == 0.0
        assert same.gain.z == 0.0

    def test_validate_mode(self, rf_config):
        """Test outcome validation runs cleanly."""
        rf_config.trials = 200
        rf_config.validate = True
        rf_config.mechanism = Mechanism(MechanismId.PRIOR_FREE_FAVORITES)
        best_response_gain(rf_config)

    def test_deterministic(self, rf_config):
        """Test the audit is reproducible for a fixed seed."""
        rf_config.trials = 500
        assert best_response_gain(rf_config).to_dict() == best_response_gain(rf_config).to_dict()

    def test_rerun_from_own_json(self, rf_config):
        """Test the echoed config, market included, reproduces the report."""
        rf_config.trials = 300
        rf_config.reports = [(0.5, 0.5)]
        payload = best_response_gain(rf_config).to_dict()
        echoed = payload["config"]
        assert echoed["mechanism"] == {"kind": "random-favorites", "dist": None}
        assert echoed["market"]["bidders"][1]["items"] == ["uniform:0.0,1.0", "uniform:0.0,1.0"]
        rebuilt = AuditConfig(
            mechanism=parse_mechanism(echoed["mechanism"]["kind"]),
            market=MarketFile.model_validate(echoed["market"]).to_market(),
            bidder=echoed["bidder"],
            true_type=tuple(echoed["true_type"]),
            reports=[tuple(r) for r in echoed["reports"]],
            trials=echoed["trials"],
            seed=echoed["seed"],
        )
        assert best_response_gain(rebuilt).to_dict() == payload


@pytest.mark.slow
class TestIncentives:
    """Statistical incentive checks."""

    def test_prior_free_favorites_violation(self):
        """Test hiding the coin-flip item pays off under prior-free favorites."""
        config = AuditConfig(
            mechanism=Mechanism(MechanismId.PRIOR_FREE_FAVORITES),
            market=uniform_favorites_market(4),
            bidder=0,
            true_type=(0.9, 1.0),
            trials=20000,
            seed=42,
        )
        audit = best_response_gain(config)
        assert abs(audit.truthful.mean - UNIFORM_FAVORITES_TRUTHFUL) <= 4 * audit.truthful.stderr
        hide = next(e for e in audit.entries if e.report == (0.9, 0.0))
        assert hide.gain.difference.mean > 0
        assert hide.gain.z > 3

    def test_random_favorites_ignores_the_grid(self):
        """Test no favorite switch, shade or inflation pays under random favorites."""
        true_type = (0.8, 0.5, 0.3)
        config = AuditConfig(
            mechanism=Mechanism(MechanismId.RANDOM_FAVORITES),
            market=iid_market(3, 3, Uniform()),
            bidder=0,
            true_type=true_type,
            reports=misreport_grid(true_type, 20),
            trials=4000,
            seed=9,
        )
        audit = best_response_gain(config)
        assert all(e.gain.z <= 4 for e in audit.entries)

    def test_prior_free_favorites_rewards_shading(self):
        """Test the reserve setter lowers their own price by shading with i.i.d. items.

        Lottery eligibility is bid >= reserve, so a bidder whose bid is the
        reserve stays eligible after shading and pays the shaded bid.
        """
        true_type = (0.8, 0.5, 0.3)
        config = AuditConfig(
            mechanism=Mechanism(MechanismId.PRIOR_FREE_FAVORITES),
            market=iid_market(3, 3, Uniform()),
            bidder=0,
            true_type=true_type,
            reports=misreport_grid(true_type, 20),
            trials=4000,
            seed=9,
        )
        audit = best_response_gain(config)
        shaded = next(e for e in audit.entries
                      if e.report == pytest.approx((0.56, 0.35, 0.21)))
        assert shaded.gain.difference.mean > 0.01
        assert shaded.gain.z > 4
        best = audit.best.report
        assert best[0] < true_type[0]
        assert max(range(3), key=lambda j: best[j]) == 0
        assert audit.best.gain.difference.mean > 0.01
