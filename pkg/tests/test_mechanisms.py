"""Tests for the allocation mechanisms."""

import math

import numpy as np
import pytest

from mbsim.core import ValueProfile, check_outcome, revenue, utility
from mbsim.dist import Discrete, Pareto, Uniform
from mbsim.errors import UnsupportedRegimeError, UsageError
from mbsim.mechanisms import (
    Mechanism,
    MechanismId,
    favorite_of,
    parse_mechanism,
    prior_free_expected_utility,
    prior_free_guarantee,
    run,
    single_item_prior_free,
    uses_copies_accounting,
    v_lottery,
)


@pytest.fixture
def profile():
    """Three bidders, two items; bidders 0 and 1 both favor item 0."""
    return ValueProfile.from_rows([[0.9, 0.1], [0.8, 0.2], [0.1, 0.7]])


class TestMechanismIds:
    """Tests for mechanism parsing and lanes."""

    def test_lanes_distinct_and_positive(self):
        """Test every mechanism has its own non-value lane."""
        lanes = [m.lane for m in MechanismId]
        assert len(set(lanes)) == len(lanes)
        assert min(lanes) == 1

    def test_parse(self):
        """Test CLI spelling round-trips."""
        assert parse_mechanism("VCG").kind is MechanismId.VCG
        with pytest.raises(UsageError):
            parse_mechanism("second-price")

    def test_single_dim_optimal_needs_spec(self):
        """Test the distribution is mandatory for single-dim-optimal."""
        with pytest.raises(UsageError):
            Mechanism(MechanismId.SINGLE_DIM_OPTIMAL)
        mechanism = parse_mechanism("single-dim-optimal", Uniform())
        assert mechanism.name == "single-dim-optimal{uniform:0.0,1.0}"

    def test_copies_accounting(self):
        """Test which mechanisms may hand one bidder several items."""
        assert uses_copies_accounting(Mechanism(MechanismId.COPIES_VICKREY), 2)
        assert not uses_copies_accounting(Mechanism(MechanismId.COPIES_VICKREY), 1)
        assert not uses_copies_accounting(Mechanism(MechanismId.VCG), 3)


class TestFavorites:
    """Tests for favorite selection."""

    def test_unique_favorite(self, profile, rng):
        """Test the argmax is chosen."""
        assert favorite_of(profile, 2, rng) == 1

    def test_tie_uses_both_items(self):
        """Test tied favorites are drawn at random."""
        profile = ValueProfile.from_rows([[1.0, 1.0, 0.0]])
        picks = {favorite_of(profile, 0, np.random.default_rng(s)) for s in range(50)}
        assert picks == {0, 1}

    def test_tie_is_fair_coin(self):
        """Test a two-way tie picks the first item half the time, within 3 sigma."""
        profile = ValueProfile.from_rows([[2.0, 2.0]])
        rng = np.random.default_rng(2024)
        draws = 100_000
        first = sum(favorite_of(profile, 0, rng) == 0 for _ in range(draws))
        assert abs(first / draws - 0.5) <= 3 * 0.5 / math.sqrt(draws)


class TestSingleItem:
    """Tests for lotteries and the prior-free single-item mechanism."""

    def test_v_lottery_eligibility(self, rng):
        """Test only bids at or above the reserve can win, paying the reserve."""
        for _ in range(50):
            result = v_lottery([0.2, 0.5, 0.7], 0.5, rng)
            assert result.winner in (1, 2)
            assert result.price == 0.5

    def test_v_lottery_nobody_eligible(self, rng):
        """Test the item stays unallocated when every bid is below reserve."""
        assert v_lottery([0.1, 0.2], 0.5, rng).winner is None

    def test_single_bid_wins_free(self, rng):
        """Test a lone bidder always wins at price zero."""
        result = single_item_prior_free([3.0], rng)
        assert result.winner == 0
        assert result.price == 0.0

    def test_exact_expected_utility(self):
        """Test bids (8, 4, 2, 1) give expected utility 101/36."""
        assert prior_free_expected_utility([8.0, 4.0, 2.0, 1.0]) == pytest.approx(101 / 36)

    def test_equal_bids_small_groups(self):
        """Test unit bids give each of 1 to 4 bidders 1, 1/4, 1/6 and 1/12."""
        expected = [1.0, 1 / 4, 1 / 6, 1 / 12]
        for size, value in zip(range(1, 5), expected):
            per_bidder = prior_free_expected_utility([1.0] * size) / size
            assert per_bidder == pytest.approx(value)

    def test_monte_carlo_matches_exact(self):
        """Test sampled utility on (8, 4, 2, 1) agrees with the closed form."""
        rng = np.random.default_rng(5)
        bids = np.array([8.0, 4.0, 2.0, 1.0])
        draws = []
        for _ in range(20000):
            result = single_item_prior_free(bids, rng)
            draws.append(0.0 if result.winner is None else bids[result.winner] - result.price)
        draws = np.array(draws)
        stderr = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - 101 / 36) <= 4 * stderr

    def test_guarantee_on_random_bids(self):
        """Test the utility guarantee max(b) / (2 (1 + log2 n')) on random bid vectors."""
        rng = np.random.default_rng(31)
        for _ in range(500):
            size = int(rng.integers(1, 65))
            bids = rng.exponential(1.0, size) ** 2
            assert prior_free_expected_utility(bids) >= prior_free_guarantee(bids) - 1e-12

    def test_ex_post_ir(self):
        """Test the winner never pays more than their bid."""
        rng = np.random.default_rng(8)
        for _ in range(500):
            bids = rng.uniform(0.0, 1.0, int(rng.integers(1, 10)))
            result = single_item_prior_free(bids, rng)
            if result.winner is not None:
                assert result.price <= bids[result.winner]


class TestMechanisms:
    """Tests for full multi-item mechanisms."""

    def test_vickrey_favorites(self, profile, rng):
        """Test each favorite group runs a second-price auction."""
        outcome = run(Mechanism(MechanismId.VICKREY_FAVORITES), profile, rng)
        assert outcome.assignment.as_dict() == {0: 0, 2: 1}
        assert outcome.payments == pytest.approx((0.8, 0.0, 0.0))

    def test_random_favorites_is_free(self, profile, rng):
        """Test random favorites serves one bidder per declared item at no charge."""
        outcome = run(Mechanism(MechanismId.RANDOM_FAVORITES), profile, rng)
        mapping = outcome.assignment.as_dict()
        assert mapping[2] == 1
        assert (mapping.get(0) == 0) != (mapping.get(1) == 0)
        assert sum(outcome.payments) == 0.0

    def test_copies_vickrey(self, rng):
        """Test copies-vickrey runs a second-price auction per item."""
        profile = ValueProfile.from_rows([[3.0, 5.0], [2.0, 1.0]])
        outcome = run(Mechanism(MechanismId.COPIES_VICKREY), profile, rng)
        assert outcome.assignment.pairs == ((0, 0), (0, 1))
        assert outcome.payments == pytest.approx((3.0, 0.0))

    def test_iterative_random_favorites_fills_market(self):
        """Test rounds continue until bidders or items run out."""
        rng = np.random.default_rng(17)
        for _ in range(100):
            n, m = rng.integers(1, 7, size=2)
            profile = ValueProfile(rng.uniform(size=(n, m)))
            outcome = run(Mechanism(MechanismId.ITERATIVE_RANDOM_FAVORITES), profile, rng)
            assert len(outcome.assignment.pairs) == min(n, m)

    def test_free_lottery(self, profile, rng):
        """Test the free lottery hands out min(n, m) items for nothing."""
        outcome = run(Mechanism(MechanismId.FREE_LOTTERY), profile, rng)
        assert len(outcome.assignment.pairs) == 2
        assert outcome.payments == (0.0, 0.0, 0.0)

    def test_single_dim_optimal_regimes(self, rng):
        """Test free draws for MHR, Vickrey for anti-MHR, refusal otherwise."""
        profile = ValueProfile.from_rows([[3.0], [2.0]])
        free = run(Mechanism(MechanismId.SINGLE_DIM_OPTIMAL, Uniform()), profile, rng)
        assert free.payments == (0.0, 0.0)
        auction = run(Mechanism(MechanismId.SINGLE_DIM_OPTIMAL, Pareto(3.0)), profile, rng)
        assert auction.assignment.as_dict() == {0: 0}
        assert auction.payments == pytest.approx((2.0, 0.0))
        with pytest.raises(UnsupportedRegimeError):
            run(Mechanism(MechanismId.SINGLE_DIM_OPTIMAL,
                          Discrete((0.0, 1.0), (0.5, 0.5))), profile, rng)

    @pytest.mark.parametrize("kind", [k for k in MechanismId if k is not MechanismId.SINGLE_DIM_OPTIMAL])
    def test_outcomes_valid(self, kind):
        """Test every mechanism returns a valid, IR outcome on random profiles."""
        rng = np.random.default_rng(123)
        mechanism = Mechanism(kind)
        for _ in range(100):
            n, m = rng.integers(1, 6, size=2)
            profile = ValueProfile(rng.uniform(size=(n, m)))
            check_outcome(profile, run(mechanism, profile, rng))

    @pytest.mark.parametrize("kind", [
        MechanismId.RANDOM_FAVORITES,
        MechanismId.PRIOR_FREE_FAVORITES,
        MechanismId.VICKREY_FAVORITES,
    ])
    def test_item_allocated_iff_declared(self, kind):
        """Test an item is sold exactly when some bidder names it as favorite."""
        rng = np.random.default_rng(77)
        mechanism = Mechanism(kind)
        for _ in range(200):
            n, m = rng.integers(1, 8, size=2)
            profile = ValueProfile(rng.uniform(size=(n, m)))
            declared = set(np.argmax(profile.values, axis=1).tolist())
            outcome = run(mechanism, profile, rng)
            assert {j for _, j in outcome.assignment.pairs} == declared

    @pytest.mark.parametrize("kind", [
        MechanismId.RANDOM_FAVORITES,
        MechanismId.FREE_LOTTERY,
        MechanismId.ITERATIVE_RANDOM_FAVORITES,
    ])
    def test_free_mechanisms_never_charge(self, kind):
        """Test revenue is zero on every random profile."""
        rng = np.random.default_rng(78)
        mechanism = Mechanism(kind)
        for _ in range(200):
            n, m = rng.integers(1, 8, size=2)
            profile = ValueProfile(rng.exponential(size=(n, m)))
            assert revenue(run(mechanism, profile, rng).payments) == 0.0


class TestWorkedExamples:
    """Small profiles with hand-computed outcomes."""

    def test_vickrey_favorites_distinct_favorites(self, rng):
        """Test singleton groups win for free: utility 5 + 4."""
        profile = ValueProfile.from_rows([[5.0, 1.0], [2.0, 4.0]])
        outcome = run(Mechanism(MechanismId.VICKREY_FAVORITES), profile, rng)
        assert outcome.assignment.as_dict() == {0: 0, 1: 1}
        assert utility(profile, outcome) == pytest.approx(9.0)

    def test_vickrey_favorites_shared_favorite(self, rng):
        """Test both favor item 0: bidder 0 pays 4 and item 1 stays unsold."""
        profile = ValueProfile.from_rows([[5.0, 1.0], [4.0, 2.0]])
        outcome = run(Mechanism(MechanismId.VICKREY_FAVORITES), profile, rng)
        assert outcome.assignment.as_dict() == {0: 0}
        assert utility(profile, outcome) == pytest.approx(1.0)

    def test_copies_vickrey(self, rng):
        """Test per-item second price: (5 - 4) + (2 - 1)."""
        profile = ValueProfile.from_rows([[5.0, 1.0], [4.0, 2.0]])
        outcome = run(Mechanism(MechanismId.COPIES_VICKREY), profile, rng)
        assert outcome.assignment.pairs == ((0, 0), (1, 1))
        assert outcome.payments == pytest.approx((4.0, 1.0))
        assert utility(profile, outcome) == pytest.approx(2.0)

    def test_random_favorites_shared_favorite(self):
        """Test one uniform winner takes item 0 and item 1 stays unsold."""
        profile = ValueProfile.from_rows([[5.0, 1.0], [4.0, 2.0]])
        winners = set()
        for seed in range(50):
            outcome = run(Mechanism(MechanismId.RANDOM_FAVORITES), profile,
                          np.random.default_rng(seed))
            mapping = outcome.assignment.as_dict()
            assert list(mapping.values()) == [0]
            assert outcome.payments == (0.0, 0.0)
            winners.update(mapping)
        assert winners == {0, 1}

    def test_iterative_random_favorites_two_rounds(self):
        """Test round one gives item 0 to a random bidder, round two gives item 1 to the other."""
        profile = ValueProfile.from_rows([[5.0, 1.0], [4.0, 2.0]])
        first_round = set()
        for seed in range(50):
            outcome = run(Mechanism(MechanismId.ITERATIVE_RANDOM_FAVORITES), profile,
                          np.random.default_rng(seed))
            mapping = outcome.assignment.as_dict()
            assert sorted(mapping) == [0, 1]
            assert sorted(mapping.values()) == [0, 1]
            assert outcome.payments == (0.0, 0.0)
            first_round.add(next(b for b, j in mapping.items() if j == 0))
        assert first_round == {0, 1}
