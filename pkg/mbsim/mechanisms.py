"""Allocation mechanisms for unit-demand bidders who burn their payments.

Every mechanism maps a reported ValueProfile and a random stream to an
Outcome. The favorites family first reduces each bidder to their favorite
item (ties broken uniformly at random) and then runs an independent
single-item mechanism among the bidders who declared each item.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Outcome, ValueProfile
from .dist import DistributionSpec, HazardClass
from .errors import UnsupportedRegimeError, UsageError
from .matching import vcg

logger = logging.getLogger(__name__)


class MechanismId(str, Enum):
    """Mechanisms known to the simulator (value is the CLI spelling)."""
    RANDOM_FAVORITES = "random-favorites"
    PRIOR_FREE_FAVORITES = "prior-free-favorites"
    VICKREY_FAVORITES = "vickrey-favorites"
    ITERATIVE_RANDOM_FAVORITES = "iterative-random-favorites"
    VCG = "vcg"
    FREE_LOTTERY = "free-lottery"
    COPIES_VICKREY = "copies-vickrey"
    SINGLE_DIM_OPTIMAL = "single-dim-optimal"

    @property
    def lane(self) -> int:
        """Random lane for this mechanism's coins; lane 0 is reserved for values."""
        return 1 + list(MechanismId).index(self)


@dataclass(frozen=True)
class Mechanism:
    """A mechanism choice; SINGLE_DIM_OPTIMAL also carries its value distribution."""
    kind: MechanismId
    spec: Optional[DistributionSpec] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MechanismId(self.kind))
        if self.kind is MechanismId.SINGLE_DIM_OPTIMAL and self.spec is None:
            raise UsageError("single-dim-optimal needs a value distribution")

    @property
    def lane(self) -> int:
        return self.kind.lane

    @property
    def name(self) -> str:
        if self.spec is not None and self.kind is MechanismId.SINGLE_DIM_OPTIMAL:
            return f"{self.kind.value}{{{self.spec.to_text()}}}"
        return self.kind.value

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {"kind": self.kind.value, "dist": None if self.spec is None else self.spec.to_text()}


def parse_mechanism(text: str, spec: Optional[DistributionSpec] = None) -> Mechanism:
    try:
        kind = MechanismId(text.strip().lower())
    except ValueError as exc:
        choices = ", ".join(m.value for m in MechanismId)
        raise UsageError(f"unknown mechanism {text!r}; choose from {choices}") from exc
    return Mechanism(kind, spec if kind is MechanismId.SINGLE_DIM_OPTIMAL else None)


@dataclass(frozen=True)
class LotteryResult:
    """Single-item lottery outcome; ``winner`` indexes into the bid vector."""
    winner: Optional[int]
    price: float


# Favorites


def _uniform_pick(candidates: Sequence[int], rng: np.random.Generator) -> int:
    if len(candidates) == 1:
        return int(candidates[0])
    return int(candidates[int(rng.integers(len(candidates)))])


def favorites(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Favorite item of every row; ties drawn in ascending row order."""
    best = values.max(axis=1)
    picks = values.argmax(axis=1)
    tied_rows = np.flatnonzero((values == best[:, None]).sum(axis=1) > 1)
    for row in tied_rows:
        picks[row] = _uniform_pick(np.flatnonzero(values[row] == best[row]), rng)
    return picks


def favorite_of(profile: ValueProfile, bidder: int, rng: np.random.Generator) -> int:
    """Item of maximum reported value for one bidder."""
    if not 0 <= bidder < profile.n:
        raise UsageError(f"bidder {bidder} outside profile with {profile.n} bidders")
    row = profile.values[bidder]
    return _uniform_pick(np.flatnonzero(row == row.max()), rng)


def _favorite_groups(values: np.ndarray, rng: np.random.Generator) -> List[Tuple[int, List[int]]]:
    """(item, declaring bidders ascending) for every declared item, items ascending."""
    groups: Dict[int, List[int]] = {}
    for bidder, item in enumerate(favorites(values, rng).tolist()):
        groups.setdefault(item, []).append(bidder)
    return sorted(groups.items())


# Single-item building blocks


def v_lottery(bids: Sequence[float], reserve: float, rng: np.random.Generator) -> LotteryResult:
    """Uniform lottery among bids >= reserve; the winner pays the reserve."""
    bids = np.asarray(bids, dtype=float)
    eligible = np.flatnonzero(bids >= reserve)
    if len(eligible) == 0:
        return LotteryResult(winner=None, price=float(reserve))
    return LotteryResult(winner=_uniform_pick(eligible, rng), price=float(reserve))


def _top_level(n_bids: int) -> int:
    return n_bids.bit_length() - 1


def _level_reserve(descending: np.ndarray, level: int) -> float:
    """Reserve used at ``level``: the (2^level + 1)-th highest bid.

    The top level always runs at reserve 0, the (n' + 1)-th bid.
    """
    rank = 2 ** level + 1
    if level == _top_level(len(descending)) or rank > len(descending):
        return 0.0
    return float(descending[rank - 1])


def single_item_prior_free(bids: Sequence[float], rng: np.random.Generator) -> LotteryResult:
    """Prior-free single-item lottery.

    Draw a level j uniformly from {0, ..., floor(log2 n')} and run a lottery
    whose reserve is the (2^j + 1)-th highest bid. It guarantees expected
    utility of at least max(bids) / (2 (1 + log2 n')).
    """
    bids = np.asarray(bids, dtype=float)
    if bids.ndim != 1 or len(bids) == 0:
        raise UsageError("prior-free lottery needs a non-empty bid vector")
    perm = rng.permutation(len(bids))
    descending = bids[perm[np.argsort(-bids[perm], kind="stable")]]
    level = int(rng.integers(0, _top_level(len(bids)) + 1))
    return v_lottery(bids, _level_reserve(descending, level), rng)


def prior_free_expected_utility(bids: Sequence[float]) -> float:
    """Exact expected utility of ``single_item_prior_free`` on ``bids``."""
    bids = np.asarray(bids, dtype=float)
    if bids.ndim != 1 or len(bids) == 0:
        raise UsageError("prior-free lottery needs a non-empty bid vector")
    descending = np.sort(bids)[::-1]
    levels = _top_level(len(bids)) + 1
    total = 0.0
    for level in range(levels):
        reserve = _level_reserve(descending, level)
        eligible = bids[bids >= reserve]
        total += float(np.mean(eligible - reserve))
    return total / levels


def prior_free_guarantee(bids: Sequence[float]) -> float:
    """Lower bound max(bids) / (2 (1 + log2 n')) on the prior-free utility."""
    bids = np.asarray(bids, dtype=float)
    return float(bids.max()) / (2.0 * (1.0 + math.log2(len(bids))))


def _vickrey(bids: np.ndarray, rng: np.random.Generator) -> LotteryResult:
    """Highest bid wins (uniform among ties) and pays the second-highest bid."""
    top = bids.max()
    winner = _uniform_pick(np.flatnonzero(bids == top), rng)
    if len(bids) == 1:
        return LotteryResult(winner=winner, price=0.0)
    return LotteryResult(winner=winner, price=float(np.partition(bids, -2)[-2]))


# Mechanisms


def _random_favorites(profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    pairs = [
        (_uniform_pick(group, rng), item)
        for item, group in _favorite_groups(profile.values, rng)
    ]
    return Outcome.build(profile.n, pairs)


def _per_group(profile: ValueProfile, rng: np.random.Generator,
               run_group: Callable[[np.ndarray, np.random.Generator], LotteryResult]) -> Outcome:
    pairs: List[Tuple[int, int]] = []
    prices: Dict[int, float] = {}
    for item, group in _favorite_groups(profile.values, rng):
        result = run_group(profile.values[group, item], rng)
        if result.winner is None:
            continue
        winner = group[result.winner]
        pairs.append((winner, item))
        prices[winner] = result.price
    return Outcome.build(profile.n, pairs, prices)


def _prior_free_favorites(profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    return _per_group(profile, rng, single_item_prior_free)


def _vickrey_favorites(profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    return _per_group(profile, rng, _vickrey)


def _iterative_random_favorites(profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    bidders = list(range(profile.n))
    items = list(range(profile.m))
    pairs: List[Tuple[int, int]] = []
    rounds = 0
    while bidders and items:
        rounds += 1
        sub = profile.values[np.ix_(bidders, items)]
        won_bidders, won_items = set(), set()
        for local_item, group in _favorite_groups(sub, rng):
            winner = bidders[_uniform_pick(group, rng)]
            pairs.append((winner, items[local_item]))
            won_bidders.add(winner)
            won_items.add(items[local_item])
        bidders = [b for b in bidders if b not in won_bidders]
        items = [j for j in items if j not in won_items]
    logger.debug("iterative random favorites finished in %d rounds", rounds)
    return Outcome.build(profile.n, pairs)


def _free_lottery(profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    bidder_order = rng.permutation(profile.n)
    item_order = rng.permutation(profile.m)
    return Outcome.build(profile.n, zip(bidder_order.tolist(), item_order.tolist()))


def _per_item(profile: ValueProfile, rng: np.random.Generator,
              run_item: Callable[[np.ndarray, np.random.Generator], LotteryResult]) -> Outcome:
    """Run a single-item mechanism on every item over all bidders (copies accounting)."""
    pairs: List[Tuple[int, int]] = []
    prices: Dict[int, float] = {}
    for item in range(profile.m):
        result = run_item(profile.values[:, item], rng)
        if result.winner is None:
            continue
        pairs.append((result.winner, item))
        prices[result.winner] = prices.get(result.winner, 0.0) + result.price
    return Outcome.build(profile.n, pairs, prices, copies=profile.m > 1)


def _free_draw(bids: np.ndarray, rng: np.random.Generator) -> LotteryResult:
    return LotteryResult(winner=int(rng.integers(len(bids))), price=0.0)


def _copies_vickrey(profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    return _per_item(profile, rng, _vickrey)


def _single_dim_optimal(mechanism: Mechanism, profile: ValueProfile,
                        rng: np.random.Generator) -> Outcome:
    assert mechanism.spec is not None
    regime = mechanism.spec.hazard_class
    if regime in (HazardClass.MHR, HazardClass.CONSTANT):
        return _per_item(profile, rng, _free_draw)
    if regime is HazardClass.ANTI_MHR:
        return _per_item(profile, rng, _vickrey)
    raise UnsupportedRegimeError(
        f"no optimal single-item rule for hazard class {regime.value} ({mechanism.spec.to_text()})"
    )


_RUNNERS: Dict[MechanismId, Callable[[ValueProfile, np.random.Generator], Outcome]] = {
    MechanismId.RANDOM_FAVORITES: _random_favorites,
    MechanismId.PRIOR_FREE_FAVORITES: _prior_free_favorites,
    MechanismId.VICKREY_FAVORITES: _vickrey_favorites,
    MechanismId.ITERATIVE_RANDOM_FAVORITES: _iterative_random_favorites,
    MechanismId.VCG: lambda profile, rng: vcg(profile),
    MechanismId.FREE_LOTTERY: _free_lottery,
    MechanismId.COPIES_VICKREY: _copies_vickrey,
}


def run(mechanism: Mechanism, profile: ValueProfile, rng: np.random.Generator) -> Outcome:
    """Run ``mechanism`` on the reported ``profile`` using coins from ``rng``."""
    if mechanism.kind is MechanismId.SINGLE_DIM_OPTIMAL:
        return _single_dim_optimal(mechanism, profile, rng)
    return _RUNNERS[mechanism.kind](profile, rng)


def uses_copies_accounting(mechanism: Mechanism, m: int) -> bool:
    """Whether a bidder may win several items under ``mechanism`` with ``m`` items."""
    if mechanism.kind is MechanismId.COPIES_VICKREY:
        return m > 1
    return mechanism.kind is MechanismId.SINGLE_DIM_OPTIMAL and m > 1
