"""Counter-based random streams keyed by (seed, trial, lane).

A stream is a Philox generator whose key is the run seed and whose counter
starts at ``(0, 0, trial, lane)``. Any trial can be regenerated on its own,
so splitting trials across workers never changes the numbers drawn.
"""

import numpy as np

from .errors import UsageError

_MASK64 = (1 << 64) - 1

VALUE_LANE = 0


def trial_stream(seed: int, trial: int, lane: int = VALUE_LANE) -> np.random.Generator:
    """Return the generator for one (seed, trial, lane) triple.

    Args:
        seed: Run seed in [0, 2**64)
        trial: Trial index, >= 0
        lane: Independent sub-stream within the trial (0 draws values)

    Returns:
        A fresh numpy Generator positioned at the start of the stream
    """
    if not (0 <= seed <= _MASK64):
        raise UsageError(f"seed must be in [0, 2**64), got {seed}")
    if trial < 0 or lane < 0:
        raise UsageError(f"trial and lane must be non-negative, got {trial}, {lane}")
    key = np.array([seed, 0], dtype=np.uint64)
    counter = np.array([0, 0, trial & _MASK64, lane & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))
