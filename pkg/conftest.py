import numpy as np
import pytest

from channel_bounds import ChannelPair, sec4_example
from divergence_core import Distribution


def _random_probs(rng, size, floor):
    return floor + (1.0 - size * floor) * rng.dirichlet(np.ones(size))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_pair(rng):
    """Factory for (P, Pbar) with every probability at least `floor`."""
    def make(size=3, floor=0.01):
        return (
            Distribution.of(_random_probs(rng, size, floor)),
            Distribution.of(_random_probs(rng, size, floor)),
        )
    return make


@pytest.fixture
def random_channel_pair(rng):
    def make(inputs=2, outputs=2, floor=0.05):
        w = [_random_probs(rng, outputs, floor) for _ in range(inputs)]
        wbar = [_random_probs(rng, outputs, floor) for _ in range(inputs)]
        return ChannelPair.from_rows(w, wbar)
    return make


@pytest.fixture
def sec4_pair():
    return sec4_example()


@pytest.fixture
def identical_pair():
    rows = [[0.3, 0.7], [0.6, 0.4]]
    return ChannelPair.from_rows(rows, rows)
