import numpy as np
import pytest

from polarkit.bdmc import Channel


def random_channel(rng: np.random.Generator, max_outputs: int = 16) -> Channel:
    """A random valid channel; occasionally sparse to exercise zero handling."""
    m = int(rng.integers(1, max_outputs + 1))
    probs = np.empty((m, 2))
    for x in (0, 1):
        col = rng.dirichlet(np.ones(m))
        if m > 2 and rng.random() < 0.3:
            # Zero out a strict subset of the entries, then renormalize.
            kill = rng.random(m) < 0.4
            if kill.all():
                kill[int(rng.integers(0, m))] = False
            col = np.where(kill, 0.0, col)
            col = col / col.sum()
        probs[:, x] = col
    return Channel(probs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
