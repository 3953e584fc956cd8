import numpy as np
import pytest

import lqgames as lq
from lqgames.experiments import _rng_for, random_game, random_terminal


@pytest.fixture(scope="session")
def fig1_game():
    """Scalar two-agent game with three stationary equilibria."""
    return lq.GameSpec(5, [1, 1], [1, 1], [1, 2])


@pytest.fixture(scope="session")
def fig1_equilibria(fig1_game):
    return lq.scalar_two_agent_equilibria(fig1_game)


@pytest.fixture(scope="session")
def scalar_lqr():
    """Single-agent scalar game whose value limit is the golden ratio."""
    return lq.GameSpec(1, [1], [1], [1])


@pytest.fixture(scope="session")
def found_cycle():
    """First random (2, 2, 2) game under master seed 0 whose recursion
    settles on a certified cycle; shared because the search is the
    expensive part."""
    for t in range(600):
        rng = _rng_for(0, 0, t)
        game = random_game(2, 2, 2, rng)
        terminal = random_terminal(game, rng)
        verdict = lq.classify(game, terminal)
        if verdict.verdict == "cycle":
            return game, terminal, verdict.certificate
    pytest.fail("no cycle found in 600 random (2,2,2) games")


def random_valid_game(rng, n, m, N):
    return random_game(n, m, N, rng)


def random_pd_tuple(rng, n, N, floor=0.1):
    mats = []
    for _ in range(N):
        g = rng.standard_normal((n, n))
        mats.append(g @ g.T + floor * np.eye(n))
    return lq.PTuple(mats)
