import numpy as np
import pytest

from consbandit import EpisodeTrace, ProblemInstance

# The benchmark instance used throughout: default arm slightly suboptimal,
# one better alternative, three worse ones.
EXPERIMENT_MEANS = (0.5, 0.6, 0.4, 0.4, 0.4)


def synthetic_trace(arms, rewards=None, pseudo=None):
    """Build a trace from an arm sequence, zero-filling unused columns."""
    n = len(arms)
    arms = np.asarray(arms, dtype=np.int64)
    rewards = np.zeros(n) if rewards is None else np.asarray(rewards, dtype=float)
    pseudo = np.zeros(n) if pseudo is None else np.asarray(pseudo, dtype=float)
    return EpisodeTrace(
        arms=arms,
        proposed=np.full(n, -1, dtype=np.int64),
        rewards=rewards,
        pseudo_budget=pseudo,
        true_budget=np.zeros(n),
        safe_mode=np.zeros(n, dtype=bool),
        budget_lcb=np.full(n, np.nan),
    )


@pytest.fixture
def small_instance():
    return ProblemInstance(EXPERIMENT_MEANS, alpha=0.1, delta=0.1, horizon=200)
