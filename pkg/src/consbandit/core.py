"""Domain types, budget accounting, and regret metrics.

Arm 0 is always the default (conservative) arm; arms 1..K are the
alternatives being explored.  All types here are plain values owned by a
single episode at a time; nothing is shared between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MalformedTraceError(ValueError):
    """An episode trace references arms or rounds that cannot exist."""


class ConfigurationError(ValueError):
    """A parameter combination the algorithms cannot run with."""


def constraint_floor(alpha: float, mu0: float, t: int) -> float:
    """Return (1 - alpha) * t * mu0, the minimum acceptable return after t rounds.

    Evaluated as ``(1 - alpha) * (t * mu0)`` so that rounds where t * mu0 is
    exactly representable (e.g. mu0 = 0.5) compare against the budget the way
    exact arithmetic would.  Every budget computation in the package goes
    through this helper so policies and audits always agree.
    """
    return (1.0 - alpha) * (t * mu0)


class KahanSum:
    """Compensated accumulator; order-stable to ~1e-16 relative error."""

    __slots__ = ("total", "_comp")

    def __init__(self) -> None:
        self.total = 0.0
        self._comp = 0.0

    def add(self, x: float) -> float:
        y = x - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t
        return t


def kahan_sum(values) -> float:
    """Sum an iterable of floats with compensation."""
    acc = KahanSum()
    for v in values:
        acc.add(v)
    return acc.total


@dataclass(slots=True)
class ArmStats:
    """Running pull count, reward sum, and empirical mean for one arm.

    The empirical mean of an unpulled arm is defined to be 0.
    """

    pulls: int = 0
    reward_sum: float = 0.0
    empirical_mean: float = 0.0


def update_stats(stats: ArmStats, reward: float) -> ArmStats:
    """Record one observed reward on ``stats`` (in place; returned for chaining)."""
    p = stats.pulls + 1
    s = stats.reward_sum + reward
    stats.pulls = p
    stats.reward_sum = s
    stats.empirical_mean = s / p
    return stats


@dataclass(frozen=True)
class ProblemInstance:
    """A stochastic bandit instance: arm means plus the run parameters.

    means[0] is the default arm's mean; K = len(means) - 1 alternatives.
    """

    means: tuple[float, ...]
    alpha: float
    delta: float
    horizon: int

    def __post_init__(self) -> None:
        if len(self.means) < 2:
            raise ConfigurationError("means must list the default arm plus at least one alternative")
        if any(not 0.0 <= m <= 1.0 for m in self.means):
            raise ConfigurationError(f"means must lie in [0, 1], got {self.means}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))

    @property
    def num_alternatives(self) -> int:
        return len(self.means) - 1

    @property
    def num_arms(self) -> int:
        return len(self.means)

    @property
    def mu0(self) -> float:
        return self.means[0]

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def gaps(self) -> tuple[float, ...]:
        best = self.best_mean
        return tuple(best - m for m in self.means)


class BudgetLedger:
    """Round-by-round budget accounting for a single episode.

    Tracks two budgets after each round t:

    * ``pseudo_budget``: sum of the true means of the played arms minus the
      constraint floor (noise ignored).
    * ``true_budget``: sum of realized rewards minus the floor, with the
      default arm's contribution to the floor taken at its known value mu0
      (exact in the adversarial setting, where the default reward is fixed).

    ``pre_play_budget`` is the realized budget lower bound available *before*
    the round-t reward arrives, the quantity safe-play wrappers test.
    Both running sums use compensated accumulation.
    """

    __slots__ = (
        "_means", "_alpha", "_mu0", "round",
        "true_budget", "pseudo_budget", "pre_play_budget",
        "min_pseudo_budget", "first_violation_round",
        "_mu_sum", "_mu_comp", "_x_sum", "_x_comp",
    )

    def __init__(self, instance: ProblemInstance) -> None:
        self._means = instance.means
        self._alpha = instance.alpha
        self._mu0 = instance.mu0
        self.round = 0
        self.true_budget = 0.0
        self.pseudo_budget = 0.0
        self.pre_play_budget = 0.0
        self.min_pseudo_budget = 0.0
        self.first_violation_round: int | None = None
        self._mu_sum = 0.0
        self._mu_comp = 0.0
        self._x_sum = 0.0
        self._x_comp = 0.0

    def update(self, t: int, arm: int, reward: float) -> "BudgetLedger":
        """Advance both budgets with round t's choice; must be called in order."""
        if t != self.round + 1:
            raise ValueError(f"budget update out of order: expected round {self.round + 1}, got {t}")
        self.round = t
        floor = (1.0 - self._alpha) * (t * self._mu0)
        self.pre_play_budget = self._x_sum - floor

        y = self._means[arm] - self._mu_comp
        s = self._mu_sum + y
        self._mu_comp = (s - self._mu_sum) - y
        self._mu_sum = s

        y = reward - self._x_comp
        x = self._x_sum + y
        self._x_comp = (x - self._x_sum) - y
        self._x_sum = x

        zp = s - floor
        self.pseudo_budget = zp
        self.true_budget = x - floor
        if zp < self.min_pseudo_budget:
            self.min_pseudo_budget = zp
        if zp < 0.0 and self.first_violation_round is None:
            self.first_violation_round = t
        return self


def update_budgets(ledger: BudgetLedger, t: int, arm: int, reward: float) -> BudgetLedger:
    """Functional alias for :meth:`BudgetLedger.update`."""
    return ledger.update(t, arm, reward)


@dataclass
class EpisodeTrace:
    """Per-round record of one episode plus terminal pull counts.

    ``proposed`` holds the arm the underlying learner wanted (-1 when the
    policy has no separate proposal), ``safe_mode`` flags rounds where a
    conservative override was active, and ``budget_lcb`` records the budget
    lower bound the policy acted on (NaN when not applicable).
    """

    arms: np.ndarray
    proposed: np.ndarray
    rewards: np.ndarray
    pseudo_budget: np.ndarray
    true_budget: np.ndarray
    safe_mode: np.ndarray
    budget_lcb: np.ndarray
    pulls: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        n = len(self.arms)
        for name in ("proposed", "rewards", "pseudo_budget", "true_budget", "safe_mode", "budget_lcb"):
            if len(getattr(self, name)) != n:
                raise MalformedTraceError(f"trace column {name!r} has {len(getattr(self, name))} rows, expected {n}")
        if self.pulls is None:
            if n and (self.arms.min() < 0):
                raise MalformedTraceError("trace contains negative arm indices")
            self.pulls = np.bincount(self.arms, minlength=int(self.arms.max()) + 1 if n else 1)

    @property
    def horizon(self) -> int:
        return len(self.arms)


def pseudo_regret(trace: EpisodeTrace, instance: ProblemInstance) -> float:
    """Mean-based regret of a completed trace: sum over arms of pulls * gap.

    Equal to ``n * best_mean - sum_t means[arm_t]``; always nonnegative.
    """
    if trace.horizon and trace.arms.min() < 0:
        raise MalformedTraceError("trace contains negative arm indices")
    pulls = np.bincount(trace.arms, minlength=instance.num_arms)
    if len(pulls) > instance.num_arms:
        bad = int(np.flatnonzero(pulls[instance.num_arms:])[0]) + instance.num_arms
        raise MalformedTraceError(f"trace references arm {bad}, instance has arms 0..{instance.num_alternatives}")
    gaps = instance.gaps
    return float(sum(int(pulls[i]) * gaps[i] for i in range(instance.num_arms)))


def realized_regret(trace: EpisodeTrace, all_rewards: np.ndarray) -> float:
    """Regret against the best fixed arm on this realization.

    ``all_rewards`` is the full (horizon, num_arms) reward matrix, which only
    the simulator knows.  No sign guarantee for arbitrary play sequences.
    """
    all_rewards = np.asarray(all_rewards, dtype=float)
    if all_rewards.ndim != 2 or all_rewards.shape[0] != trace.horizon:
        raise ValueError(
            f"reward matrix shape {all_rewards.shape} does not match trace horizon {trace.horizon}"
        )
    if trace.horizon and int(trace.arms.max()) >= all_rewards.shape[1]:
        raise ValueError("trace references an arm outside the reward matrix")
    best = float(np.max(np.sum(all_rewards, axis=0)))
    played = float(np.sum(trace.rewards))
    return best - played
