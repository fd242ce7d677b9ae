"""Decision-making algorithms behind a uniform select/observe contract.

Every policy exposes ``select(t) -> arm`` and ``observe(t, arm, reward)``;
``observe`` must be called exactly once per round with the arm ``select``
returned.  Policies are stateful, owned by a single episode, and draw any
randomness from an injected generator.  Ties always break toward the lowest
arm index so runs are reproducible.

Roster names accepted by :func:`make_policy`:
"ucb", "cucb", "cucb-unknown-mu0", "cucb-alt", "budgetfirst",
"unbalanced-moss", "exp3ix", "safe-exp3ix".
"""
from __future__ import annotations

import logging
import math

import numpy as np

from .confidence import ConfidenceSchedule
from .core import ArmStats, ConfigurationError, ProblemInstance, update_stats

logger = logging.getLogger(__name__)

POLICY_NAMES = (
    "ucb",
    "cucb",
    "cucb-unknown-mu0",
    "cucb-alt",
    "budgetfirst",
    "unbalanced-moss",
    "exp3ix",
    "safe-exp3ix",
)


def _argmax_lowest(values) -> int:
    """Index of the maximum, breaking ties toward the lowest index."""
    best = values[0]
    j = 0
    for i in range(1, len(values)):
        v = values[i]
        if v > best:
            best = v
            j = i
    return j


def budget_lcb_known_mu0(stats, lower_bounds, proposed: int, t: int,
                         alpha: float, mu0: float) -> float:
    """Lower confidence bound on the mean budget after playing ``proposed`` at round t.

    Grouped per-arm form: sum_i pulls_i * lcb_i + lcb_proposed - (1-alpha) t mu0,
    where the default arm's bound is its known mean.
    """
    s = 0.0
    for i in range(len(stats)):
        c = stats[i].pulls
        if c:
            s += c * lower_bounds[i]
    return s + lower_bounds[proposed] - (1.0 - alpha) * (t * mu0)


def budget_lcb_unknown_mu0(stats, lower_bounds, theta0: float, proposed: int,
                           t: int, alpha: float) -> float:
    """Budget lower bound when the default arm's mean is itself estimated.

    sum_{i>=1} pulls_i * lcb_i + lcb_proposed + (pulls_0 - (1-alpha) t) * ucb_0.
    With no default pulls yet the bound is -inf, forcing the default arm.
    """
    pulls0 = stats[0].pulls
    if pulls0 == 0:
        return -math.inf
    s = 0.0
    for i in range(1, len(stats)):
        c = stats[i].pulls
        if c:
            s += c * lower_bounds[i]
    return s + lower_bounds[proposed] + (pulls0 - (1.0 - alpha) * t) * theta0


class Policy:
    """Base select/observe contract plus per-round trace hooks."""

    name = "policy"
    last_proposed: int | None = None
    last_budget_lcb: float = math.nan
    last_safe: bool = False

    @property
    def num_arms(self) -> int:
        raise NotImplementedError

    def select(self, t: int) -> int:
        raise NotImplementedError

    def observe(self, t: int, arm: int, reward: float) -> None:
        raise NotImplementedError


class UcbPolicy(Policy):
    """Optimistic index policy with anytime confidence radii.

    When the default arm's mean is known, its index is pinned to that mean;
    otherwise it gets confidence intervals like every other arm.  Unexplored
    arms carry an infinite index and are pulled first, lowest index first.
    """

    name = "ucb"

    def __init__(self, num_alternatives: int, schedule: ConfidenceSchedule,
                 known_mu0: float | None = None):
        m = num_alternatives + 1
        self._stats = [ArmStats() for _ in range(m)]
        self._schedule = schedule
        self._known_mu0 = known_mu0
        self._theta = [math.inf] * m
        if known_mu0 is not None:
            self._theta[0] = known_mu0

    @property
    def num_arms(self) -> int:
        return len(self._stats)

    @property
    def upper_bounds(self) -> list[float]:
        return list(self._theta)

    def arm_stats(self, arm: int) -> ArmStats:
        return self._stats[arm]

    def select(self, t: int) -> int:
        return _argmax_lowest(self._theta)

    def observe(self, t: int, arm: int, reward: float) -> None:
        st = update_stats(self._stats[arm], reward)
        if arm == 0 and self._known_mu0 is not None:
            return
        rad = self._schedule.radius(st.pulls)
        self._theta[arm] = st.empirical_mean + rad


class ConservativeUcb(Policy):
    """Optimistic play gated by a lower confidence bound on the budget.

    Each round the UCB arm is proposed; it is played only if the budget
    bound stays nonnegative, otherwise the round is spent on the default
    arm (or, with ``fallback="lcb"``, on the arm with the highest lower
    confidence bound, which replenishes the budget at least as fast while
    risking less regret).  Requires the default arm's mean.
    """

    name = "cucb"

    def __init__(self, num_alternatives: int, schedule: ConfidenceSchedule,
                 alpha: float, mu0: float, fallback: str = "default"):
        if fallback not in ("default", "lcb"):
            raise ValueError(f"unknown fallback {fallback!r}")
        m = num_alternatives + 1
        self._stats = [ArmStats() for _ in range(m)]
        self._schedule = schedule
        self._alpha = alpha
        self._mu0 = mu0
        self._fallback_lcb = fallback == "lcb"
        if self._fallback_lcb:
            self.name = "cucb-alt"
        self._theta = [math.inf] * m
        self._theta[0] = mu0
        self._lower = [0.0] * m
        self._lower[0] = mu0

    @property
    def num_arms(self) -> int:
        return len(self._stats)

    @property
    def upper_bounds(self) -> list[float]:
        return list(self._theta)

    @property
    def lower_bounds(self) -> list[float]:
        return list(self._lower)

    def arm_stats(self, arm: int) -> ArmStats:
        return self._stats[arm]

    def select(self, t: int) -> int:
        j = _argmax_lowest(self._theta)
        xi = budget_lcb_known_mu0(self._stats, self._lower, j, t, self._alpha, self._mu0)
        self.last_proposed = j
        self.last_budget_lcb = xi
        if xi >= 0.0:
            self.last_safe = False
            return j
        self.last_safe = True
        if self._fallback_lcb:
            return _argmax_lowest(self._lower)
        return 0

    def observe(self, t: int, arm: int, reward: float) -> None:
        st = update_stats(self._stats[arm], reward)
        if arm == 0:
            return
        rad = self._schedule.radius(st.pulls)
        mean = st.empirical_mean
        self._theta[arm] = mean + rad
        lo = mean - rad
        self._lower[arm] = lo if lo > 0.0 else 0.0


class ConservativeUcbUnknownMu0(Policy):
    """Budget-gated optimistic play that also has to learn the default arm.

    The default arm gets confidence intervals like any other, and the
    budget bound charges the shortfall between default pulls and the
    constraint floor at the default arm's *upper* confidence bound.
    """

    name = "cucb-unknown-mu0"

    def __init__(self, num_alternatives: int, schedule: ConfidenceSchedule, alpha: float):
        m = num_alternatives + 1
        self._stats = [ArmStats() for _ in range(m)]
        self._schedule = schedule
        self._alpha = alpha
        self._theta = [math.inf] * m
        self._lower = [0.0] * m

    @property
    def num_arms(self) -> int:
        return len(self._stats)

    @property
    def upper_bounds(self) -> list[float]:
        return list(self._theta)

    @property
    def lower_bounds(self) -> list[float]:
        return list(self._lower)

    def arm_stats(self, arm: int) -> ArmStats:
        return self._stats[arm]

    def select(self, t: int) -> int:
        j = _argmax_lowest(self._theta)
        xi = budget_lcb_unknown_mu0(self._stats, self._lower, self._theta[0], j, t, self._alpha)
        self.last_proposed = j
        self.last_budget_lcb = xi
        if xi >= 0.0:
            self.last_safe = False
            return j
        self.last_safe = True
        return 0

    def observe(self, t: int, arm: int, reward: float) -> None:
        st = update_stats(self._stats[arm], reward)
        rad = self._schedule.radius(st.pulls)
        mean = st.empirical_mean
        self._theta[arm] = mean + rad
        lo = mean - rad
        self._lower[arm] = lo if lo > 0.0 else 0.0


def worst_case_regret_bound(horizon: int, num_alternatives: int,
                            schedule: ConfidenceSchedule) -> float:
    """High-probability regret ceiling for unconstrained optimistic play.

    2 * sqrt(n * K * psi(n)) + K: the square-root term bounds the regret of
    exploratory pulls, the +K covers one final pull of each arm.
    """
    return 2.0 * math.sqrt(horizon * num_alternatives * schedule.psi(horizon)) + num_alternatives


def budgetfirst_default_rounds(r_worst: float, alpha: float, mu0: float, horizon: int) -> int:
    """Rounds of default play needed before r_worst regret can never violate the floor.

    ceil(r_worst / (alpha * mu0)), capped at the horizon.
    """
    if mu0 <= 0.0:
        raise ConfigurationError("budget-first scheduling needs mu0 > 0")
    if alpha <= 0.0:
        raise ConfigurationError("budget-first scheduling needs alpha > 0")
    t0 = math.ceil(r_worst / (alpha * mu0))
    return min(horizon, t0)


def budgetfirst_t0(instance: ProblemInstance, schedule: ConfidenceSchedule) -> int:
    """Default-play prefix length for the budget-first baseline."""
    r_worst = worst_case_regret_bound(instance.horizon, instance.num_alternatives, schedule)
    return budgetfirst_default_rounds(r_worst, instance.alpha, instance.mu0, instance.horizon)


class BudgetFirstPolicy(Policy):
    """Naive baseline: bank budget on the default arm, then run UCB.

    Plays arm 0 for the first t0 rounds, then switches to optimistic play
    with the default arm's known mean.  Default-phase observations are fed
    into the UCB statistics (strictly more information).
    """

    name = "budgetfirst"

    def __init__(self, instance: ProblemInstance, schedule: ConfidenceSchedule):
        self.t0 = budgetfirst_t0(instance, schedule)
        self._ucb = UcbPolicy(instance.num_alternatives, schedule, known_mu0=instance.mu0)

    @property
    def num_arms(self) -> int:
        return self._ucb.num_arms

    def arm_stats(self, arm: int) -> ArmStats:
        return self._ucb.arm_stats(arm)

    def select(self, t: int) -> int:
        if t <= self.t0:
            self.last_proposed = None
            self.last_safe = True
            return 0
        self.last_proposed = None
        self.last_safe = False
        return self._ucb.select(t)

    def observe(self, t: int, arm: int, reward: float) -> None:
        self._ucb.observe(t, arm, reward)


def unbalanced_moss_budgets(horizon: int, num_alternatives: int,
                            alpha: float, mu0: float) -> list[float]:
    """Per-arm regret targets that trade default-arm for alternative-arm regret.

    The default arm's target shrinks as the constraint tightens:
    B_i = sqrt(n K) + K / (alpha mu0) for alternatives, B_0 = n K / B_i.
    """
    if mu0 <= 0.0 or alpha <= 0.0:
        raise ConfigurationError("regret targets need alpha > 0 and mu0 > 0")
    n, k = horizon, num_alternatives
    b_alt = math.sqrt(n * k) + k / (alpha * mu0)
    b0 = n * k / b_alt
    return [b0] + [b_alt] * k


class UnbalancedMossPolicy(Policy):
    """MOSS-style index policy with per-arm regret targets.

    index_i = mean_i + sqrt((2 / T_i) * max(0, log(n^2 / (B_i^2 T_i)))).
    Meets the return constraint only at the final round, not anytime; serves
    as the unconstrained-but-tuned comparison point.
    """

    name = "unbalanced-moss"

    def __init__(self, instance: ProblemInstance):
        m = instance.num_arms
        self._stats = [ArmStats() for _ in range(m)]
        self._budgets = unbalanced_moss_budgets(
            instance.horizon, instance.num_alternatives, instance.alpha, instance.mu0)
        self._n_sq = float(instance.horizon) ** 2
        self._index = [math.inf] * m

    @property
    def num_arms(self) -> int:
        return len(self._stats)

    @property
    def indices(self) -> list[float]:
        return list(self._index)

    def arm_stats(self, arm: int) -> ArmStats:
        return self._stats[arm]

    def select(self, t: int) -> int:
        return _argmax_lowest(self._index)

    def observe(self, t: int, arm: int, reward: float) -> None:
        st = update_stats(self._stats[arm], reward)
        c = st.pulls
        b = self._budgets[arm]
        log_arg = self._n_sq / (b * b * c)
        bonus = math.sqrt((2.0 / c) * math.log(log_arg)) if log_arg > 1.0 else 0.0
        self._index[arm] = st.empirical_mean + bonus


class Exp3IxPolicy(Policy):
    """Adversarial bandit learner with implicit exploration.

    Works on losses 1 - reward over all K+1 arms.  Round t uses learning
    rate eta_t = 2 * gamma_t with gamma_t = sqrt(log(M) / (4 M t)), M = K+1,
    samples from the exponential-weights distribution, and grows the played
    arm's loss estimate by loss / (p + gamma_t).  Rewards outside [0, 1] are
    clamped (logged once per instance).
    """

    name = "exp3ix"

    def __init__(self, num_alternatives: int, rng: np.random.Generator):
        self._m = num_alternatives + 1
        self._rng = rng
        self._loss_est = [0.0] * self._m
        self._log_m = math.log(self._m)
        self._last_probs: list[float] = [1.0 / self._m] * self._m
        self._last_gamma = 0.0
        self.clamped_rewards = 0

    @property
    def num_arms(self) -> int:
        return self._m

    @property
    def last_distribution(self) -> list[float]:
        return list(self._last_probs)

    def select(self, t: int) -> int:
        gamma = math.sqrt(self._log_m / (4.0 * self._m * t))
        eta = 2.0 * gamma
        est = self._loss_est
        lo = min(est)
        weights = [math.exp(-eta * (e - lo)) for e in est]
        total = sum(weights)
        probs = [w / total for w in weights]
        self._last_probs = probs
        self._last_gamma = gamma
        u = self._rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return self._m - 1

    def observe(self, t: int, arm: int, reward: float) -> None:
        x = reward
        if x < 0.0 or x > 1.0:
            self.clamped_rewards += 1
            if self.clamped_rewards == 1:
                logger.warning(
                    "exp3ix received reward %.4g outside [0, 1]; clamping (reported once)", x)
            x = 0.0 if x < 0.0 else 1.0
        loss = 1.0 - x
        self._loss_est[arm] += loss / (self._last_probs[arm] + self._last_gamma)


class SafePlayWrapper(Policy):
    """Defer to a base learner only when the realized budget can absorb a zero reward.

    Before round t the wrapper checks the pre-play budget
    ``sum_{s<t} X_s - (1-alpha) mu0 t``; if nonnegative it forwards the base
    learner's choice (advancing the base's own round clock and feeding it
    the observed reward), otherwise it plays the default arm and leaves the
    base learner frozen.  Assumes the default arm pays exactly mu0.
    """

    name = "safe-wrapper"

    def __init__(self, base: Policy, alpha: float, mu0: float):
        self.base = base
        self.name = f"safe-{base.name}"
        self._alpha = alpha
        self._mu0 = mu0
        self._cum_reward = 0.0
        self._base_rounds = 0
        self._pending = False

    @property
    def num_arms(self) -> int:
        return self.base.num_arms

    @property
    def base_rounds(self) -> int:
        return self._base_rounds

    def select(self, t: int) -> int:
        z = self._cum_reward - (1.0 - self._alpha) * (t * self._mu0)
        self.last_budget_lcb = z
        if z >= 0.0:
            self._pending = True
            self.last_safe = False
            arm = self.base.select(self._base_rounds + 1)
            self.last_proposed = arm
            return arm
        self._pending = False
        self.last_safe = True
        self.last_proposed = None
        return 0

    def observe(self, t: int, arm: int, reward: float) -> None:
        self._cum_reward += reward
        if self._pending:
            self._base_rounds += 1
            self.base.observe(self._base_rounds, arm, reward)
            self._pending = False


def admissible_regret_bound(t: int, num_alternatives: int, delta: float) -> float:
    """Anytime high-probability regret bound of the wrapped adversarial learner.

    7 * sqrt(K t log K) * log(4 t^2 / delta); needs K >= 2 so log K > 0.
    """
    if num_alternatives < 2:
        raise ValueError("the regret bound needs at least 2 alternatives (log K > 0)")
    if t < 1:
        raise ValueError("t must be >= 1")
    k = num_alternatives
    return 7.0 * math.sqrt(k * t * math.log(k)) * math.log(4.0 * t * t / delta)


def expectation_mode_params(alpha: float, horizon: int) -> tuple[float, float]:
    """Parameters that turn the high-probability constraint into one in expectation.

    Returns (delta', alpha') = (1/n, (alpha - 1/n) / (1 - 1/n)).  Running the
    budget-gated policies with these satisfies the constraint in expectation.
    Requires alpha >= 2/n; below that the exploration budget is O(1) and the
    problem is hopeless.
    """
    delta = 1.0 / horizon
    if alpha < 2.0 * delta:
        raise ConfigurationError(
            f"expectation mode needs alpha >= 2/n; got alpha={alpha}, n={horizon}")
    alpha_prime = (alpha - delta) / (1.0 - delta)
    return delta, alpha_prime


def make_policy(name: str, instance: ProblemInstance, schedule: ConfidenceSchedule,
                rng: np.random.Generator | None = None,
                alpha: float | None = None) -> Policy:
    """Build a roster policy for ``instance``.

    ``alpha`` overrides the constraint fraction the policy enforces
    (used by expectation mode); budgets are still reported against the
    instance's own alpha.  Randomized policies require ``rng``.
    """
    a = instance.alpha if alpha is None else alpha
    k = instance.num_alternatives
    if name == "ucb":
        return UcbPolicy(k, schedule, known_mu0=instance.mu0)
    if name == "cucb":
        return ConservativeUcb(k, schedule, a, instance.mu0)
    if name == "cucb-alt":
        return ConservativeUcb(k, schedule, a, instance.mu0, fallback="lcb")
    if name == "cucb-unknown-mu0":
        return ConservativeUcbUnknownMu0(k, schedule, a)
    if name == "budgetfirst":
        if alpha is None:
            return BudgetFirstPolicy(instance, schedule)
        adjusted = ProblemInstance(instance.means, a, instance.delta, instance.horizon)
        return BudgetFirstPolicy(adjusted, schedule)
    if name == "unbalanced-moss":
        if alpha is None:
            return UnbalancedMossPolicy(instance)
        adjusted = ProblemInstance(instance.means, a, instance.delta, instance.horizon)
        return UnbalancedMossPolicy(adjusted)
    if name == "exp3ix":
        if rng is None:
            raise ConfigurationError("exp3ix needs a random generator")
        return Exp3IxPolicy(k, rng)
    if name == "safe-exp3ix":
        if rng is None:
            raise ConfigurationError("safe-exp3ix needs a random generator")
        return SafePlayWrapper(Exp3IxPolicy(k, rng), a, instance.mu0)
    raise ConfigurationError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
