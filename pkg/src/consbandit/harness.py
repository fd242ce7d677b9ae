"""Episode runner, Monte Carlo aggregation, constraint audits, and bound references.

Replications are independent work items executed in fixed-size blocks by a
process pool; results are reduced in (sweep point, policy, replication)
order with compensated summation, so aggregates and CSV bodies are bitwise
identical across worker counts and repeated runs.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .confidence import PSI_VARIANTS, ConfidenceSchedule
from .core import (
    BudgetLedger,
    ConfigurationError,
    EpisodeTrace,
    KahanSum,
    ProblemInstance,
    constraint_floor,
    pseudo_regret,
    realized_regret,
)
from .environments import NOISE_KINDS, StochasticEnv, episode_streams
from .policies import (
    POLICY_NAMES,
    admissible_regret_bound,
    expectation_mode_params,
    make_policy,
)

WORKERS_ENV_VAR = "CONSBANDIT_THREADS"
REPLICATION_BLOCK = 64
T0_SCAN_CAP = 10**8

RUNS_CSV_FIXED_COLUMNS = (
    "policy", "alpha", "n", "delta", "replication", "seed",
    "pseudo_regret", "realized_regret", "min_pseudo_budget",
    "violated", "first_violation_round",
)
SUMMARY_CSV_COLUMNS = (
    "policy", "sweep_var", "sweep_value",
    "mean_pseudo_regret", "stderr", "violation_rate", "mean_min_budget",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """A full experiment: instance parameters, roster, replications, sweep.

    ``alpha`` or ``horizon`` (not both) may be a list, defining a sweep;
    ``delta`` is a number or the symbolic string "1/n", resolved per sweep
    point.  With ``expectation_mode`` the budget-gated policies run with the
    transformed (delta', alpha') while budgets are still reported against
    the configured alpha.
    """

    means: tuple[float, ...]
    alpha: float | tuple[float, ...]
    horizon: int | tuple[int, ...]
    delta: float | str
    policies: tuple[str, ...]
    replications: int
    seed_base: int
    noise: str = "gaussian"
    psi: str = "refined"
    expectation_mode: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if isinstance(self.alpha, (list, tuple)):
            object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if isinstance(self.horizon, (list, tuple)):
            object.__setattr__(self, "horizon", tuple(int(n) for n in self.horizon))
        object.__setattr__(self, "policies", tuple(self.policies))
        alpha_sweep = isinstance(self.alpha, tuple)
        horizon_sweep = isinstance(self.horizon, tuple)
        if alpha_sweep and horizon_sweep:
            raise ConfigurationError("alpha and n cannot both be sweep lists")
        for seq, name in ((self.alpha, "alpha"), (self.horizon, "n")):
            if isinstance(seq, tuple):
                if not seq:
                    raise ConfigurationError(f"{name} sweep list is empty")
                if list(seq) != sorted(seq):
                    raise ConfigurationError(f"{name} sweep list must be sorted ascending")
        if not self.policies:
            raise ConfigurationError("policies list is empty")
        for p in self.policies:
            if p not in POLICY_NAMES:
                raise ConfigurationError(f"unknown policy {p!r}; expected one of {POLICY_NAMES}")
        if self.replications < 1:
            raise ConfigurationError(f"replications must be >= 1, got {self.replications}")
        if self.noise not in NOISE_KINDS:
            raise ConfigurationError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.psi not in PSI_VARIANTS:
            raise ConfigurationError(f"psi must be one of {PSI_VARIANTS}, got {self.psi!r}")
        if not isinstance(self.delta, str):
            if not 0.0 < float(self.delta) < 1.0:
                raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        elif self.delta != "1/n":
            raise ConfigurationError(f'delta must be a number or "1/n", got {self.delta!r}')
        # Walk every sweep point so bad combinations fail before any episode runs.
        for alpha, horizon in self.sweep_points():
            delta = self.resolve_delta(horizon)
            ProblemInstance(self.means, alpha, delta, horizon)
            if self.expectation_mode:
                expectation_mode_params(alpha, horizon)

    @property
    def sweep_kind(self) -> str:
        if isinstance(self.alpha, tuple):
            return "alpha"
        if isinstance(self.horizon, tuple):
            return "horizon"
        return "none"

    def sweep_points(self) -> list[tuple[float, int]]:
        """(alpha, horizon) pairs, one per sweep point."""
        if self.sweep_kind == "alpha":
            return [(a, self.horizon) for a in self.alpha]
        if self.sweep_kind == "horizon":
            return [(self.alpha, n) for n in self.horizon]
        return [(self.alpha, self.horizon)]

    def resolve_delta(self, horizon: int) -> float:
        if self.delta == "1/n":
            return 1.0 / horizon
        return float(self.delta)


@dataclass(frozen=True)
class RunPoint:
    """One (sweep point, policy) cell of an experiment, ready to replicate."""

    policy: str
    instance: ProblemInstance
    psi: str
    noise: str
    seed_base: int
    policy_alpha: float | None = None
    sweep_var: str = "none"
    sweep_value: float = 0.0


@dataclass
class SummaryStats:
    """Monte Carlo aggregates for one run point."""

    policy: str
    sweep_var: str
    sweep_value: float
    replications: int
    mean_pseudo_regret: float
    stderr: float
    mean_realized_regret: float
    violation_rate: float
    mean_min_budget: float
    mean_pulls: tuple[float, ...] = field(default_factory=tuple)


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else CONSBANDIT_THREADS, else CPU count."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigurationError(f"{WORKERS_ENV_VAR} must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def run_episode(policy, env, instance: ProblemInstance) -> EpisodeTrace:
    """Play one full episode: select, draw reward, observe, account budgets."""
    if env.num_arms != instance.num_arms:
        raise ConfigurationError(
            f"environment has {env.num_arms} arms, instance expects {instance.num_arms}")
    if policy.num_arms != instance.num_arms:
        raise ConfigurationError(
            f"policy {policy.name!r} has {policy.num_arms} arms, instance expects {instance.num_arms}")
    n = instance.horizon
    ledger = BudgetLedger(instance)
    arms = [0] * n
    proposed = [0] * n
    rewards = [0.0] * n
    pseudo = [0.0] * n
    true_b = [0.0] * n
    safe = [False] * n
    lcb = [0.0] * n
    select = policy.select
    observe = policy.observe
    draw = env.reward
    update = ledger.update
    for t in range(1, n + 1):
        arm = select(t)
        r = draw(t, arm)
        observe(t, arm, r)
        update(t, arm, r)
        i = t - 1
        arms[i] = arm
        rewards[i] = r
        pseudo[i] = ledger.pseudo_budget
        true_b[i] = ledger.true_budget
        p = policy.last_proposed
        proposed[i] = -1 if p is None else p
        safe[i] = policy.last_safe
        lcb[i] = policy.last_budget_lcb
    arms_arr = np.asarray(arms, dtype=np.int64)
    return EpisodeTrace(
        arms=arms_arr,
        proposed=np.asarray(proposed, dtype=np.int64),
        rewards=np.asarray(rewards),
        pseudo_budget=np.asarray(pseudo),
        true_budget=np.asarray(true_b),
        safe_mode=np.asarray(safe, dtype=bool),
        budget_lcb=np.asarray(lcb),
        pulls=np.bincount(arms_arr, minlength=instance.num_arms),
    )


def simulate_run(point: RunPoint, replication: int, want_trace: bool = False):
    """Run one seeded replication of a run point and summarize it as a CSV row."""
    env_rng, policy_rng, seed = episode_streams(point.seed_base, replication)
    instance = point.instance
    env = StochasticEnv(instance.means, instance.horizon, env_rng, noise=point.noise)
    schedule = ConfidenceSchedule(point.psi, instance.num_alternatives, instance.delta)
    policy = make_policy(point.policy, instance, schedule, rng=policy_rng,
                         alpha=point.policy_alpha)
    trace = run_episode(policy, env, instance)
    row = {
        "policy": point.policy,
        "alpha": instance.alpha,
        "n": instance.horizon,
        "delta": instance.delta,
        "replication": replication,
        "seed": seed,
        "pseudo_regret": pseudo_regret(trace, instance),
        "realized_regret": realized_regret(trace, env.reward_matrix),
        "min_pseudo_budget": min(0.0, float(np.min(trace.pseudo_budget))),
        "violated": bool(np.any(trace.pseudo_budget < 0.0)),
        "first_violation_round": _first_violation(trace.pseudo_budget),
        "pulls": tuple(int(c) for c in trace.pulls),
    }
    if want_trace:
        return row, trace
    return row


def _first_violation(budgets: np.ndarray) -> int | None:
    below = np.flatnonzero(budgets < 0.0)
    return int(below[0]) + 1 if len(below) else None


def _run_block(point: RunPoint, start: int, stop: int) -> list[dict]:
    return [simulate_run(point, rep) for rep in range(start, stop)]


def build_run_points(config: ExperimentConfig) -> list[RunPoint]:
    """Expand a config into its (sweep point, policy) grid, in canonical order."""
    points = []
    kind = config.sweep_kind
    for alpha, horizon in config.sweep_points():
        delta = config.resolve_delta(horizon)
        policy_alpha = None
        if config.expectation_mode:
            delta, policy_alpha = expectation_mode_params(alpha, horizon)
        instance = ProblemInstance(config.means, alpha, delta, horizon)
        sweep_value = alpha if kind != "horizon" else float(horizon)
        for name in config.policies:
            points.append(RunPoint(
                policy=name,
                instance=instance,
                psi=config.psi,
                noise=config.noise,
                seed_base=config.seed_base,
                policy_alpha=policy_alpha,
                sweep_var=kind,
                sweep_value=sweep_value,
            ))
    return points


def monte_carlo(config: ExperimentConfig, workers: int | None = None,
                ) -> tuple[list[SummaryStats], list[dict]]:
    """Run all replications of all run points; return (summaries, per-run rows).

    Work is split into fixed replication blocks whose results are reduced in
    block order, so the output is independent of the worker count.
    """
    points = build_run_points(config)
    reps = config.replications
    blocks = [(p_idx, start, min(start + REPLICATION_BLOCK, reps))
              for p_idx in range(len(points))
              for start in range(0, reps, REPLICATION_BLOCK)]
    results: dict[tuple[int, int], list[dict]] = {}
    n_workers = resolve_workers(workers)
    if n_workers <= 1 or len(blocks) == 1:
        for p_idx, start, stop in blocks:
            results[(p_idx, start)] = _run_block(points[p_idx], start, stop)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = {
                pool.submit(_run_block, points[p_idx], start, stop): (p_idx, start)
                for p_idx, start, stop in blocks
            }
            for fut, key in futures.items():
                results[key] = fut.result()
    rows: list[dict] = []
    summaries: list[SummaryStats] = []
    for p_idx, point in enumerate(points):
        point_rows: list[dict] = []
        for start in range(0, reps, REPLICATION_BLOCK):
            point_rows.extend(results[(p_idx, start)])
        rows.extend(point_rows)
        summaries.append(summarize_rows(point, point_rows))
    return summaries, rows


def summarize_rows(point: RunPoint, rows: list[dict]) -> SummaryStats:
    """Aggregate one run point's rows (in replication order) into summary stats."""
    n = len(rows)
    regrets = [row["pseudo_regret"] for row in rows]
    mean = kmean(regrets)
    if n > 1:
        var = kmean([(r - mean) ** 2 for r in regrets]) * n / (n - 1)
        stderr = math.sqrt(var / n)
    else:
        stderr = 0.0
    num_arms = point.instance.num_arms
    pull_means = tuple(
        kmean([row["pulls"][i] for row in rows]) for i in range(num_arms)
    )
    return SummaryStats(
        policy=point.policy,
        sweep_var=point.sweep_var,
        sweep_value=point.sweep_value,
        replications=n,
        mean_pseudo_regret=mean,
        stderr=stderr,
        mean_realized_regret=kmean([row["realized_regret"] for row in rows]),
        violation_rate=kmean([1.0 if row["violated"] else 0.0 for row in rows]),
        mean_min_budget=kmean([row["min_pseudo_budget"] for row in rows]),
        mean_pulls=pull_means,
    )


def kmean(values) -> float:
    """Compensated mean over a sequence (order-stable)."""
    acc = KahanSum()
    count = 0
    for v in values:
        acc.add(v)
        count += 1
    return acc.total / count if count else 0.0


def pseudo_budget_curves(point: RunPoint, replications: int,
                         workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-round mean and standard error of the pseudo-budget over replications.

    Moments are accumulated relative to the first replication's curve, which
    kills the cancellation that would otherwise pollute near-zero variances
    (early rounds are often identical across replications).
    """
    _, first = simulate_run(point, 0, want_trace=True)
    center = first.pseudo_budget.copy()
    n = point.instance.horizon
    blocks = [(start, min(start + REPLICATION_BLOCK, replications))
              for start in range(0, replications, REPLICATION_BLOCK)]
    n_workers = resolve_workers(workers)
    if n_workers <= 1 or len(blocks) == 1:
        parts = [_budget_block(point, a, b, center) for a, b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_budget_block, point, a, b, center) for a, b in blocks]
            parts = [f.result() for f in futures]
    total = np.zeros(n)
    total_sq = np.zeros(n)
    for s, sq in parts:
        total += s
        total_sq += sq
    shifted_mean = total / replications
    mean = center + shifted_mean
    if replications > 1:
        var = (total_sq - replications * shifted_mean**2) / (replications - 1)
        stderr = np.sqrt(np.maximum(var, 0.0) / replications)
    else:
        stderr = np.zeros(n)
    return mean, stderr


def _budget_block(point: RunPoint, start: int, stop: int,
                  center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = point.instance.horizon
    s = np.zeros(n)
    sq = np.zeros(n)
    for rep in range(start, stop):
        _, trace = simulate_run(point, rep, want_trace=True)
        d = trace.pseudo_budget - center
        s += d
        sq += d**2
    return s, sq


def audit_constraint(trace: EpisodeTrace, instance: ProblemInstance,
                     mode: str = "pseudo") -> tuple[bool, int | None, float]:
    """Check the return constraint over a whole trace.

    "pseudo" tests the mean-based budget every round; "realized" tests the
    realized cumulative reward against the floor (the default arm's reward
    taken at its fixed value mu0, as in the adversarial setting).  Returns
    (violated, first violating round or None, minimum budget seen).
    """
    if mode == "pseudo":
        budgets = trace.pseudo_budget
        min_budget = min(0.0, float(np.min(budgets))) if trace.horizon else 0.0
        return bool(np.any(budgets < 0.0)), _first_violation(budgets), min_budget
    if mode != "realized":
        raise ValueError(f"unknown audit mode {mode!r}")
    cum = 0.0
    min_budget = 0.0
    first = None
    alpha, mu0 = instance.alpha, instance.mu0
    for t in range(1, trace.horizon + 1):
        cum += trace.rewards[t - 1]
        z = cum - constraint_floor(alpha, mu0, t)
        if z < min_budget:
            min_budget = z
        if z < 0.0 and first is None:
            first = t
    return first is not None, first, min_budget


@dataclass(frozen=True)
class PullBoundCheck:
    arm: int
    pulls: int
    bound: float
    ok: bool


def audit_pull_bound(trace: EpisodeTrace, instance: ProblemInstance,
                     schedule: ConfidenceSchedule) -> list[PullBoundCheck]:
    """Compare each suboptimal alternative's pull count to 4 L / gap^2 + 1.

    L is the confidence width at the horizon.  Arms with zero gap are
    excluded (the bound is vacuous there); the bound holds whenever the
    confidence intervals were valid throughout the run.
    """
    level = schedule.psi(instance.horizon)
    gaps = instance.gaps
    pulls = np.bincount(trace.arms, minlength=instance.num_arms)
    checks = []
    for arm in range(1, instance.num_arms):
        gap = gaps[arm]
        if gap <= 0.0:
            continue
        bound = 4.0 * level / gap**2 + 1.0
        count = int(pulls[arm])
        checks.append(PullBoundCheck(arm=arm, pulls=count, bound=bound, ok=count <= bound))
    return checks


def lower_bound_reference(num_alternatives: int, horizon: int, alpha: float,
                          mu0: float) -> tuple[float, bool]:
    """Worst-case regret floor for any constraint-satisfying learner.

    B = max(K / ((16e+8) alpha mu0), sqrt(K n) / sqrt(16e+8)).  The validity
    flag reports whether min(mu0, 1-mu0) >= max(1/(2 sqrt(alpha)),
    sqrt(e + 1/2)) * sqrt(K/n), the regime where the floor is proven.
    """
    if num_alternatives < 1 or horizon < 1 or alpha <= 0.0 or mu0 <= 0.0:
        raise ConfigurationError("lower-bound reference needs positive parameters")
    c = 16.0 * math.e + 8.0
    bound = max(num_alternatives / (c * alpha * mu0),
                math.sqrt(num_alternatives * horizon) / math.sqrt(c))
    threshold = max(0.5 / math.sqrt(alpha), math.sqrt(math.e + 0.5)) \
        * math.sqrt(num_alternatives / horizon)
    valid = min(mu0, 1.0 - mu0) >= threshold
    return bound, valid


def lower_bound_B(K: int, n: int, alpha: float, mu0: float) -> tuple[float, bool]:
    """Alias for :func:`lower_bound_reference`."""
    return lower_bound_reference(K, n, alpha, mu0)


def theorem_default_rounds(num_alternatives: int, alpha: float, mu0: float,
                           delta: float, cap: int = T0_SCAN_CAP) -> int:
    """Largest t with alpha mu0 t <= admissible_regret_bound(t) + mu0.

    This is the worst-case number of safe (default) rounds the wrapper can
    be forced into.  The crossing is found by bisection; if the condition
    still holds at ``cap`` the scan fails rather than returning a truncated
    value (the crossing grows like 1/(alpha mu0)^2 and can be astronomically
    large for tiny alpha mu0).
    """
    def holds(t: int) -> bool:
        return alpha * mu0 * t <= admissible_regret_bound(t, num_alternatives, delta) + mu0

    if holds(cap):
        raise RuntimeError(
            f"safe-round scan exceeded cap {cap}: alpha*mu0={alpha * mu0:.3g} is too small")
    lo, hi = 1, cap  # holds(1) is always true: alpha mu0 <= mu0 and the bound is positive
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


def audit_adversarial_regret(trace: EpisodeTrace, rewards: np.ndarray,
                             num_alternatives: int, alpha: float, mu0: float,
                             delta: float) -> tuple[float, float, bool]:
    """Realized regret vs. the safe-play guarantee t0 + admissible bound at n."""
    regret = realized_regret(trace, rewards)
    t0 = theorem_default_rounds(num_alternatives, alpha, mu0, delta)
    bound = t0 + admissible_regret_bound(trace.horizon, num_alternatives, delta)
    return regret, bound, regret <= bound


def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double exactly."""
    return f"{x:.17g}"


def runs_csv_header(num_arms: int) -> list[str]:
    return list(RUNS_CSV_FIXED_COLUMNS) + [f"pulls_{i}" for i in range(num_arms)]


def runs_csv_lines(rows: list[dict], num_arms: int) -> list[str]:
    lines = [",".join(runs_csv_header(num_arms))]
    for row in rows:
        first = row["first_violation_round"]
        cells = [
            row["policy"],
            format_float(row["alpha"]),
            str(row["n"]),
            format_float(row["delta"]),
            str(row["replication"]),
            str(row["seed"]),
            format_float(row["pseudo_regret"]),
            format_float(row["realized_regret"]),
            format_float(row["min_pseudo_budget"]),
            "1" if row["violated"] else "0",
            "" if first is None else str(first),
        ]
        cells.extend(str(c) for c in row["pulls"])
        lines.append(",".join(cells))
    return lines


def summary_csv_lines(summaries: list[SummaryStats]) -> list[str]:
    lines = [",".join(SUMMARY_CSV_COLUMNS)]
    for s in summaries:
        lines.append(",".join([
            s.policy,
            s.sweep_var,
            format_float(s.sweep_value),
            format_float(s.mean_pseudo_regret),
            format_float(s.stderr),
            format_float(s.violation_rate),
            format_float(s.mean_min_budget),
        ]))
    return lines


def write_runs_csv(path, rows: list[dict], num_arms: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(runs_csv_lines(rows, num_arms)) + "\n")


def write_summary_csv(path, summaries: list[SummaryStats]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(summary_csv_lines(summaries)) + "\n")
