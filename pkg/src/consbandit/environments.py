"""Reward generators for the stochastic and adversarial settings.

Environments pre-draw (or pre-load) the full horizon-by-arms reward matrix,
so a draw for (round, arm) never depends on the learner's path and a seeded
run is bitwise reproducible.  Each environment instance belongs to exactly
one episode.
"""
from __future__ import annotations

import csv
import logging

import numpy as np

logger = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian", "bernoulli")
BUILTIN_ADVERSARIES = ("constant", "drift", "stochastic-disguise")


class MalformedEnvironmentError(ValueError):
    """Reward table is incomplete or inconsistent with the run."""


def episode_streams(seed_base: int, replication: int):
    """Independent (environment, policy) generators for one replication.

    The replication seed is ``seed_base XOR replication``; the two purposes
    get split substreams so environment noise and policy randomization never
    share state, including across parallel workers.
    """
    seed = seed_base ^ replication
    env_ss, policy_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(policy_ss), seed


class StochasticEnv:
    """Independent noisy rewards around fixed arm means.

    noise "gaussian": mean + sigma * N(0, 1) with sigma = 1 by default
    (1-subgaussian); "bernoulli": {0, 1} draws with the arm's mean.
    """

    def __init__(self, means, horizon: int, rng: np.random.Generator,
                 noise: str = "gaussian", sigma: float = 1.0):
        if noise not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {noise!r}; expected one of {NOISE_KINDS}")
        means = np.asarray(means, dtype=float)
        if noise == "gaussian":
            matrix = means + sigma * rng.standard_normal((horizon, len(means)))
        else:
            matrix = (rng.random((horizon, len(means))) < means).astype(float)
        self._matrix = matrix
        self.means = means
        self.noise = noise

    @property
    def num_arms(self) -> int:
        return self._matrix.shape[1]

    @property
    def horizon(self) -> int:
        return self._matrix.shape[0]

    @property
    def reward_matrix(self) -> np.ndarray:
        return self._matrix

    def reward(self, t: int, arm: int) -> float:
        return float(self._matrix[t - 1, arm])


def sample_stochastic(env: StochasticEnv, t: int, arm: int) -> float:
    """Reward of ``arm`` at round t (functional alias)."""
    return env.reward(t, arm)


class AdversarialEnv:
    """Arbitrary [0, 1] rewards for the alternatives; the default arm pays mu0 exactly.

    ``table`` has shape (horizon, K) covering arms 1..K.  Out-of-range
    entries indicate a malformed table: they are clamped into [0, 1] and
    reported once through the module logger.
    """

    def __init__(self, mu0: float, table: np.ndarray):
        if not 0.0 <= mu0 <= 1.0:
            raise MalformedEnvironmentError(f"default reward must lie in [0, 1], got {mu0}")
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[1] < 1:
            raise MalformedEnvironmentError(f"reward table must be 2-D (horizon, K), got shape {table.shape}")
        bad = int(np.count_nonzero((table < 0.0) | (table > 1.0)))
        if bad:
            logger.warning("adversarial table has %d entries outside [0, 1]; clamping", bad)
            table = np.clip(table, 0.0, 1.0)
        self.mu0 = mu0
        self._matrix = np.column_stack([np.full(table.shape[0], mu0), table])

    @property
    def num_arms(self) -> int:
        return self._matrix.shape[1]

    @property
    def horizon(self) -> int:
        return self._matrix.shape[0]

    @property
    def reward_matrix(self) -> np.ndarray:
        return self._matrix

    def reward(self, t: int, arm: int) -> float:
        if arm == 0:
            return self.mu0
        if t > self._matrix.shape[0]:
            raise MalformedEnvironmentError(f"round {t} beyond table horizon {self._matrix.shape[0]}")
        return float(self._matrix[t - 1, arm])


def adversarial_reward(env: AdversarialEnv, t: int, arm: int) -> float:
    """Reward of ``arm`` at round t (functional alias)."""
    return env.reward(t, arm)


def load_reward_table(path, horizon: int, num_alternatives: int) -> np.ndarray:
    """Read a (horizon, K) adversarial table from CSV.

    Format: header ``t,arm,reward``; rounds are 1-based, arms range over
    1..K (the default arm is implicit).  Every (round, arm) pair must be
    present exactly once.
    """
    table = np.full((horizon, num_alternatives), np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "arm", "reward"]:
            raise MalformedEnvironmentError(f"expected header 't,arm,reward' in {path}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, arm, reward = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise MalformedEnvironmentError(f"{path}:{lineno}: bad row {row}") from exc
            if not 1 <= t <= horizon:
                raise MalformedEnvironmentError(f"{path}:{lineno}: round {t} outside 1..{horizon}")
            if not 1 <= arm <= num_alternatives:
                raise MalformedEnvironmentError(f"{path}:{lineno}: arm {arm} outside 1..{num_alternatives}")
            table[t - 1, arm - 1] = reward
    missing = np.argwhere(np.isnan(table))
    if len(missing):
        t, a = missing[0]
        raise MalformedEnvironmentError(
            f"{path}: missing reward for round {int(t) + 1}, arm {int(a) + 1} "
            f"({len(missing)} entries absent)")
    return table


def make_adversary(name: str, horizon: int, num_alternatives: int,
                   seed: int | None = None, **params) -> np.ndarray:
    """Build one of the builtin adversarial reward tables.

    "constant": fixed per-arm rewards (param ``values``, default best arm
    0.6 and the rest 0.4).  "drift": the best arm switches halfway through
    the horizon.  "stochastic-disguise": i.i.d. Bernoulli rewards (param
    ``means``), indistinguishable from a stochastic instance; used to audit
    the safe-play wrapper on friendly input.
    """
    k = num_alternatives
    if k < 1:
        raise MalformedEnvironmentError("need at least one alternative arm")
    if name == "constant":
        values = params.pop("values", None)
        if values is None:
            values = [0.6] + [0.4] * (k - 1)
        if len(values) != k or any(not 0.0 <= v <= 1.0 for v in values):
            raise MalformedEnvironmentError(f"'constant' needs {k} values in [0, 1], got {values}")
        table = np.tile(np.asarray(values, dtype=float), (horizon, 1))
    elif name == "drift":
        high, low = params.pop("high", 0.9), params.pop("low", 0.1)
        table = np.full((horizon, k), params.pop("rest", 0.3))
        switch = horizon // 2
        table[:switch, 0] = high
        table[switch:, 0] = low
        if k >= 2:
            table[:switch, 1] = low
            table[switch:, 1] = high
    elif name == "stochastic-disguise":
        means = params.pop("means", None)
        if means is None:
            means = [0.6] + [0.4] * (k - 1)
        if len(means) != k or any(not 0.0 <= m <= 1.0 for m in means):
            raise MalformedEnvironmentError(f"'stochastic-disguise' needs {k} means in [0, 1], got {means}")
        rng = np.random.default_rng(seed)
        table = (rng.random((horizon, k)) < np.asarray(means)).astype(float)
    else:
        raise MalformedEnvironmentError(
            f"unknown adversary {name!r}; expected one of {BUILTIN_ADVERSARIES}")
    if params:
        raise MalformedEnvironmentError(f"unused adversary parameters: {sorted(params)}")
    return table
