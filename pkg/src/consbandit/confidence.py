"""Confidence-interval machinery for 1-subgaussian rewards.

Two interchangeable width functions are provided.  Both are anytime: with
probability at least 1 - delta, every arm's empirical mean stays within
``sqrt(psi(s) / s)`` of its true mean simultaneously for every sample count
s >= 1.  The "simple" variant follows from Hoeffding plus union bounds; the
"refined" variant has an iterated-logarithm shape and is much tighter for
large sample counts, so it is the default in practice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ArmStats

PSI_VARIANTS = ("simple", "refined")


def psi_simple(s, num_arms: int, delta: float):
    """2 * log(K * s^3 / delta); accepts a scalar or an array of counts s >= 1."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 1):
        raise ValueError("psi is defined for sample counts s >= 1")
    out = 2.0 * (np.log(num_arms / delta) + 3.0 * np.log(s))
    return float(out) if out.ndim == 0 else out


def psi_refined(s, num_arms: int, delta: float):
    """Iterated-logarithm width with zeta = K / delta; scalar or array input.

    2 * [ log max{3, log zeta} + log(2 e^2 zeta)
          + zeta (1 + log zeta) / ((zeta - 1) log zeta) * log log(1 + s) ]

    The leading factor 2 is the usual subgaussian tail constant (compare the
    simple variant's 2 log(...)); without it the log log coefficient drops
    below the iterated-logarithm rate of 2 and the running mean escapes the
    band with probability approaching 1, which measurably breaks the
    1 - delta coverage this function must provide.
    """
    zeta = num_arms / delta
    if zeta <= 1.0:
        raise ValueError(f"requires K/delta > 1, got {zeta}")
    s = np.asarray(s, dtype=float)
    if np.any(s < 1):
        raise ValueError("psi is defined for sample counts s >= 1")
    log_zeta = math.log(zeta)
    c0 = 2.0 * (math.log(max(3.0, log_zeta)) + math.log(2.0 * math.e**2 * zeta))
    c1 = 2.0 * zeta * (1.0 + log_zeta) / ((zeta - 1.0) * log_zeta)
    out = c0 + c1 * np.log(np.log1p(s))
    return float(out) if out.ndim == 0 else out


@dataclass
class ConfidenceSchedule:
    """Width function plus its parameters, shared by all arms of one run.

    ``num_arms`` is the number of arms covered by the union bound (the
    default arm is excluded whenever its mean is known exactly).
    """

    variant: str = "refined"
    num_arms: int = 1
    delta: float = 0.1

    def __post_init__(self) -> None:
        if self.variant not in PSI_VARIANTS:
            raise ValueError(f"unknown psi variant {self.variant!r}; expected one of {PSI_VARIANTS}")
        if self.num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        self.zeta = self.num_arms / self.delta
        if self.variant == "refined":
            if self.zeta <= 1.0:
                raise ValueError(f"refined variant requires K/delta > 1, got {self.zeta}")
            log_zeta = math.log(self.zeta)
            self._c0 = 2.0 * (math.log(max(3.0, log_zeta)) + math.log(2.0 * math.e**2 * self.zeta))
            self._c1 = 2.0 * self.zeta * (1.0 + log_zeta) / ((self.zeta - 1.0) * log_zeta)
        else:
            self._c0 = 2.0 * math.log(self.num_arms / self.delta)

    def psi(self, s: int) -> float:
        """Width function at sample count s >= 1 (scalar fast path)."""
        if s < 1:
            raise ValueError("psi is defined for sample counts s >= 1")
        if self.variant == "simple":
            return self._c0 + 6.0 * math.log(s)
        return self._c0 + self._c1 * math.log(math.log(1.0 + s))

    def psi_values(self, counts: np.ndarray) -> np.ndarray:
        """Vectorized widths for an array of sample counts."""
        if self.variant == "simple":
            return psi_simple(counts, self.num_arms, self.delta)
        return psi_refined(counts, self.num_arms, self.delta)

    def radius(self, pulls: int) -> float:
        """Confidence radius sqrt(psi(pulls) / pulls); +inf for an unpulled arm.

        The infinite sentinel forces each arm's first pull (optimistic
        indices rank unexplored arms first, ties to the lowest index).
        """
        if pulls == 0:
            return math.inf
        return math.sqrt(self.psi(pulls) / pulls)

    def radius_values(self, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts, dtype=float)
        return np.sqrt(self.psi_values(counts) / counts)


def radius(stats: ArmStats, schedule: ConfidenceSchedule) -> float:
    """Confidence radius for one arm's running statistics."""
    return schedule.radius(stats.pulls)
