import math

import numpy as np
import pytest

from consbandit import (
    ArmStats,
    BudgetLedger,
    ConfigurationError,
    MalformedTraceError,
    ProblemInstance,
    constraint_floor,
    pseudo_regret,
    realized_regret,
    update_budgets,
    update_stats,
)
from consbandit.core import KahanSum, kahan_sum

from conftest import EXPERIMENT_MEANS, synthetic_trace


class TestArmStats:
    def test_single_observation(self):
        st = update_stats(ArmStats(), 0.7)
        assert (st.pulls, st.reward_sum, st.empirical_mean) == (1, 0.7, 0.7)

    def test_unpulled_mean_is_zero(self):
        assert ArmStats().empirical_mean == 0.0

    def test_negative_rewards_allowed(self):
        # Gaussian noise can push samples below zero.
        st = update_stats(ArmStats(pulls=3, reward_sum=1.2, empirical_mean=0.4), -0.4)
        assert st.pulls == 4
        assert st.reward_sum == pytest.approx(0.8)
        assert st.empirical_mean == pytest.approx(0.2)

    def test_pulls_never_decrease(self):
        st = ArmStats()
        prev = 0
        for r in np.random.default_rng(0).normal(size=50):
            update_stats(st, float(r))
            assert st.pulls == prev + 1
            prev = st.pulls
            assert st.empirical_mean == pytest.approx(st.reward_sum / st.pulls)


class TestProblemInstance:
    def test_gaps_nonnegative(self):
        inst = ProblemInstance(EXPERIMENT_MEANS, 0.1, 0.1, 100)
        assert inst.best_mean == 0.6
        assert all(g >= 0 for g in inst.gaps)
        assert inst.gaps[1] == 0.0
        assert inst.num_alternatives == 4

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(means=(0.5, 1.2), alpha=0.1, delta=0.1, horizon=10),
            dict(means=(0.5, 0.4), alpha=0.0, delta=0.1, horizon=10),
            dict(means=(0.5, 0.4), alpha=1.5, delta=0.1, horizon=10),
            dict(means=(0.5, 0.4), alpha=0.1, delta=1.0, horizon=10),
            dict(means=(0.5, 0.4), alpha=0.1, delta=0.1, horizon=0),
            dict(means=(0.5,), alpha=0.1, delta=0.1, horizon=10),
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ConfigurationError):
            ProblemInstance(**kwargs)


class TestPseudoRegret:
    def test_hand_example(self):
        # pulls (5, 3, 2) against means (0.5, 0.6, 0.4): 5*0.1 + 0 + 2*0.2
        inst = ProblemInstance((0.5, 0.6, 0.4), 0.1, 0.1, 10)
        trace = synthetic_trace([0] * 5 + [1] * 3 + [2] * 2)
        assert pseudo_regret(trace, inst) == pytest.approx(0.9, abs=1e-9)

    def test_optimal_play_has_zero_regret(self):
        inst = ProblemInstance((0.5, 0.6, 0.4), 0.1, 0.1, 10)
        assert pseudo_regret(synthetic_trace([1] * 10), inst) == 0.0

    def test_all_pulls_on_one_gap(self):
        inst = ProblemInstance((0.5, 0.6), 0.1, 0.1, 10)
        assert pseudo_regret(synthetic_trace([0] * 10), inst) == pytest.approx(1.0, abs=1e-9)

    def test_rejects_unknown_arm(self):
        inst = ProblemInstance((0.5, 0.6), 0.1, 0.1, 3)
        with pytest.raises(MalformedTraceError):
            pseudo_regret(synthetic_trace([0, 1, 2]), inst)

    def test_two_forms_agree(self):
        # Per-arm and per-round decompositions must match to 1e-9 at n = 1e5.
        rng = np.random.default_rng(42)
        inst = ProblemInstance(EXPERIMENT_MEANS, 0.1, 0.1, 10**5)
        arms = rng.integers(0, 5, size=10**5)
        trace = synthetic_trace(arms)
        by_arm = pseudo_regret(trace, inst)
        by_round = inst.horizon * inst.best_mean - kahan_sum(inst.means[a] for a in arms)
        assert by_arm == pytest.approx(by_round, abs=1e-9)
        assert by_arm >= 0.0


class TestRealizedRegret:
    def test_plays_best_fixed_arm(self):
        matrix = np.array([[0.2, 0.9], [0.3, 0.8]])
        trace = synthetic_trace([1, 1], rewards=[0.9, 0.8])
        assert realized_regret(trace, matrix) == pytest.approx(0.0)

    def test_max_over_both_comparators(self):
        matrix = np.array([[0.5, 1.0], [0.5, 0.0]])
        trace = synthetic_trace([1, 1], rewards=[1.0, 0.0])
        assert realized_regret(trace, matrix) == pytest.approx(0.0)
        trace0 = synthetic_trace([0, 0], rewards=[0.5, 0.5])
        assert realized_regret(trace0, matrix) == pytest.approx(0.0)

    def test_dimension_mismatch(self):
        trace = synthetic_trace([0, 1])
        with pytest.raises(ValueError):
            realized_regret(trace, np.zeros((3, 2)))


class TestBudgetLedger:
    def test_default_arm_adds_alpha_mu0(self):
        inst = ProblemInstance((0.5, 0.6), alpha=0.1, delta=0.1, horizon=10)
        ledger = BudgetLedger(inst)
        ledger.update(1, 0, 0.5)
        assert ledger.pseudo_budget == pytest.approx(0.1 * 0.5, abs=1e-15)

    def test_boundary_arm_leaves_budget_flat(self):
        # An arm whose mean equals (1 - alpha) * mu0 neither builds nor drains.
        inst = ProblemInstance((0.5, 0.4), alpha=0.2, delta=0.1, horizon=10)
        ledger = BudgetLedger(inst)
        ledger.update(1, 1, 0.4)
        assert abs(ledger.pseudo_budget) < 1e-15

    def test_first_round_example(self):
        inst = ProblemInstance((0.5, 0.6), alpha=0.1, delta=0.1, horizon=10)
        ledger = BudgetLedger(inst)
        update_budgets(ledger, 1, 1, 0.6)
        assert ledger.pseudo_budget == pytest.approx(0.15, abs=1e-12)

    def test_out_of_order_round_rejected(self):
        inst = ProblemInstance((0.5, 0.6), alpha=0.1, delta=0.1, horizon=10)
        ledger = BudgetLedger(inst)
        ledger.update(1, 0, 0.5)
        with pytest.raises(ValueError):
            ledger.update(3, 0, 0.5)

    def test_recurrence_every_round(self):
        # One-step budget change is exactly mean[arm] - (1 - alpha) * mu0.
        rng = np.random.default_rng(3)
        inst = ProblemInstance(EXPERIMENT_MEANS, alpha=0.3, delta=0.1, horizon=500)
        ledger = BudgetLedger(inst)
        prev = 0.0
        for t in range(1, 501):
            arm = int(rng.integers(0, 5))
            ledger.update(t, arm, float(rng.normal(inst.means[arm])))
            step = inst.means[arm] - (1.0 - inst.alpha) * inst.mu0
            assert ledger.pseudo_budget - prev == pytest.approx(step, abs=1e-12)
            prev = ledger.pseudo_budget

    def test_true_budget_matches_realized_sum(self):
        inst = ProblemInstance((0.5, 0.6), alpha=0.25, delta=0.1, horizon=50)
        rng = np.random.default_rng(8)
        ledger = BudgetLedger(inst)
        rewards = []
        for t in range(1, 51):
            r = float(rng.random())
            rewards.append(r)
            ledger.update(t, 1, r)
        expected = sum(rewards) - constraint_floor(0.25, 0.5, 50)
        assert ledger.true_budget == pytest.approx(expected, abs=1e-12)

    def test_min_and_first_violation(self):
        # Playing an arm below the floor from round 1 violates immediately.
        inst = ProblemInstance((0.8, 0.1), alpha=0.1, delta=0.1, horizon=10)
        ledger = BudgetLedger(inst)
        for t in range(1, 4):
            ledger.update(t, 1, 0.1)
        assert ledger.first_violation_round == 1
        assert ledger.min_pseudo_budget == pytest.approx(ledger.pseudo_budget)

    def test_constraint_equivalence(self):
        # Budget nonnegativity at every prefix is the same statement as the
        # floor inequality at every prefix.
        rng = np.random.default_rng(11)
        inst = ProblemInstance((0.5, 0.62, 0.37), alpha=0.13, delta=0.1, horizon=300)
        for _ in range(5):
            arms = rng.integers(0, 3, size=300)
            ledger = BudgetLedger(inst)
            budget_ok, floor_ok = True, True
            mean_sum = 0.0
            for t, arm in enumerate(arms, start=1):
                ledger.update(t, int(arm), 0.0)
                budget_ok &= ledger.pseudo_budget >= 0.0
                mean_sum += inst.means[arm]
                floor_ok &= mean_sum >= constraint_floor(inst.alpha, inst.mu0, t)
            assert budget_ok == floor_ok


class TestKahan:
    def test_order_insensitive_to_1e12(self):
        rng = np.random.default_rng(5)
        values = list(rng.normal(size=2000) * rng.choice([1e-8, 1.0, 1e6], size=2000))
        forward = kahan_sum(values)
        backward = kahan_sum(reversed(values))
        assert forward == pytest.approx(backward, abs=1e-12)

    def test_accumulator_matches_fsum(self):
        values = [0.1] * 10**4
        acc = KahanSum()
        for v in values:
            acc.add(v)
        assert acc.total == pytest.approx(math.fsum(values), abs=1e-12)


class TestEpisodeTrace:
    def test_row_count_enforced(self):
        from consbandit import EpisodeTrace

        with pytest.raises(MalformedTraceError):
            EpisodeTrace(
                arms=np.array([0, 1]),
                proposed=np.array([-1]),
                rewards=np.zeros(2),
                pseudo_budget=np.zeros(2),
                true_budget=np.zeros(2),
                safe_mode=np.zeros(2, dtype=bool),
                budget_lcb=np.zeros(2),
            )

    def test_pulls_sum_to_horizon(self):
        trace = synthetic_trace([0, 1, 1, 2, 0])
        assert trace.pulls.sum() == trace.horizon == 5
