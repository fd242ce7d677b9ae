import math

import numpy as np
import pytest

from consbandit import (
    AdversarialEnv,
    ConfidenceSchedule,
    ConfigurationError,
    ExperimentConfig,
    ProblemInstance,
    admissible_regret_bound,
    audit_adversarial_regret,
    audit_constraint,
    audit_pull_bound,
    lower_bound_B,
    lower_bound_reference,
    make_adversary,
    make_policy,
    monte_carlo,
    pseudo_budget_curves,
    pseudo_regret,
    resolve_workers,
    run_episode,
    simulate_run,
    theorem_default_rounds,
)
from consbandit.environments import StochasticEnv, episode_streams
from consbandit.harness import (
    RunPoint,
    build_run_points,
    format_float,
    runs_csv_lines,
    summary_csv_lines,
)

from conftest import EXPERIMENT_MEANS, synthetic_trace


def _config(**overrides):
    base = dict(
        means=EXPERIMENT_MEANS,
        alpha=0.1,
        horizon=300,
        delta="1/n",
        policies=("cucb",),
        replications=8,
        seed_base=5,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunEpisode:
    def test_budgetfirst_cap_plays_default_forever(self):
        inst = ProblemInstance(EXPERIMENT_MEANS, 0.1, 0.1, 120)
        sched = ConfidenceSchedule("refined", 4, 0.1)
        pol = make_policy("budgetfirst", inst, sched)
        assert pol.t0 == 120
        env_rng, _, _ = episode_streams(0, 0)
        env = StochasticEnv(inst.means, 120, env_rng)
        trace = run_episode(pol, env, inst)
        assert np.all(trace.arms == 0)
        assert pseudo_regret(trace, inst) == pytest.approx(120 * 0.1, abs=1e-9)

    def test_arm_count_mismatch(self):
        inst = ProblemInstance(EXPERIMENT_MEANS, 0.1, 0.1, 10)
        sched = ConfidenceSchedule("refined", 4, 0.1)
        pol = make_policy("cucb", inst, sched)
        env_rng, _, _ = episode_streams(0, 0)
        env = StochasticEnv((0.5, 0.6), 10, env_rng)
        with pytest.raises(ConfigurationError):
            run_episode(pol, env, inst)

    def test_trace_shape(self):
        inst = ProblemInstance(EXPERIMENT_MEANS, 0.1, 0.1, 64)
        sched = ConfidenceSchedule("refined", 4, 0.1)
        env_rng, _, _ = episode_streams(1, 1)
        env = StochasticEnv(inst.means, 64, env_rng)
        trace = run_episode(make_policy("ucb", inst, sched), env, inst)
        assert trace.horizon == 64
        assert trace.pulls.sum() == 64


class TestMonteCarlo:
    def test_single_replication_matches_trace(self):
        cfg = _config(replications=1)
        summaries, rows = monte_carlo(cfg, workers=1)
        point = build_run_points(cfg)[0]
        row, trace = simulate_run(point, 0, want_trace=True)
        assert rows[0] == row
        assert summaries[0].mean_pseudo_regret == row["pseudo_regret"]
        assert summaries[0].stderr == 0.0
        assert summaries[0].violation_rate == float(row["violated"])

    def test_deterministic_across_workers(self):
        cfg = _config(replications=10, policies=("cucb", "unbalanced-moss"))
        _, rows1 = monte_carlo(cfg, workers=1)
        _, rows2 = monte_carlo(cfg, workers=3)
        assert rows1 == rows2

    def test_stderr_shrinks_with_replications(self):
        cfg_small = _config(policies=("ucb",), horizon=400, replications=150, seed_base=2)
        cfg_large = _config(policies=("ucb",), horizon=400, replications=300, seed_base=2)
        s_small, _ = monte_carlo(cfg_small, workers=2)
        s_large, _ = monte_carlo(cfg_large, workers=2)
        ratio = s_small[0].stderr / s_large[0].stderr
        assert ratio == pytest.approx(math.sqrt(2), rel=0.2)

    def test_expectation_mode_runs_transformed_policy(self):
        cfg = _config(expectation_mode=True, replications=2)
        points = build_run_points(cfg)
        assert points[0].policy_alpha == pytest.approx((0.1 - 1 / 300) / (1 - 1 / 300))
        assert points[0].instance.delta == pytest.approx(1 / 300)
        assert points[0].instance.alpha == 0.1  # budgets stay against the configured alpha
        monte_carlo(cfg, workers=1)

    def test_expectation_mode_rejects_tiny_alpha(self):
        with pytest.raises(ConfigurationError):
            _config(alpha=0.001, horizon=300, expectation_mode=True)

    def test_sweep_points_expand_in_order(self):
        cfg = _config(alpha=[0.1, 0.5], policies=("ucb", "cucb"))
        points = build_run_points(cfg)
        assert [(p.sweep_value, p.policy) for p in points] == [
            (0.1, "ucb"), (0.1, "cucb"), (0.5, "ucb"), (0.5, "cucb")]
        assert all(p.sweep_var == "alpha" for p in points)

    def test_rejects_double_sweep(self):
        with pytest.raises(ConfigurationError):
            _config(alpha=[0.1, 0.2], horizon=[100, 200])


class TestAuditConstraint:
    def test_all_default_never_violates(self):
        inst = ProblemInstance((0.5, 0.6), 0.1, 0.1, 50)
        sched = ConfidenceSchedule("refined", 1, 0.1)
        env_rng, _, _ = episode_streams(0, 0)
        env = StochasticEnv(inst.means, 50, env_rng, sigma=0.0)
        pol = make_policy("budgetfirst", inst, sched)
        trace = run_episode(pol, env, inst)
        violated, first, min_budget = audit_constraint(trace, inst, mode="pseudo")
        assert not violated and first is None
        assert min_budget == 0.0  # the pre-play baseline
        # Budget climbs by alpha * mu0 every default round.
        steps = np.diff(np.concatenate([[0.0], trace.pseudo_budget]))
        assert np.allclose(steps, 0.1 * 0.5, atol=1e-12)

    def test_draining_arm_violates_immediately(self):
        inst = ProblemInstance((0.8, 0.1), 0.1, 0.1, 5)
        trace = synthetic_trace([1] * 5, pseudo=np.cumsum([0.1 - 0.9 * 0.8] * 5))
        violated, first, min_budget = audit_constraint(trace, inst, mode="pseudo")
        assert violated and first == 1
        assert min_budget < 0

    def test_realized_mode_uses_fixed_default(self):
        inst = ProblemInstance((0.5, 0.6), 0.5, 0.1, 4)
        trace = synthetic_trace([1, 1, 1, 1], rewards=[0.3, 0.2, 0.3, 0.3])
        violated, first, _ = audit_constraint(trace, inst, mode="realized")
        assert violated == (min(
            sum([0.3, 0.2, 0.3, 0.3][:t]) - (1 - 0.5) * (t * 0.5) for t in range(1, 5)
        ) < 0)

    def test_unknown_mode(self):
        inst = ProblemInstance((0.5, 0.6), 0.1, 0.1, 2)
        with pytest.raises(ValueError):
            audit_constraint(synthetic_trace([0, 0]), inst, mode="anytime")


class TestAuditPullBound:
    def test_bound_arithmetic(self):
        # gap 0.2 with width 10 at the horizon: 4 * 10 / 0.04 + 1 = 1001.
        inst = ProblemInstance((0.5, 0.6, 0.4), 0.1, 0.1, 100)
        sched = ConfidenceSchedule("simple", 2, 0.1)
        trace = synthetic_trace([2] * 100)
        checks = audit_pull_bound(trace, inst, sched)
        level = sched.psi(100)
        by_arm = {c.arm: c for c in checks}
        assert by_arm[2].bound == pytest.approx(4 * level / 0.2**2 + 1, rel=1e-9)
        assert by_arm[2].pulls == 100

    def test_zero_gap_arms_excluded(self):
        inst = ProblemInstance((0.5, 0.6, 0.4), 0.1, 0.1, 10)
        sched = ConfidenceSchedule("simple", 2, 0.1)
        checks = audit_pull_bound(synthetic_trace([1] * 10), inst, sched)
        assert [c.arm for c in checks] == [2]

    def test_typical_run_passes(self):
        inst = ProblemInstance(EXPERIMENT_MEANS, 1.0, 0.1, 2000)
        sched = ConfidenceSchedule("refined", 4, 0.1)
        env_rng, _, _ = episode_streams(31, 0)
        env = StochasticEnv(inst.means, 2000, env_rng)
        trace = run_episode(make_policy("ucb", inst, sched), env, inst)
        assert all(c.ok for c in audit_pull_bound(trace, inst, sched))


class TestLowerBoundReference:
    def test_benchmark_values(self):
        bound, valid = lower_bound_B(4, 10**4, 0.1, 0.5)
        c = 16 * math.e + 8
        assert bound == pytest.approx(max(4 / (c * 0.05), math.sqrt(4 * 10**4 / c)), abs=1e-12)
        assert bound == pytest.approx(27.871, abs=1e-3)
        assert 4 / (c * 0.05) == pytest.approx(1.5536, abs=1e-3)
        assert valid  # 0.5 >= sqrt(e + 1/2) * 0.02

    def test_diverges_as_alpha_shrinks(self):
        bounds = [lower_bound_reference(4, 10**4, a, 0.5)[0] for a in (1e-2, 1e-4, 1e-6)]
        assert bounds[0] < bounds[1] < bounds[2]

    def test_validity_flag_near_boundary(self):
        _, valid = lower_bound_reference(4, 100, 0.5, 0.999)
        assert not valid  # 1 - mu0 = 0.001 < sqrt(e + 1/2) * 0.2

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigurationError):
            lower_bound_reference(4, 100, 0.0, 0.5)


class TestTheoremDefaultRounds:
    def test_matches_linear_scan(self):
        k, alpha, mu0, delta = 2, 1.0, 1.0, 0.5

        def holds(t):
            return alpha * mu0 * t <= admissible_regret_bound(t, k, delta) + mu0

        t = 1
        last_true = 1
        while t < 10**6:
            if holds(t):
                last_true = t
            elif t > last_true + 1000:
                break
            t += 1
        got = theorem_default_rounds(k, alpha, mu0, delta)
        assert got == last_true

    def test_cap_overflow_raises(self):
        with pytest.raises(RuntimeError):
            theorem_default_rounds(4, 1e-6, 0.5, 0.1, cap=10**5)


class TestAuditAdversarialRegret:
    def test_alpha_one_bound_is_finite(self):
        table = make_adversary("constant", 100, 4)
        env = AdversarialEnv(0.5, table)
        inst = ProblemInstance((0.5, 0.6, 0.4, 0.4, 0.4), 1.0, 0.1, 100)
        _, rng, _ = episode_streams(0, 0)
        pol = make_policy("safe-exp3ix", inst, ConfidenceSchedule("refined", 4, 0.1), rng=rng)
        trace = run_episode(pol, env, inst)
        regret, bound, ok = audit_adversarial_regret(
            trace, env.reward_matrix, 4, 1.0, 0.5, 0.1)
        assert math.isfinite(bound) and bound > 0
        assert ok == (regret <= bound)

    def test_disguised_stochastic_audit(self):
        inst = ProblemInstance(EXPERIMENT_MEANS, 0.2, 0.1, 500)
        oks = []
        for rep in range(5):
            table = make_adversary("stochastic-disguise", 500, 4, seed=rep)
            env = AdversarialEnv(0.5, table)
            _, rng, _ = episode_streams(3, rep)
            pol = make_policy("safe-exp3ix", inst, ConfidenceSchedule("refined", 4, 0.1), rng=rng)
            trace = run_episode(pol, env, inst)
            _, _, ok = audit_adversarial_regret(trace, env.reward_matrix, 4, 0.2, 0.5, 0.1)
            oks.append(ok)
        assert all(oks)


class TestBudgetCurves:
    def test_matches_direct_average(self):
        cfg = _config(replications=6, horizon=100)
        point = build_run_points(cfg)[0]
        mean, stderr = pseudo_budget_curves(point, 6, workers=1)
        stacked = []
        for rep in range(6):
            _, trace = simulate_run(point, rep, want_trace=True)
            stacked.append(trace.pseudo_budget)
        stacked = np.array(stacked)
        assert np.allclose(mean, stacked.mean(axis=0), atol=1e-12)
        expected_se = stacked.std(axis=0, ddof=1) / math.sqrt(6)
        # The streaming moment accumulation carries ~1e-9 cancellation noise.
        assert np.allclose(stderr, expected_se, rtol=1e-6, atol=1e-8)


class TestCsvEncoding:
    def test_floats_round_trip(self):
        rng = np.random.default_rng(0)
        for x in rng.normal(size=100) * 10.0 ** rng.integers(-9, 9, size=100):
            assert float(format_float(float(x))) == float(x)

    def test_runs_header_and_rows(self):
        cfg = _config(replications=2)
        _, rows = monte_carlo(cfg, workers=1)
        lines = runs_csv_lines(rows, 5)
        assert lines[0].startswith("policy,alpha,n,delta,replication,seed,pseudo_regret")
        assert lines[0].endswith("pulls_0,pulls_1,pulls_2,pulls_3,pulls_4")
        assert len(lines) == 3

    def test_summary_header(self):
        cfg = _config(replications=2)
        summaries, _ = monte_carlo(cfg, workers=1)
        lines = summary_csv_lines(summaries)
        assert lines[0] == "policy,sweep_var,sweep_value,mean_pseudo_regret,stderr,violation_rate,mean_min_budget"


def test_resolve_workers_env(monkeypatch):
    monkeypatch.setenv("CONSBANDIT_THREADS", "3")
    assert resolve_workers() == 3
    monkeypatch.setenv("CONSBANDIT_THREADS", "oops")
    with pytest.raises(ConfigurationError):
        resolve_workers()
    monkeypatch.delenv("CONSBANDIT_THREADS")
    assert resolve_workers(5) == 5
