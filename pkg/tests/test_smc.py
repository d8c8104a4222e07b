"""Statistical checking layer: estimators, verdicts, evidence, parallelism."""

import math
from dataclasses import replace

import numpy as np
import pytest

from robosmc.automata import (
    Edge,
    HybridAutomaton,
    Location,
    Network,
    Variable,
    validate_network,
)
from robosmc.casestudy import build_comparison
from robosmc.engine import SimConfig, simulate_run
from robosmc.smc import (
    CENSOR,
    VIOLATE,
    SmcResult,
    chernoff_runs,
    check_monitored,
    clopper_pearson,
    estimate_expectation,
    estimate_probability,
    evaluate_queries,
    student_t_ci,
)


class TestChernoffRuns:
    def test_reference_budget(self):
        assert chernoff_runs(0.05, 0.05) == 738

    def test_tighter_epsilon_needs_more_runs(self):
        assert chernoff_runs(0.01, 0.05) > chernoff_runs(0.05, 0.05)

    def test_formula(self):
        eps, alpha = 0.03, 0.1
        assert chernoff_runs(eps, alpha) == \
               math.ceil(math.log(2 / alpha) / (2 * eps * eps))


class TestClopperPearson:
    def test_zero_successes_pins_lower_end(self):
        lo, hi = clopper_pearson(0, 100)
        assert lo == 0.0 and 0.0 < hi < 0.1

    def test_all_successes_pins_upper_end(self):
        lo, hi = clopper_pearson(100, 100)
        assert hi == 1.0 and 0.9 < lo < 1.0

    def test_contains_point_estimate(self):
        lo, hi = clopper_pearson(30, 100)
        assert lo < 0.3 < hi

    def test_narrows_with_more_trials(self):
        lo1, hi1 = clopper_pearson(30, 100)
        lo2, hi2 = clopper_pearson(300, 1000)
        assert hi2 - lo2 < hi1 - lo1

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.75])
    def test_coverage_at_least_nominal(self, p):
        # exact interval: coverage of the true p must reach 95% (93% here
        # leaves slack for the finite 500-replicate estimate)
        rng = np.random.default_rng(20260823)
        n, reps = 200, 500
        covered = 0
        for k in rng.binomial(n, p, size=reps):
            lo, hi = clopper_pearson(int(k), n)
            covered += lo <= p <= hi
        assert covered / reps >= 0.93


class TestStudentT:
    def test_degenerate_sample(self):
        mean, std, lo, hi = student_t_ci([7.0], 0.95)
        assert (mean, std, lo, hi) == (7.0, 0.0, 7.0, 7.0)

    def test_constant_sample_has_zero_width(self):
        mean, std, lo, hi = student_t_ci([3.0] * 50, 0.95)
        assert mean == 3.0 and std == 0.0 and lo == hi == 3.0

    def test_matches_hand_computation(self):
        values = [1.0, 2.0, 3.0, 4.0]
        mean, std, lo, hi = student_t_ci(values, 0.95)
        assert mean == pytest.approx(2.5)
        assert std == pytest.approx(np.std(values, ddof=1))
        # t(0.975, df=3) = 3.18244...
        half = 3.182446305 * std / 2.0
        assert lo == pytest.approx(2.5 - half) and hi == pytest.approx(2.5 + half)

    def test_interval_covers_true_mean_usually(self):
        rng = np.random.default_rng(7)
        hits = 0
        for _ in range(400):
            sample = rng.normal(10.0, 2.0, size=30)
            _, _, lo, hi = student_t_ci(sample.tolist(), 0.95)
            hits += lo <= 10.0 <= hi
        assert hits / 400 >= 0.92


def ramp_net(rate=1.0):
    """One location accruing v at a constant rate, never jumping."""
    auto = HybridAutomaton("A", "L", (Location("L", rates={"v": rate}),), ())
    return validate_network(Network((auto,), variables=(Variable("v", "real"),)))


def coin_net(w_hit=1, w_miss=3):
    """Eager one-shot choice at t=1 between Hit and Miss."""
    auto = HybridAutomaton(
        "A", "S", (Location("S"), Location("Hit"), Location("Miss")),
        (Edge("S", "Hit", guard="t >= 1", eager=True, weight=w_hit,
              updates=("hit = 1",)),
         Edge("S", "Miss", guard="t >= 1", eager=True, weight=w_miss)),
        (Variable("t", "clock"),))
    return validate_network(Network(
        (auto,), variables=(Variable("hit", "int"),)))


class TestExpectation:
    def test_deterministic_closed_form(self):
        res = estimate_expectation(
            ramp_net(rate=2.0), SimConfig(horizon=100.0, seed=1),
            "E[<=50; 10] (max: v)")
        assert res.kind == "expectation"
        assert res.estimate == pytest.approx(100.0)  # 2 J/s * 50 s
        assert res.std == 0.0
        assert res.ci == (res.estimate, res.estimate)
        assert res.runs_used == 10

    def test_run_budget_comes_from_the_query(self):
        res = estimate_expectation(
            ramp_net(), SimConfig(horizon=100.0, seed=1),
            "E[<=10; 37] (max: v)")
        assert res.runs_used == 37

    def test_bernoulli_mean(self):
        res = estimate_expectation(
            coin_net(1, 3), SimConfig(horizon=5.0, seed=3),
            "E[<=5; 600] (max: hit)")
        assert res.estimate == pytest.approx(0.25, abs=0.06)
        assert res.ci[0] < 0.25 < res.ci[1]


class TestProbability:
    def test_default_budget_is_chernoff(self):
        res = estimate_probability(
            coin_net(), SimConfig(horizon=5.0, seed=5),
            "Pr[t<=5](<> hit == 1)")
        assert res.runs_used == chernoff_runs(0.05, 0.05)
        assert res.estimate == pytest.approx(0.25, abs=0.05)
        lo, hi = res.ci
        assert lo <= res.estimate <= hi

    def test_runs_override(self):
        res = estimate_probability(
            coin_net(), SimConfig(horizon=5.0, seed=5),
            "Pr[t<=5](<> hit == 1)", runs=100)
        assert res.runs_used == 100

    def test_sure_event(self):
        res = estimate_probability(
            ramp_net(), SimConfig(horizon=20.0, seed=5),
            "Pr[t<=10](<> v >= 5)", runs=50)
        assert res.estimate == 1.0
        assert res.ci[1] == 1.0 and res.ci[0] > 0.9


class TestVerdictsAndDuality:
    def test_always_falsified_iff_exists_witnesses_negation(self):
        net = coin_net()
        cfg = SimConfig(horizon=5.0, seed=11)
        results = evaluate_queries(
            net, cfg, ["A[] not A.Miss", "E<> A.Miss"], monitored_runs=64)
        always, exists = results
        assert always.verdict == "falsified"
        assert exists.verdict == "witness"
        # shared trials: the first offending run is the same for both
        assert always.evidence_trial == exists.evidence_trial

    def test_always_passes_on_impossible_negation(self):
        res = check_monitored(
            ramp_net(), SimConfig(horizon=10.0, seed=2), "A[] v >= 0",
            runs=40)
        assert res.verdict == "passed" and res.passed()

    def test_exists_no_witness(self):
        res = check_monitored(
            ramp_net(), SimConfig(horizon=10.0, seed=2), "E<> v < 0",
            runs=40)
        assert res.verdict == "no-witness"

    def test_no_deadlock_flags_stuck_runs(self):
        auto = HybridAutomaton(
            "A", "L", (Location("L", invariant="t <= 3"),), (),
            (Variable("t", "clock"),))
        net = validate_network(Network((auto,)))
        res = check_monitored(
            net, SimConfig(horizon=10.0, seed=2), "A[] not deadlock", runs=20)
        assert res.verdict == "falsified"
        assert res.details["deadlocks"] == 20

    def test_no_deadlock_passes_on_coasting_model(self):
        res = check_monitored(
            ramp_net(), SimConfig(horizon=10.0, seed=2), "A[] not deadlock",
            runs=20)
        assert res.verdict == "passed"


def leadsto_net(*, set_flag: bool, die_after: float | None = None):
    """Enter Goal at t=1; optionally set the flag there; optionally
    deadlock ``die_after`` seconds later."""
    updates = ("flag = 1",) if set_flag else ()
    inv = None if die_after is None else f"u <= {die_after}"
    auto = HybridAutomaton(
        "A", "S",
        (Location("S"), Location("Goal", invariant=inv)),
        (Edge("S", "Goal", guard="t >= 1", eager=True, updates=updates + ("u = 0",)),),
        (Variable("t", "clock"), Variable("u", "clock")))
    return validate_network(Network((auto,), variables=(Variable("flag", "int"),)))


class TestLeadsTo:
    QUERY = "A.Goal --> flag == 1"

    def test_discharged_in_same_snapshot(self):
        # the flag is written by the very jump that raises the antecedent
        res = check_monitored(
            leadsto_net(set_flag=True), SimConfig(horizon=10.0, seed=1),
            self.QUERY, runs=10, leadsto_pending=VIOLATE)
        assert res.verdict == "passed"

    def test_pending_at_horizon_censored_by_default(self):
        res = check_monitored(
            leadsto_net(set_flag=False), SimConfig(horizon=10.0, seed=1),
            self.QUERY, runs=10)
        assert res.verdict == "passed"
        assert res.details["censored"] == 10

    def test_pending_at_horizon_strict_mode(self):
        res = check_monitored(
            leadsto_net(set_flag=False), SimConfig(horizon=10.0, seed=1),
            self.QUERY, runs=10, leadsto_pending=VIOLATE)
        assert res.verdict == "falsified"
        assert res.evidence_trial == 0

    def test_pending_at_deadlock_always_violates(self):
        net = leadsto_net(set_flag=False, die_after=2.0)
        for mode in (CENSOR, VIOLATE):
            res = check_monitored(
                net, SimConfig(horizon=10.0, seed=1), self.QUERY,
                runs=10, leadsto_pending=mode)
            assert res.verdict == "falsified", mode

    def test_antecedent_never_raised(self):
        res = check_monitored(
            ramp_net(), SimConfig(horizon=10.0, seed=1),
            "v >= 1000 --> v < 0", runs=10, leadsto_pending=VIOLATE)
        assert res.verdict == "passed"


class TestEvidence:
    def test_evidence_trace_reproduces_the_violation(self):
        net = coin_net()
        cfg = SimConfig(horizon=5.0, seed=11)
        res = check_monitored(net, cfg, "A[] not A.Miss", runs=64)
        assert res.verdict == "falsified"
        assert res.evidence is not None
        assert res.evidence.trial == res.evidence_trial
        assert res.evidence.final_state.locations["A"] == "Miss"
        # trial index is the lowest violating one: every earlier trial is clean
        for t in range(res.evidence_trial):
            trace = simulate_run(net, cfg, trial=t)
            assert trace.final_state.locations["A"] != "Miss"

    def test_evidence_can_be_disabled(self):
        res = check_monitored(
            coin_net(), SimConfig(horizon=5.0, seed=11), "A[] not A.Miss",
            runs=64, with_evidence=False)
        assert res.verdict == "falsified"
        assert res.evidence_trial is not None and res.evidence is None


class TestSharedTrials:
    def test_results_independent_of_batching(self):
        net = build_comparison()
        cfg = SimConfig(horizon=600.0, seed=13)
        queries = ["E[<=600; 12] (max: energy)", "A[] energy >= 0",
                   "E<> Behavior.Grab"]
        alone = [evaluate_queries(net, cfg, [q], monitored_runs=30)[0]
                 for q in queries]
        together = evaluate_queries(net, cfg, queries, monitored_runs=30)
        for a, b in zip(alone, together):
            assert a.to_dict() == b.to_dict()

    def test_parallel_equals_sequential(self):
        net = build_comparison()
        cfg = SimConfig(horizon=600.0, seed=13)
        queries = ["E[<=600; 12] (max: energy)", "A[] energy >= 0"]
        seq = evaluate_queries(net, cfg, queries, monitored_runs=30, workers=1)
        par = evaluate_queries(net, cfg, queries, monitored_runs=30, workers=3)
        for a, b in zip(seq, par):
            assert a.to_dict() == b.to_dict()


class TestResultSurface:
    def test_labels(self):
        net = coin_net()
        cfg = SimConfig(horizon=5.0, seed=11)
        res = check_monitored(net, cfg, "A[] not A.Miss", runs=16)
        assert "falsified" in res.label()
        ok = check_monitored(net, cfg, "A[] hit <= 1", runs=16)
        assert "passed" in ok.label()

    def test_to_dict_shape(self):
        res = estimate_expectation(
            ramp_net(), SimConfig(horizon=10.0, seed=1), "E[<=10; 5] (max: v)")
        doc = res.to_dict()
        assert doc["query"] == "E[<=10; 5] (max: v)"
        assert doc["kind"] == "expectation"
        assert doc["runs_used"] == 5
        assert doc["estimate"] == pytest.approx(10.0)

    def test_step_cap_runs_excluded_from_expectation(self):
        net = build_comparison()
        cfg = SimConfig(horizon=600.0, seed=1, max_steps=40)
        res = estimate_expectation(net, cfg, "E[<=600; 10] (max: energy)")
        assert res.details.get("excluded_step_cap") == 10
        assert res.runs_used == 0
        assert math.isnan(res.estimate)
