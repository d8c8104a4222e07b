"""Trajectory sampler: delay race, move choice, termination, traces."""

import json

import numpy as np
import pytest
from scipy import stats

from robosmc.automata import (
    Edge,
    HybridAutomaton,
    Location,
    Network,
    Variable,
    ZeroTotalWeight,
    enabled_moves,
    initial_state,
    validate_network,
)
from robosmc.casestudy import build_comparison
from robosmc.engine import (
    DEADLOCK,
    HORIZON,
    STEP_CAP,
    Monitor,
    SimConfig,
    choose_move,
    sample_delay,
    simulate_run,
    trace_to_csv,
    trace_to_json,
    trial_rng,
)


def one_loop_net(invariant=None, guard=None, eager=False):
    auto = HybridAutomaton(
        "A", "L", (Location("L", invariant=invariant),),
        (Edge("L", "L", guard=guard, eager=eager),),
        (Variable("e1", "clock"),))
    return validate_network(Network((auto,)))


def coasting_net(invariant=None):
    auto = HybridAutomaton(
        "A", "L", (Location("L", invariant=invariant),), (),
        (Variable("e1", "clock"),))
    return validate_network(Network((auto,)))


class TestSampleDelay:
    def test_zero_when_invariant_tight(self):
        net = one_loop_net(invariant="e1 <= 15")
        state = initial_state(net)
        state.valuation["A.e1"] = 15.0
        rng = trial_rng(1, 0)
        assert sample_delay(net, state, rng, SimConfig(horizon=100.0)) == 0.0

    def test_uniform_over_remaining_window(self):
        # invariant e1 <= 15 at e1 = 5: proposals live in [0, 10]
        net = one_loop_net(invariant="e1 <= 15")
        state = initial_state(net)
        state.valuation["A.e1"] = 5.0
        rng = trial_rng(2, 0)
        cfg = SimConfig(horizon=100.0)
        draws = np.array([sample_delay(net, state, rng, cfg)
                          for _ in range(4000)])
        assert draws.min() >= 0.0 and draws.max() <= 10.0
        assert draws.mean() == pytest.approx(5.0, abs=0.2)
        assert (draws < 2.0).any() and (draws > 8.0).any()

    def test_exponential_when_unbounded(self):
        net = one_loop_net()
        state = initial_state(net)
        rng = trial_rng(3, 0)
        cfg = SimConfig(horizon=1e9, unbounded_delay_rate=0.1)
        draws = np.fromiter(
            (sample_delay(net, state, rng, cfg) for _ in range(100_000)),
            dtype=float)
        assert draws.mean() == pytest.approx(10.0, rel=0.02)

    def test_rate_parameter_scales_mean(self):
        net = one_loop_net()
        state = initial_state(net)
        rng = trial_rng(4, 0)
        cfg = SimConfig(horizon=1e9, unbounded_delay_rate=2.0)
        draws = np.fromiter(
            (sample_delay(net, state, rng, cfg) for _ in range(50_000)),
            dtype=float)
        assert draws.mean() == pytest.approx(0.5, rel=0.05)

    def test_eager_edge_fires_at_first_enabling_instant(self):
        net = one_loop_net(guard="e1 >= 3", eager=True)
        state = initial_state(net)
        rng = trial_rng(5, 0)
        cfg = SimConfig(horizon=100.0)
        for _ in range(10):
            assert sample_delay(net, state, rng, cfg) == pytest.approx(3.0)

    def test_enabled_eager_edge_means_no_delay(self):
        net = one_loop_net(eager=True)
        state = initial_state(net)
        rng = trial_rng(6, 0)
        assert sample_delay(net, state, rng, SimConfig(horizon=100.0)) == 0.0


def weighted_net(w1=3, w2=1):
    auto = HybridAutomaton(
        "A", "S", (Location("S"), Location("Win"), Location("Lose")),
        (Edge("S", "Win", weight=w1), Edge("S", "Lose", weight=w2)), ())
    return validate_network(Network((auto,)))


class TestChooseMove:
    def test_three_to_one_frequency(self):
        net = weighted_net()
        state = initial_state(net)
        moves = enabled_moves(net, state)
        rng = trial_rng(7, 0)
        n = 100_000
        wins = sum(
            choose_move(moves, state, rng).parts[0][1].target == "Win"
            for _ in range(n))
        assert wins / n == pytest.approx(0.75, abs=0.01)

    def test_frequencies_pass_chi_square(self):
        net = weighted_net()
        state = initial_state(net)
        moves = enabled_moves(net, state)
        rng = trial_rng(8, 0)
        n = 20_000
        wins = sum(
            choose_move(moves, state, rng).parts[0][1].target == "Win"
            for _ in range(n))
        _, p = stats.chisquare([wins, n - wins], [0.75 * n, 0.25 * n])
        assert p > 0.01

    def test_expression_weights_read_the_state(self):
        auto = HybridAutomaton(
            "A", "S", (Location("S"), Location("P"), Location("Q")),
            (Edge("S", "P", weight="wa"), Edge("S", "Q", weight="wb")), ())
        net = validate_network(Network(
            (auto,), variables=(Variable("wa", "real", 1.0),
                                Variable("wb", "real", 3.0))))
        state = initial_state(net)
        moves = enabled_moves(net, state)
        rng = trial_rng(9, 0)
        n = 40_000
        picks_p = sum(
            choose_move(moves, state, rng).parts[0][1].target == "P"
            for _ in range(n))
        assert picks_p / n == pytest.approx(0.25, abs=0.01)

    def test_zero_total_weight(self):
        net = weighted_net(w1=0, w2=0)
        state = initial_state(net)
        moves = enabled_moves(net, state)
        with pytest.raises(ZeroTotalWeight):
            choose_move(moves, state, trial_rng(10, 0))

    def test_single_move_needs_no_randomness(self):
        net = weighted_net(w1=1, w2=0)
        state = initial_state(net)
        moves = [m for m in enabled_moves(net, state)]
        rng = trial_rng(11, 0)
        before = rng.bit_generator.state
        move = choose_move(moves, state, rng)
        assert move.parts[0][1].target in ("Win", "Lose")


class TestTermination:
    def test_horizon(self):
        trace = simulate_run(coasting_net(), SimConfig(horizon=50.0, seed=1))
        assert trace.terminated_by == HORIZON
        assert trace.final_state.time == 50.0

    def test_deadlock_at_invariant_expiry(self):
        trace = simulate_run(
            coasting_net(invariant="e1 <= 5"), SimConfig(horizon=50.0, seed=1))
        assert trace.terminated_by == DEADLOCK
        assert trace.final_state.time == pytest.approx(5.0)

    def test_step_cap(self):
        trace = simulate_run(
            build_comparison(), SimConfig(horizon=10800.0, seed=1, max_steps=10))
        assert trace.terminated_by == STEP_CAP
        assert trace.final_state.time < 10800.0

    def test_never_past_horizon(self):
        trace = simulate_run(build_comparison(), SimConfig(horizon=300.0, seed=3))
        assert trace.final_state.time <= 300.0
        assert all(e.time <= 300.0 for e in trace.events)
        assert trace.terminated_by == HORIZON


class TestReproducibility:
    def test_same_trial_same_trace(self):
        net = build_comparison()
        cfg = SimConfig(horizon=2000.0, seed=42)
        a = simulate_run(net, cfg, trial=7)
        b = simulate_run(net, cfg, trial=7)
        assert a.events == b.events
        assert a.final_state.valuation == b.final_state.valuation

    def test_different_trials_differ(self):
        net = build_comparison()
        cfg = SimConfig(horizon=2000.0, seed=42)
        a = simulate_run(net, cfg, trial=0)
        b = simulate_run(net, cfg, trial=1)
        assert a.events != b.events

    def test_different_seeds_differ(self):
        net = build_comparison()
        a = simulate_run(net, SimConfig(horizon=2000.0, seed=1))
        b = simulate_run(net, SimConfig(horizon=2000.0, seed=2))
        assert a.events != b.events

    def test_trial_streams_are_independent_of_order(self):
        r1 = trial_rng(5, 3).random(4)
        trial_rng(5, 2).random(100)  # consuming another stream changes nothing
        r2 = trial_rng(5, 3).random(4)
        assert (r1 == r2).all()

    def test_monitors_do_not_perturb_the_run(self):
        net = build_comparison()
        cfg = SimConfig(horizon=2000.0, seed=9)
        bare = simulate_run(net, cfg, trial=2)
        watched = simulate_run(
            net, cfg, (Monitor("en", "energy"), Monitor("arr", "arrivals")),
            trial=2)
        assert [(e.time, e.kind, e.who, e.detail) for e in bare.events] == \
               [(e.time, e.kind, e.who, e.detail) for e in watched.events]
        assert bare.final_state.valuation == watched.final_state.valuation


class TestMonitors:
    def test_values_recorded_per_event(self):
        trace = simulate_run(
            build_comparison(), SimConfig(horizon=500.0, seed=4),
            (Monitor("en", "energy"),))
        assert trace.monitor_ids == ("en",)
        series = trace.monitor_series("en")
        assert len(series) == len(trace.events)
        values = [v for _, v in series]
        assert values[0] == 0.0
        assert values[-1] > 0.0
        assert all(b >= a for (_, a), (_, b) in zip(series, series[1:]))

    def test_boolean_monitor(self):
        trace = simulate_run(
            build_comparison(), SimConfig(horizon=500.0, seed=4),
            (Monitor("idle", "Behavior.InIdle"),))
        assert set(v for _, v in trace.monitor_series("idle")) <= {True, False}


class TestTraceExport:
    def test_csv_shape(self):
        trace = simulate_run(
            build_comparison(), SimConfig(horizon=300.0, seed=5),
            (Monitor("en", "energy"),))
        lines = trace_to_csv(trace).splitlines()
        assert lines[0] == "time,automaton,location,event,en"
        assert len(lines) == len(trace.events) + 1
        assert lines[1].startswith("0.000000,,,init")

    def test_csv_jump_rows_name_new_locations(self):
        trace = simulate_run(
            build_comparison(), SimConfig(horizon=300.0, seed=5))
        rows = trace_to_csv(trace).splitlines()[1:]
        jumps = [r for r, e in zip(rows, trace.events) if e.kind == "jump"]
        assert jumps, "expected at least one jump in 300 s"
        # a synchronized jump lists every participant
        sync = next(r for r, e in zip(rows, trace.events)
                    if e.kind == "jump" and "+" in e.who)
        auto_cell = sync.split(",")[1]
        assert "+" in auto_cell

    def test_json_roundtrips(self):
        trace = simulate_run(
            build_comparison(), SimConfig(horizon=300.0, seed=6),
            (Monitor("en", "energy"),))
        doc = json.loads(trace_to_json(trace))
        assert doc["terminated_by"] == "horizon"
        assert doc["monitors"] == ["en"]
        assert len(doc["events"]) == len(trace.events)
        assert doc["final"]["time"] == trace.final_state.time
        assert doc["final"]["valuation"]["energy"] == \
               trace.final_state.valuation["energy"]


class TestConfigValidation:
    def test_negative_horizon(self):
        with pytest.raises(ValueError):
            SimConfig(horizon=-1.0)

    def test_nonpositive_unbounded_rate(self):
        with pytest.raises(ValueError):
            SimConfig(horizon=1.0, unbounded_delay_rate=0.0)
