"""Arrival-window predictor against an independent counting oracle."""

import numpy as np
import pytest

from robosmc.predictor import (
    DEFAULT_THRESHOLDS,
    INITIAL_WEIGHTS,
    WINDOW_SIZE,
    Thresholds,
    branch_weights,
    interval_of,
    make_window,
    record_arrival,
    replay,
)


def oracle_histogram(values, thresholds):
    """Brute-force bucket counts, written without sorting or the
    package's own bucketing helper."""
    t1, t2, t3, t4 = thresholds
    counts = [0, 0, 0, 0, 0]
    for v in values:
        if v <= t1:
            counts[0] += 1
        elif v <= t2:
            counts[1] += 1
        elif v <= t3:
            counts[2] += 1
        elif v <= t4:
            counts[3] += 1
        else:
            counts[4] += 1
    return tuple(counts)


def oracle_decision(counts):
    fast = counts[0] + counts[1]
    slow = counts[2] + counts[3] + counts[4]
    return 0 if fast >= slow else 1


def feed(window, values, **kwargs):
    for v in values:
        window = record_arrival(window, v, **kwargs)
    return window


class TestThresholds:
    def test_defaults(self):
        t = Thresholds.default()
        assert (t.t1, t.t2, t.t3, t.t4) == DEFAULT_THRESHOLDS

    def test_must_increase(self):
        with pytest.raises(ValueError):
            Thresholds(15, 15, 60, 90)
        with pytest.raises(ValueError):
            Thresholds(44, 15, 60, 90)

    def test_must_be_positive(self):
        with pytest.raises(ValueError):
            Thresholds(0, 44, 60, 90)


class TestIntervalOf:
    # boundary behaviour is upper-inclusive: v == t_k belongs to bucket k
    def test_upper_inclusive_boundaries(self):
        t = Thresholds(15, 44, 60, 90)
        assert interval_of(10, t) == 1
        assert interval_of(15, t) == 1
        assert interval_of(44, t) == 2
        assert interval_of(44.0001, t) == 3
        assert interval_of(60, t) == 3
        assert interval_of(90, t) == 4
        assert interval_of(100, t) == 5

    def test_zero_is_fastest(self):
        assert interval_of(0.0, Thresholds.default()) == 1

    def test_matches_oracle(self):
        t = Thresholds.default()
        rng = np.random.default_rng(1)
        for v in rng.uniform(0, 200, size=500):
            counts = oracle_histogram([v], (t.t1, t.t2, t.t3, t.t4))
            assert counts[interval_of(v, t) - 1] == 1


class TestRecordArrival:
    def test_first_nineteen_change_nothing(self):
        w = make_window()
        for i in range(WINDOW_SIZE - 1):
            w = record_arrival(w, 5.0)
            assert w.count == i + 1
            assert w.weights == INITIAL_WEIGHTS
            assert w.go_idle == 1
            assert w.decisions == ()

    def test_twentieth_fires_decision(self):
        w = feed(make_window(), [5.0] * WINDOW_SIZE)
        assert w.count == 0
        assert w.weights == (20, 0, 0, 0, 0)
        assert w.go_idle == 0
        assert len(w.decisions) == 1
        d = w.decisions[0]
        assert d.fast_count == 20 and d.slow_count == 0

    def test_latest_tracks_last_value(self):
        w = feed(make_window(), [3.0, 7.0, 11.0])
        assert w.latest == 11.0

    def test_mixed_window_counts(self):
        # 8 fast-1, 4 fast-2, 3+3+2 slow with the classic 15/44/60/90 bounds
        t = Thresholds(15, 44, 60, 90)
        values = ([10.0] * 8 + [30.0] * 4 + [50.0] * 3 + [70.0] * 3
                  + [100.0] * 2)
        w = feed(make_window(t), values)
        assert w.weights == (8, 4, 3, 3, 2)
        d = w.decisions[0]
        assert (d.fast_count, d.slow_count) == (12, 8)
        assert w.go_idle == 0

    def test_tie_keeps_the_fast_branch(self):
        # 10 fast vs 10 slow: the >= comparison wins the tie for staying
        values = [5.0] * 10 + [200.0] * 10
        w = feed(make_window(), values)
        d = w.decisions[0]
        assert d.fast_count == d.slow_count == 10
        assert w.go_idle == 0

    def test_batches_do_not_overlap(self):
        fast = [5.0] * WINDOW_SIZE
        slow = [150.0] * WINDOW_SIZE
        w = feed(make_window(), fast + slow)
        assert [d.go_idle for d in w.decisions] == [0, 1]
        assert w.weights == (0, 0, 0, 0, 20)

    def test_count_conservation(self):
        rng = np.random.default_rng(7)
        w = feed(make_window(), rng.uniform(0, 200, size=200))
        for d in w.decisions:
            assert sum(d.counts) == WINDOW_SIZE
            assert d.fast_count + d.slow_count == WINDOW_SIZE

    def test_scratch_sorted_when_requested(self):
        values = list(np.random.default_rng(3).uniform(0, 180, WINDOW_SIZE))
        w = feed(make_window(), values, sort_scratch=True)
        assert w.scratch == tuple(sorted(values))

    def test_scratch_skipped_by_default(self):
        w = feed(make_window(), [5.0] * WINDOW_SIZE)
        assert w.scratch is None

    def test_purity(self):
        w = make_window()
        before = w
        record_arrival(w, 9.0)
        assert w == before


class TestOracleEquivalence:
    def test_ten_thousand_random_windows(self):
        """Counting oracle agreement over 10^4 random windows, zero
        mismatches allowed (histogram, decision and the q2=q3 tie)."""
        t = Thresholds.default()
        bounds = (t.t1, t.t2, t.t3, t.t4)
        rng = np.random.default_rng(2024)
        mismatches = 0
        ties_seen = 0
        for _ in range(10_000):
            values = rng.uniform(0, 200, size=WINDOW_SIZE)
            # mix in exact threshold values so boundaries get exercised
            k = rng.integers(0, 6)
            if k:
                values[:k] = rng.choice(bounds, size=k)
            w = feed(make_window(t), values)
            counts = oracle_histogram(values, bounds)
            if w.weights != counts or w.go_idle != oracle_decision(counts):
                mismatches += 1
            if counts[0] + counts[1] == 10:
                ties_seen += 1
        assert mismatches == 0
        assert ties_seen > 0  # the tie branch was actually exercised

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(0, 200, size=WINDOW_SIZE)
        reference = feed(make_window(), values)
        for _ in range(50):
            shuffled = rng.permutation(values)
            w = feed(make_window(), shuffled)
            assert w.weights == reference.weights
            assert w.go_idle == reference.go_idle


class TestBranchWeights:
    def test_initial_weights_before_any_decision(self):
        assert branch_weights(make_window()) == INITIAL_WEIGHTS

    def test_pass_through_after_decision(self):
        t = Thresholds(15, 44, 60, 90)
        values = ([10.0] * 8 + [30.0] * 4 + [50.0] * 3 + [70.0] * 3
                  + [100.0] * 2)
        w = feed(make_window(t), values)
        assert branch_weights(w) == (8, 4, 3, 3, 2)

    def test_degenerate_vector(self):
        w = feed(make_window(), [1.0] * WINDOW_SIZE)
        assert branch_weights(w) == (20, 0, 0, 0, 0)


class TestReplay:
    def test_replay_equals_incremental(self):
        rng = np.random.default_rng(11)
        values = list(rng.uniform(0, 200, size=87))
        assert replay(values) == feed(make_window(), values)

    def test_decision_count(self):
        values = [50.0] * 205
        w = replay(values)
        assert len(w.decisions) == 10  # floor(205 / 20)
        assert w.count == 5
