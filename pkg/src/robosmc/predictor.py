"""Windowed arrival predictor driving the robot's idle policy.

The environment delivers boxes with random inter-arrival times.  The
predictor keeps the last ``WINDOW_SIZE`` inter-arrival values in a
buffer; every time the buffer fills it histograms the values into five
intervals, uses the two fastest buckets versus the three slowest as a
majority vote, and sets a single policy bit:

    go_idle = 0   arrivals are mostly fast, stay in standby
    go_idle = 1   arrivals are mostly slow, folding to idle pays off

The five bucket counts double as the branch weights of the arrival
generator, so the environment's interval mix drifts toward its own
recent history while the robot's policy follows the same statistics.

All functions here are pure: ``record_arrival`` returns a new window.
The simulation engine owns exactly one window per trajectory and hands
it from state to state, so trajectories never share predictor state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

WINDOW_SIZE = 20

#: Interval boundaries (seconds) between the five arrival buckets.
#: The short/long decision boundary (second threshold) sits where
#: folding to idle starts to pay off: the break-even standby dwell
#: computed from the energy table (roughly 44 to 47 s, see
#: ``casestudy.break_even_dwell``) plus the 15 to 19 s the arm is busy
#: handling a box, rounded to 63 s.  The outer thresholds just spread
#: the remaining buckets over the plausible inter-arrival range.
DEFAULT_THRESHOLDS = (15.0, 63.0, 90.0, 120.0)

#: Bucket weights before the first full window: uniform, summing to
#: WINDOW_SIZE like every later weight vector.
INITIAL_WEIGHTS = (4, 4, 4, 4, 4)


@dataclass(frozen=True)
class Thresholds:
    """Strictly increasing boundaries splitting (0, inf) into 5 buckets."""

    t1: float
    t2: float
    t3: float
    t4: float

    def __post_init__(self):
        seq = (self.t1, self.t2, self.t3, self.t4)
        if not all(a < b for a, b in zip(seq, seq[1:])):
            raise ValueError(f"thresholds must be strictly increasing: {seq}")
        if self.t1 <= 0:
            raise ValueError(f"thresholds must be positive: {seq}")

    @classmethod
    def default(cls) -> "Thresholds":
        return cls(*DEFAULT_THRESHOLDS)


@dataclass(frozen=True)
class Decision:
    """Outcome of one full-window evaluation."""

    counts: tuple[int, int, int, int, int]
    fast_count: int  # arrivals at or below the second threshold
    slow_count: int  # arrivals above it
    go_idle: int


@dataclass(frozen=True)
class ArrivalWindow:
    """Predictor state: value buffer, bucket weights and the policy bit.

    ``count`` is the number of values stored since the last decision;
    a decision fires on the arrival that brings it to WINDOW_SIZE and
    resets it to zero.  ``weights`` always sums to WINDOW_SIZE.
    """

    thresholds: Thresholds = field(default_factory=Thresholds.default)
    values: tuple[float, ...] = (0.0,) * WINDOW_SIZE
    count: int = 0
    latest: float = 0.0
    weights: tuple[int, int, int, int, int] = INITIAL_WEIGHTS
    go_idle: int = 1
    seen: int = 0
    decisions: tuple[Decision, ...] = ()
    scratch: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.values) != WINDOW_SIZE:
            raise ValueError(f"buffer must hold {WINDOW_SIZE} values")
        if sum(self.weights) <= 0:
            raise ValueError(f"weights must not all be zero: {self.weights}")


def make_window(
    thresholds: Thresholds | None = None,
    initial_weights: tuple[int, int, int, int, int] = INITIAL_WEIGHTS,
    go_idle: int = 1,
) -> ArrivalWindow:
    """Fresh predictor state with configurable starting weights/policy."""
    return ArrivalWindow(
        thresholds=thresholds or Thresholds.default(),
        weights=tuple(initial_weights),
        go_idle=go_idle,
    )


def interval_of(value: float, thresholds: Thresholds) -> int:
    """Bucket index 1..5 for an inter-arrival value.

    Boundaries are inclusive on the upper side: a value exactly equal
    to a threshold belongs to the bucket below it.
    """
    if value <= thresholds.t1:
        return 1
    if value <= thresholds.t2:
        return 2
    if value <= thresholds.t3:
        return 3
    if value <= thresholds.t4:
        return 4
    return 5


def record_arrival(
    window: ArrivalWindow, value: float, sort_scratch: bool = False
) -> ArrivalWindow:
    """Store one inter-arrival value; evaluate the window when it fills.

    The first WINDOW_SIZE - 1 arrivals of a batch only append to the
    buffer.  The arrival that fills the buffer triggers a decision:
    histogram all stored values, compare the two fast buckets against
    the three slow ones (ties go to 0, i.e. stay in standby), replace
    the bucket weights with the fresh counts, and start an empty batch.
    Batches never overlap: each value is histogrammed exactly once.

    ``sort_scratch`` additionally keeps an ascending copy of the filled
    buffer in ``scratch``.  The ordering has no effect on the histogram
    or the decision; it exists only for inspecting the window and is
    skipped by default.
    """
    slot = min(window.count, WINDOW_SIZE - 1)
    values = window.values[:slot] + (value,) + window.values[slot + 1:]

    if window.count < WINDOW_SIZE - 1:
        return replace(
            window,
            values=values,
            count=window.count + 1,
            latest=value,
            seen=window.seen + 1,
        )

    counts = [0, 0, 0, 0, 0]
    for v in values:
        counts[interval_of(v, window.thresholds) - 1] += 1
    fast = counts[0] + counts[1]
    slow = counts[2] + counts[3] + counts[4]
    go_idle = 0 if fast >= slow else 1
    decision = Decision(tuple(counts), fast, slow, go_idle)
    return replace(
        window,
        values=values,
        count=0,
        latest=value,
        weights=tuple(counts),
        go_idle=go_idle,
        seen=window.seen + 1,
        decisions=window.decisions + (decision,),
        scratch=tuple(sorted(values)) if sort_scratch else window.scratch,
    )


def branch_weights(window: ArrivalWindow) -> tuple[int, int, int, int, int]:
    """Current generator branch weights (initial weights before the
    first decision, the latest histogram counts afterwards)."""
    return window.weights


def replay(
    values: list[float],
    thresholds: Thresholds | None = None,
    initial_weights: tuple[int, int, int, int, int] = INITIAL_WEIGHTS,
) -> ArrivalWindow:
    """Feed a whole arrival log through a fresh window."""
    window = make_window(thresholds, initial_weights)
    for v in values:
        window = record_arrival(window, v)
    return window
