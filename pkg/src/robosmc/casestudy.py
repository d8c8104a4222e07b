"""Sorting-cell model: one arrival source, one or two robot arms.

The robot loops through pick-and-place cycles: an arrival message sends
it from its resting pose to the pick position, it grabs the box, carries
it to shelf B or C under a hard time budget, releases, and then holds a
standby pose until the next arrival.  Energy accrues two ways: discrete
joule costs on each movement edge and constant drain rates while
dwelling in a pose.  Idling (moving to a low-power parked pose between
jobs) trades two extra movements for a lower drain rate, so it only
pays off when the standby dwell is long enough; `break_even_dwell`
returns that analytic threshold.

Policies:

* ``adaptive``   - go idle after ``idle_latency`` seconds of standby,
                   but only while the arrival predictor's ``goIdle``
                   flag is set;
* ``always-idle``- go idle after the latency unconditionally;
* ``never-idle`` - hold standby forever (the baseline arm).

The environment samples inter-arrival gaps in five bands whose weights
are the predictor's current bucket counts, waits out the gap, records
it in the predictor (which rewrites the weights and the ``goIdle`` flag
every 20th arrival), picks a destination shelf, and then emits one
``move`` message per robot.  A message to a busy robot waits until the
robot is back in a receiving pose, like a box held on a conveyor; the
predictor always records the *sampled* gap, not the delivery delay.

The two-arm comparison network drives both policies from the identical
arrival stream, accruing ``energy`` (adaptive arm) and ``energy2``
(baseline arm) for the estimator queries to compare.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial

from .automata import (
    Edge,
    FunctionUpdate,
    HybridAutomaton,
    Location,
    ModelError,
    Network,
    Variable,
)
from .predictor import (
    INITIAL_WEIGHTS,
    Thresholds,
    branch_weights,
    make_window,
    record_arrival,
)


class SpecInconsistent(ModelError):
    """The requested model parameters contradict each other."""


class NoBreakEven(ModelError):
    """Idling never pays off (or always does) for this energy table."""


POLICIES = ("adaptive", "never-idle", "always-idle")

WEIGHT_VARS = ("TI1", "TI2", "TI3", "TI4", "TI5")

DEST_B = 0
DEST_C = 1

# robot activity phase markers (FB): return to pick position, carry a
# box out, settle into standby, park in the idle pose
PHASE_RETURN = 0
PHASE_CARRY = 1
PHASE_SETTLE = 2
PHASE_PARK = 3


@dataclass(frozen=True)
class EnergyTable:
    """Joule costs of each movement and drain rates (J/s) of each pose."""

    a_to_b: float = 374.0
    a_to_c: float = 293.3
    b_to_a: float = 196.1
    c_to_a: float = 125.7
    b_to_idle: float = 198.6
    c_to_idle: float = 145.0
    idle_to_a: float = 112.3
    rate_a: float = 40.20
    rate_b: float = 39.87
    rate_c: float = 40.45
    rate_idle: float = 37.45

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise SpecInconsistent(f"energy table entry {name} = {value} "
                                       f"must be positive")


@dataclass(frozen=True)
class RobotSpec:
    """Arm behaviour: policy, movement timings and pose joint angles."""

    policy: str = "adaptive"
    travel_to_a: float = 5.0  # resting pose -> pick position (s)
    handling: float = 2.0  # grab time at the pick position (s)
    a_to_b_time: float = 8.0  # carry durations (s)
    a_to_c_time: float = 12.0
    deadline_b: float = 10.0  # carry time budgets enforced as invariants (s)
    deadline_c: float = 15.0
    idle_latency: float = 1.0  # standby dwell before the arm may park (s)
    pose_in_idle: tuple = (-8, -79, -87, -105, 87, -51)
    pose_ready_a: tuple = (-8, -87, -128, -56, 87, -52)
    pose_standby_c: tuple = (83, -114, -95, -65, 93, -49)
    pose_standby_b: tuple = (177, -123, -80, -66, 90, -46)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise SpecInconsistent(f"unknown policy {self.policy!r}; "
                                   f"expected one of {POLICIES}")
        for name in ("travel_to_a", "handling", "a_to_b_time", "a_to_c_time",
                     "deadline_b", "deadline_c"):
            if getattr(self, name) <= 0:
                raise SpecInconsistent(f"{name} must be positive")
        if self.idle_latency < 0:
            raise SpecInconsistent("idle_latency must be non-negative")
        if self.a_to_b_time > self.deadline_b:
            raise SpecInconsistent(
                f"carry time to B ({self.a_to_b_time}s) exceeds its "
                f"deadline ({self.deadline_b}s)")
        if self.a_to_c_time > self.deadline_c:
            raise SpecInconsistent(
                f"carry time to C ({self.a_to_c_time}s) exceeds its "
                f"deadline ({self.deadline_c}s)")
        for name in ("pose_in_idle", "pose_ready_a", "pose_standby_c",
                     "pose_standby_b"):
            if len(getattr(self, name)) != 6:
                raise SpecInconsistent(f"{name} needs 6 joint angles")


@dataclass(frozen=True)
class EnvSpec:
    """Arrival source: five gap bands aligned with predictor buckets.

    ``ranges[i]`` is the (lo, hi] band branch i samples uniformly; the
    interior boundaries must equal the predictor thresholds so sampled
    gaps land in the histogram bucket that chose them.  ``fixed_gap``
    replaces the whole sampler with one constant gap (deterministic
    arrivals for calibration runs).  ``update_weights=False`` freezes
    the branch weights at their initial values while the predictor
    still records; ``pin_go_idle`` overrides the published policy bit.
    """

    ranges: tuple = ((0.0, 15.0), (15.0, 63.0), (63.0, 90.0),
                     (90.0, 120.0), (120.0, 180.0))
    thresholds: Thresholds = field(default_factory=Thresholds.default)
    initial_weights: tuple = INITIAL_WEIGHTS
    dest_weights: tuple = (1.0, 1.0)  # shelf B, shelf C
    fixed_gap: float | None = None
    update_weights: bool = True
    pin_go_idle: int | None = None

    def __post_init__(self):
        if len(self.ranges) != 5:
            raise SpecInconsistent("exactly five gap ranges are required")
        bounds = (self.thresholds.t1, self.thresholds.t2,
                  self.thresholds.t3, self.thresholds.t4)
        for i, (lo, hi) in enumerate(self.ranges):
            if not 0 <= lo < hi:
                raise SpecInconsistent(f"bad gap range {i + 1}: ({lo}, {hi})")
            if i > 0 and lo != self.ranges[i - 1][1]:
                raise SpecInconsistent(
                    f"gap ranges must be contiguous at band {i + 1}")
            if i < 4 and hi != bounds[i]:
                raise SpecInconsistent(
                    f"range {i + 1} upper bound {hi} must equal predictor "
                    f"threshold {bounds[i]}")
        if len(self.initial_weights) != 5 or min(self.initial_weights) < 0 \
                or sum(self.initial_weights) <= 0:
            raise SpecInconsistent(
                f"bad initial weights {self.initial_weights}")
        if len(self.dest_weights) != 2 or min(self.dest_weights) < 0 \
                or sum(self.dest_weights) <= 0:
            raise SpecInconsistent(f"bad destination weights {self.dest_weights}")
        if self.fixed_gap is not None and self.fixed_gap <= 0:
            raise SpecInconsistent(f"fixed_gap must be positive, "
                                   f"got {self.fixed_gap}")
        if self.pin_go_idle not in (None, 0, 1):
            raise SpecInconsistent(f"pin_go_idle must be None, 0 or 1")


def aligned_ranges(thresholds: Thresholds, top: float | None = None) -> tuple:
    """Five contiguous gap bands whose interior bounds are the given
    predictor thresholds; ``top`` caps the slowest band (default the
    last threshold plus 60 s)."""
    bounds = (thresholds.t1, thresholds.t2, thresholds.t3, thresholds.t4)
    if top is None:
        top = bounds[3] + 60.0
    if top <= bounds[3]:
        raise SpecInconsistent(
            f"band ceiling {top} must exceed the last threshold {bounds[3]}")
    lows = (0.0, *bounds)
    highs = (*bounds, top)
    return tuple(zip(lows, highs))


# ---------------------------------------------------------------------------
# Opaque updates (module level so networks pickle)
# ---------------------------------------------------------------------------

def _sample_gap(state, rng, lo=0.0, hi=1.0, target="b"):
    state.valuation[target] = float(rng.uniform(lo, hi))


def _record_gap(state, rng, gap_var="b", aux_key="predictor",
                update_weights=True, pin_go_idle=None, go_idle_var="goIdle"):
    window = record_arrival(state.aux[aux_key], state.valuation[gap_var])
    state.aux[aux_key] = window
    if update_weights:
        for name, w in zip(WEIGHT_VARS, branch_weights(window)):
            state.valuation[name] = int(w)
    flag = window.go_idle if pin_go_idle is None else pin_go_idle
    state.valuation[go_idle_var] = int(flag)


# ---------------------------------------------------------------------------
# Robot arm
# ---------------------------------------------------------------------------

def _pose(angles) -> tuple[str, ...]:
    return tuple(f"angle{i + 1} = {v}" for i, v in enumerate(angles))


def build_robot(
    name: str,
    channel: str,
    energy_var: str,
    table: EnergyTable | None = None,
    spec: RobotSpec | None = None,
    dest_var: str = "dest",
    go_idle_var: str = "goIdle",
) -> HybridAutomaton:
    """One sorting arm reading arrivals from ``channel`` and accruing
    its consumption into the (global) variable ``energy_var``.

    Locations: Idle (start) and InIdle share the parked low-power pose;
    ReadyA is the travel to the pick position; Grab holds the box at
    the pick position; BoxMovedB/C are the carries, timed by the local
    clock e1 against their deadlines; StandbyB/C hold the shelf pose
    waiting for the next arrival.  Carries and travels cost discrete
    joules; poses with a dwell drain at their table rate.
    """
    table = table or EnergyTable()
    spec = spec or RobotSpec()

    r = table
    s = spec
    e = energy_var

    def to_ready(cost: float) -> Edge:
        return Edge("", "ReadyA", sync=f"{channel}?", updates=(
            f"{e} = {e} + {cost}",
            "phase = 0",
            f"FB = {PHASE_RETURN}",
            *_pose(s.pose_ready_a),
        ))

    def from_(loc: str, edge: Edge) -> Edge:
        return replace(edge, source=loc)

    locations = (
        Location("Idle", rates={e: r.rate_idle}),
        Location("InIdle", rates={e: r.rate_idle}),
        Location("ReadyA", invariant=f"phase <= {s.travel_to_a}"),
        Location("Grab", invariant=f"phase <= {s.handling}",
                 rates={e: r.rate_a}),
        Location("BoxMovedB", invariant=f"e1 <= {s.deadline_b}"),
        Location("BoxMovedC", invariant=f"e1 <= {s.deadline_c}"),
        Location("StandbyB", rates={e: r.rate_b}),
        Location("StandbyC", rates={e: r.rate_c}),
    )

    edges = [
        from_("Idle", to_ready(r.idle_to_a)),
        from_("InIdle", to_ready(r.idle_to_a)),
        from_("StandbyB", to_ready(r.b_to_a)),
        from_("StandbyC", to_ready(r.c_to_a)),
        Edge("ReadyA", "Grab", guard=f"phase >= {s.travel_to_a}", eager=True,
             updates=("phase = 0", "GoR = 0")),
        Edge("Grab", "BoxMovedB", eager=True,
             guard=f"phase >= {s.handling} and {dest_var} == {DEST_B}",
             updates=(f"{e} = {e} + {r.a_to_b}", "e1 = 0",
                      f"FB = {PHASE_CARRY}")),
        Edge("Grab", "BoxMovedC", eager=True,
             guard=f"phase >= {s.handling} and {dest_var} == {DEST_C}",
             updates=(f"{e} = {e} + {r.a_to_c}", "e1 = 0",
                      f"FB = {PHASE_CARRY}")),
        Edge("BoxMovedB", "StandbyB", guard=f"e1 >= {s.a_to_b_time}",
             eager=True,
             updates=("GoR = 1", f"FB = {PHASE_SETTLE}", "wait = 0",
                      *_pose(s.pose_standby_b))),
        Edge("BoxMovedC", "StandbyC", guard=f"e1 >= {s.a_to_c_time}",
             eager=True,
             updates=("GoR = 1", f"FB = {PHASE_SETTLE}", "wait = 0",
                      *_pose(s.pose_standby_c))),
    ]

    if s.policy != "never-idle":
        permit = f"wait >= {s.idle_latency}"
        if s.policy == "adaptive":
            permit += f" and {go_idle_var} == 1"
        for loc, cost in (("StandbyB", r.b_to_idle), ("StandbyC", r.c_to_idle)):
            edges.append(Edge(loc, "InIdle", guard=permit, eager=True,
                              updates=(f"{e} = {e} + {cost}",
                                       f"FB = {PHASE_PARK}",
                                       *_pose(s.pose_in_idle))))

    variables = (
        Variable("e1", "clock"),
        Variable("phase", "clock"),
        Variable("wait", "clock"),
        Variable("FB", "int", PHASE_RETURN),
        Variable("GoR", "int", 1),
        *(Variable(f"angle{i + 1}", "int", v)
          for i, v in enumerate(s.pose_in_idle)),
    )

    return HybridAutomaton(name, "Idle", locations, tuple(edges), variables)


# ---------------------------------------------------------------------------
# Arrival source
# ---------------------------------------------------------------------------

def build_environment(
    name: str,
    channels: tuple[str, ...],
    spec: EnvSpec | None = None,
    aux_key: str = "predictor",
) -> HybridAutomaton:
    """The arrival source feeding one robot per channel.

    Loop: pick a gap band by the live TI weights, sample the gap, wait
    it out, record it in the predictor, pick a destination shelf, then
    send one message per channel (each waits for its robot if busy).
    """
    spec = spec or EnvSpec()
    if not channels:
        raise SpecInconsistent("the arrival source needs at least one channel")

    edges = []
    if spec.fixed_gap is not None:
        edges.append(Edge("Decide", "Wait", eager=True,
                          updates=(f"b = {spec.fixed_gap}", "x = 0")))
    else:
        for i, (lo, hi) in enumerate(spec.ranges):
            edges.append(Edge(
                "Decide", "Wait", eager=True, weight=WEIGHT_VARS[i],
                updates=(FunctionUpdate(partial(_sample_gap, lo=lo, hi=hi),
                                        writes=("b",)),
                         "x = 0")))

    recorder = FunctionUpdate(
        partial(_record_gap, update_weights=spec.update_weights,
                pin_go_idle=spec.pin_go_idle, aux_key=aux_key),
        reads=("b",), writes=(*WEIGHT_VARS, "goIdle"))
    edges.append(Edge("Wait", "Dispatch", guard="x >= b", eager=True,
                      updates=(recorder, "arrivals = arrivals + 1")))

    edges.append(Edge("Dispatch", "Send1", eager=True,
                      weight=spec.dest_weights[0], updates=(f"dest = {DEST_B}",)))
    edges.append(Edge("Dispatch", "Send1", eager=True,
                      weight=spec.dest_weights[1], updates=(f"dest = {DEST_C}",)))

    send_locs = [f"Send{i + 1}" for i in range(len(channels))]
    for i, chan in enumerate(channels):
        nxt = send_locs[i + 1] if i + 1 < len(channels) else "Decide"
        edges.append(Edge(send_locs[i], nxt, sync=f"{chan}!", eager=True))

    locations = (
        Location("Decide"),
        Location("Wait", invariant="x <= b"),
        Location("Dispatch"),
        *(Location(loc) for loc in send_locs),
    )

    return HybridAutomaton(name, "Decide", locations, tuple(edges),
                           (Variable("x", "clock"),))


def _shared_variables(spec: EnvSpec) -> tuple[Variable, ...]:
    return (
        Variable("b", "real", 0.0),
        Variable("dest", "int", DEST_B),
        Variable("goIdle", "int",
                 1 if spec.pin_go_idle is None else spec.pin_go_idle),
        Variable("arrivals", "int", 0),
        *(Variable(name, "int", w)
          for name, w in zip(WEIGHT_VARS, spec.initial_weights)),
    )


def _window_factory(spec: EnvSpec):
    return partial(make_window, spec.thresholds, tuple(spec.initial_weights),
                   1 if spec.pin_go_idle is None else spec.pin_go_idle)


# ---------------------------------------------------------------------------
# Composed networks
# ---------------------------------------------------------------------------

def build_single(
    table: EnergyTable | None = None,
    robot: RobotSpec | None = None,
    env: EnvSpec | None = None,
) -> Network:
    """One arm (``Behavior``, accruing ``energy``) with its arrival source."""
    table = table or EnergyTable()
    env = env or EnvSpec()
    network = Network(
        automata=(
            build_environment("Env", ("move",), env),
            build_robot("Behavior", "move", "energy", table, robot),
        ),
        channels=("move",),
        variables=(Variable("energy", "real", 0.0), *_shared_variables(env)),
        aux_factories={"predictor": _window_factory(env)},
    )
    return network


def build_comparison(
    table: EnergyTable | None = None,
    robot: RobotSpec | None = None,
    robot2: RobotSpec | None = None,
    env: EnvSpec | None = None,
) -> Network:
    """Two arms on the same arrival stream: ``Behavior`` (adaptive,
    ``energy``) vs ``Behavior2`` (never-idle baseline, ``energy2``)."""
    table = table or EnergyTable()
    robot = robot or RobotSpec(policy="adaptive")
    robot2 = robot2 or RobotSpec(policy="never-idle")
    env = env or EnvSpec()
    network = Network(
        automata=(
            build_environment("Env", ("move", "move2"), env),
            build_robot("Behavior", "move", "energy", table, robot),
            build_robot("Behavior2", "move2", "energy2", table, robot2),
        ),
        channels=("move", "move2"),
        variables=(Variable("energy", "real", 0.0),
                   Variable("energy2", "real", 0.0),
                   *_shared_variables(env)),
        aux_factories={"predictor": _window_factory(env)},
    )
    return network


# ---------------------------------------------------------------------------
# Analytic oracle
# ---------------------------------------------------------------------------

def break_even_dwell(table: EnergyTable | None = None,
                     origin: str = "C") -> float:
    """Standby dwell (s) at which parking and holding cost the same.

    Parking from the shelf pose costs the park move, the lower idle
    drain for the dwell, and the return-from-idle move; holding costs
    the shelf drain plus the return-from-shelf move.  Both are linear
    in the dwell, so the break-even point is a ratio; longer dwells
    favour parking.
    """
    table = table or EnergyTable()
    if origin.upper() == "C":
        park, back = table.c_to_idle, table.c_to_a
        hold_rate = table.rate_c
    elif origin.upper() == "B":
        park, back = table.b_to_idle, table.b_to_a
        hold_rate = table.rate_b
    else:
        raise ValueError(f"origin must be 'B' or 'C', got {origin!r}")
    saving_rate = hold_rate - table.rate_idle
    if saving_rate <= 0:
        raise NoBreakEven(
            f"idle drain {table.rate_idle} J/s does not undercut the "
            f"{origin} drain {hold_rate} J/s")
    return (park + table.idle_to_a - back) / saving_rate


def idle_cycle_penalty(table: EnergyTable, dwell: float,
                       origin: str = "C") -> float:
    """Extra joules the parking arm pays over the holding arm for one
    standby window of ``dwell`` seconds (negative when parking wins)."""
    table = table or EnergyTable()
    if origin.upper() == "C":
        park, back, hold_rate = table.c_to_idle, table.c_to_a, table.rate_c
    else:
        park, back, hold_rate = table.b_to_idle, table.b_to_a, table.rate_b
    return (park + table.idle_to_a - back) - (hold_rate - table.rate_idle) * dwell


# ---------------------------------------------------------------------------
# Bundled verification suite (for the two-arm comparison network)
# ---------------------------------------------------------------------------

def _angles_equal(auto: str, angles) -> str:
    return " and ".join(f"{auto}.angle{i + 1} == {v}"
                        for i, v in enumerate(angles))

_P = RobotSpec()

VERIFICATION_QUERIES: tuple[str, ...] = (
    "E[<=10800; 20] (max: energy)",
    "E[<=10800; 20] (max: energy2)",
    "Pr[t<=10800](<> energy <= energy2)",
    "E<> Behavior.StandbyC and Behavior2.StandbyC and energy >= energy2",
    "A[] Behavior.StandbyC and Behavior2.StandbyC imply energy <= energy2",
    f"A[] Behavior.InIdle imply {_angles_equal('Behavior', _P.pose_in_idle)}",
    f"A[] Behavior.ReadyA imply {_angles_equal('Behavior', _P.pose_ready_a)}",
    f"A[] Behavior.StandbyC imply {_angles_equal('Behavior', _P.pose_standby_c)}",
    f"A[] Behavior.StandbyB imply {_angles_equal('Behavior', _P.pose_standby_b)}",
    f"A[] Behavior.BoxMovedB imply Behavior.e1 <= {_P.deadline_b}",
    f"A[] Behavior.BoxMovedC imply Behavior.e1 <= {_P.deadline_c}",
    "Behavior.BoxMovedB --> Behavior.Grab",
    "Behavior.BoxMovedC --> Behavior.Grab",
    "Behavior.InIdle --> Behavior.ReadyA",
    "Behavior.InIdle --> Behavior.Grab",
    "A[] not deadlock",
)
