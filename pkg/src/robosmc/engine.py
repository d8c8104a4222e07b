"""Trajectory sampler for automata networks.

A run alternates delay and jump phases until the horizon, a deadlock or
the step cap.  Delays come from a race between the automata:

* For each automaton the engine computes, exactly, the time window in
  which each of its candidate moves is enabled (internal edges, plus
  send edges paired with a currently ready receiver).  Windows are
  intersections of linear guard constraints, clamped to the largest
  delay all location invariants tolerate.
* An automaton with an enabled *eager* edge proposes the earliest
  instant that edge enables.  Otherwise it proposes a uniform sample
  between the first instant any of its moves enables and the invariant
  bound, or ``first instant + Exponential(unbounded-delay-rate)`` when
  nothing bounds the delay.
* The smallest proposal wins; after elapsing, one move is drawn from
  all enabled moves with probability proportional to its weight.

If no move can become enabled within the tolerated delay, the run
either reaches the horizon (when the invariants allow it) or stops as
a deadlock at the moment the binding invariant runs out, which also
covers the classical "no enabled move and no delay allowed" case.

Reproducibility: trial ``i`` of a configuration with seed ``s`` uses
the dedicated stream ``PCG64(SeedSequence(entropy=s, spawn_key=(i,)))``.
Every random choice of a trajectory is drawn from its own stream in a
fixed order, so a (network, config, monitors) triple determines each
trace bit for bit, no matter how trials are batched or distributed.
Monitors are read-only: running with or without them yields the same
event sequence.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np

from .automata import (
    INF,
    Move,
    Network,
    NetworkState,
    ZeroTotalWeight,
    ModelError,
    _apply_inplace,
    _elapse_inplace,
    _lin_value_slope,
    compile_observer,
    compiled,
    enabled_moves,
    initial_state,
)

#: Trace/termination markers.
HORIZON = "horizon"
DEADLOCK = "deadlock"
STEP_CAP = "step-cap"


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.

    ``unbounded_delay_rate`` shapes the exponential delay used in
    locations nothing bounds; ``max_steps`` caps the total number of
    phases so modelling mistakes cannot hang a run (hitting the cap is
    recorded on the trace, not raised).
    """

    horizon: float
    seed: int = 0
    unbounded_delay_rate: float = 0.1
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError(f"negative horizon {self.horizon}")
        if self.unbounded_delay_rate <= 0:
            raise ValueError(
                f"unbounded_delay_rate must be positive, got {self.unbounded_delay_rate}")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Dedicated random stream for one trial of one configuration."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Monitor:
    """Named read-only expression sampled at every event of a run."""

    id: str
    expr: Any  # str | Expr


class TraceEvent(NamedTuple):
    time: float
    kind: str  # 'init' | 'delay' | 'jump'
    who: str  # automaton name(s) for jumps, '' for delays
    detail: str  # move description or delay duration
    values: tuple  # monitored expression values


@dataclass
class Trace:
    events: list[TraceEvent]
    final_state: NetworkState
    terminated_by: str
    monitor_ids: tuple[str, ...] = ()
    trial: int = 0

    def monitor_series(self, monitor_id: str) -> list[tuple[float, Any]]:
        idx = self.monitor_ids.index(monitor_id)
        return [(e.time, e.values[idx]) for e in self.events]


# ---------------------------------------------------------------------------
# Delay proposals
# ---------------------------------------------------------------------------

def _guard_window(network, state, lin, slopes) -> tuple[float, float] | None:
    """Intersection of a guard's linear conjuncts as a dt interval,
    or None when empty.  Strict bounds are treated as closed here; the
    exact guard is re-checked after the delay is applied."""
    lo, hi = 0.0, INF
    val = state.valuation
    for items, const, op in lin:
        value = const
        slope = 0.0
        for key, coef in items:
            value += coef * val[key]
            s = slopes.get(key)
            if s is None:
                s = slopes[key] = _slope_of(network, state, key)
            slope += coef * s
        if op in ("<=", "<"):
            if slope == 0.0:
                if value > 0:
                    return None
            elif slope > 0:
                hi = min(hi, -value / slope)
            else:
                lo = max(lo, -value / slope)
        elif op in (">=", ">"):
            if slope == 0.0:
                if value < 0:
                    return None
            elif slope < 0:
                hi = min(hi, -value / slope)
            else:
                lo = max(lo, -value / slope)
        elif op == "==":
            if slope == 0.0:
                if value != 0:
                    return None
            else:
                point = -value / slope
                lo = max(lo, point)
                hi = min(hi, point)
        # '!=' excludes a single instant; the post-delay re-check handles it
        if lo > hi:
            return None
    return lo, hi


def _slope_of(network, state, key):
    comp = compiled(network)
    if key in comp.clocks:
        return 1.0
    total = 0.0
    for auto, by_loc in comp.rate_sources.get(key, ()):
        total += by_loc.get(state.locations[auto], 0.0)
    return total


def _invariant_bound(network, state, auto) -> float:
    comp = compiled(network)
    bound = INF
    for items, const, op in comp.invariant_lin[(auto, state.locations[auto])]:
        value, slope = _lin_value_slope(network, state, items, const)
        if op in ("<=", "<"):
            if value > 0:
                return 0.0
            limit = INF if slope <= 0 else -value / slope
        elif op in (">=", ">"):
            if value < 0:
                return 0.0
            limit = INF if slope >= 0 else -value / slope
        elif op == "==":
            if value != 0:
                return 0.0
            limit = INF if slope == 0 else 0.0
        else:
            if value == 0:
                return 0.0
            limit = INF if slope == 0 else max(0.0, -value / slope)
        bound = min(bound, limit)
    # a tight bound computes as -0.0; normalize so uniform(lo, bound) accepts it
    return 0.0 if bound == 0.0 else bound


def _propose_delay(network, state, rng, config) -> tuple[float | None, float]:
    """One race round: returns (winning delay or None, invariant cap).

    None means no move can enable within the delay every invariant
    tolerates; the caller then runs to the cap (deadlock) or horizon.
    """
    comp = compiled(network)
    locs = state.locations
    slopes: dict[str, float] = {}

    cap = INF
    for auto in comp.order:
        cap = min(cap, _invariant_bound(network, state, auto))

    best: float | None = None
    for auto in comp.order:
        eager_lo = INF
        lo_all = INF
        windows = []
        for ce in comp.out_edges.get((auto, locs[auto]), ()):
            if ce.channel is not None and not ce.is_send:
                continue  # receives are scheduled by their sender
            win = _guard_window(network, state, ce.guard_lin, slopes)
            if win is None:
                continue
            lo, hi = win
            if lo > cap:
                continue
            hi = min(hi, cap)
            if ce.channel is not None:
                # pair with some ready receiver; its guard narrows the window
                paired = None
                for other in comp.order:
                    if other == auto:
                        continue
                    for re_ in comp.recv_edges.get((other, locs[other], ce.channel), ()):
                        rwin = _guard_window(network, state, re_.guard_lin, slopes)
                        if rwin is None:
                            continue
                        plo, phi = max(lo, rwin[0]), min(hi, rwin[1])
                        if plo <= phi and (paired is None or plo < paired[0]):
                            paired = (plo, phi)
                if paired is None:
                    continue
                lo, hi = paired
            if ce.eager:
                eager_lo = min(eager_lo, lo)
            else:
                windows.append((lo, hi))
                lo_all = min(lo_all, lo)
        if eager_lo < INF:
            d = eager_lo
        elif windows:
            if cap < INF:
                d = rng.uniform(lo_all, cap)
            else:
                d = lo_all + rng.exponential(1.0 / config.unbounded_delay_rate)
            if not any(lo <= d <= hi for lo, hi in windows):
                nxt = min((lo for lo, hi in windows if lo > d), default=None)
                if nxt is not None:
                    d = nxt
                else:
                    d = max(hi for lo, hi in windows if hi <= d)
        else:
            continue
        if best is None or d < best:
            best = d
    return best, cap


def sample_delay(network, state, rng, config: SimConfig) -> float:
    """Delay of the next phase from this state.

    0 when an eager move is already enabled; a uniform draw between
    first-enabling and the invariant bound when that bound is finite;
    an exponential draw past first-enabling when nothing bounds the
    delay.  When no move can enable at all, returns the invariant
    bound itself (the run is about to deadlock or coast to horizon).
    """
    d, cap = _propose_delay(network, state, rng, config)
    return cap if d is None else d


def choose_move(moves: list[Move], state: NetworkState, rng) -> Move:
    """Weighted draw among enabled moves.

    A synchronizing move weighs the product of both edge weights.
    Weights are evaluated in the post-delay state; negative values are
    modelling errors, and an all-zero total raises ZeroTotalWeight.
    """
    if len(moves) == 1:
        w = _move_weight(moves[0], state)
        if w <= 0:
            raise ZeroTotalWeight(f"single enabled move has weight {w}")
        return moves[0]
    weights = []
    total = 0.0
    for m in moves:
        w = _move_weight(m, state)
        weights.append(w)
        total += w
    if total <= 0:
        raise ZeroTotalWeight(
            f"all {len(moves)} enabled moves have zero weight at {state.dump()}")
    pick = rng.random() * total
    acc = 0.0
    for m, w in zip(moves, weights):
        acc += w
        if pick < acc:
            return m
    return moves[-1]


def _move_weight(move: Move, state) -> float:
    w = 1.0
    for _, ce in move.parts:
        w *= ce.weight_fn(state)
    if w < 0:
        raise ModelError(f"negative weight {w} for move {move.describe()}")
    return w


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def run_stream(
    network: Network,
    config: SimConfig,
    rng,
    on_event: Callable[[float, str, str, str, NetworkState], None],
) -> tuple[NetworkState, str, int]:
    """Drive one trajectory, reporting each event to ``on_event``.

    Events are the initial state, the endpoint of every positive
    delay, and every jump.  The state passed to the callback is live;
    callbacks must only read it.  Returns (final state, termination
    reason, jump count).
    """
    state = initial_state(network)
    horizon = config.horizon
    steps = 0
    on_event(0.0, "init", "", "", state)
    while True:
        if steps >= config.max_steps:
            return state, STEP_CAP, steps
        remaining = horizon - state.time
        if remaining <= 0:
            return state, HORIZON, steps
        d, cap = _propose_delay(network, state, rng, config)
        if d is None:
            if remaining <= cap:
                _elapse_inplace(network, state, remaining)
                on_event(state.time, "delay", "", _fmt(remaining), state)
                return state, HORIZON, steps
            _elapse_inplace(network, state, cap)
            if cap > 0:
                on_event(state.time, "delay", "", _fmt(cap), state)
            return state, DEADLOCK, steps
        if d >= remaining:
            _elapse_inplace(network, state, remaining)
            on_event(state.time, "delay", "", _fmt(remaining), state)
            return state, HORIZON, steps
        if d > 0:
            _elapse_inplace(network, state, d)
            on_event(state.time, "delay", "", _fmt(d), state)
        moves = enabled_moves(network, state)
        if not moves:
            # sampled onto the open edge of a strict bound; spend a step
            steps += 1
            continue
        move = choose_move(moves, state, rng)
        _apply_inplace(network, state, move, rng)
        who = "+".join(auto for auto, _ in move.parts)
        on_event(state.time, "jump", who, move.describe(), state)
        steps += 1


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def simulate_run(
    network: Network,
    config: SimConfig,
    monitors: tuple[Monitor, ...] = (),
    trial: int = 0,
) -> Trace:
    """Sample one full trajectory and collect it as a Trace."""
    fns = [compile_observer(network, m.expr) for m in monitors]
    events: list[TraceEvent] = []

    def on_event(time, kind, who, detail, state):
        events.append(TraceEvent(
            time, kind, who, detail, tuple(fn(state) for fn in fns)))

    rng = trial_rng(config.seed, trial)
    state, reason, _ = run_stream(network, config, rng, on_event)
    return Trace(events, state, reason,
                 tuple(m.id for m in monitors), trial)


# ---------------------------------------------------------------------------
# Trace export
# ---------------------------------------------------------------------------

def trace_to_csv(trace: Trace, fileobj=None) -> str | None:
    """Write a trace as CSV: time, automaton, location, event, then one
    column per monitor.  For jumps the location column holds the new
    location(s) of the moving automata."""
    out = fileobj or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time", "automaton", "location", "event", *trace.monitor_ids])
    for e in trace.events:
        if e.kind == "jump":
            locs = ",".join(chunk.split(":", 1)[1].split("->")[1]
                            for chunk in e.detail.split(" ") if "->" in chunk)
            row = [_fmt(e.time), e.who, locs, e.detail]
        elif e.kind == "delay":
            row = [_fmt(e.time), "", "", f"delay {e.detail}"]
        else:
            row = [_fmt(e.time), "", "", "init"]
        writer.writerow(row + [_cell(v) for v in e.values])
    if fileobj is None:
        return out.getvalue()
    return None


def _cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def trace_to_json(trace: Trace) -> str:
    doc = {
        "terminated_by": trace.terminated_by,
        "trial": trace.trial,
        "monitors": list(trace.monitor_ids),
        "events": [
            {"time": e.time, "kind": e.kind, "who": e.who,
             "detail": e.detail, "values": list(e.values)}
            for e in trace.events
        ],
        "final": {
            "time": trace.final_state.time,
            "locations": dict(sorted(trace.final_state.locations.items())),
            "valuation": {k: trace.final_state.valuation[k]
                          for k in sorted(trace.final_state.valuation)},
        },
    }
    return json.dumps(doc, indent=2)
