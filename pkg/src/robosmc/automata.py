"""Stochastic hybrid automata networks with constant-rate dynamics.

A network is a set of automata composed over binary synchronization
channels plus a pool of shared variables.  Each automaton occupies one
location at a time; locations carry an invariant (a conjunction of
linear comparisons) and constant rates for real-valued variables, so
continuous evolution is integrated in closed form and never needs a
numeric solver.  Edges carry a guard, an optional ``chan!``/``chan?``
sync label, a non-negative weight expression and an ordered update
list.

Semantics fixed here and relied on by the engine:

* A jump never advances time; a delay never changes locations.
* On a synchronizing move the sender's updates run before the
  receiver's, and each update list runs left to right, later updates
  seeing earlier ones.
* Guards and invariants must be conjunctions of comparisons that are
  linear in the variables.  Because rates are constant, every guard or
  invariant is then linear in elapsed time, which makes enabling
  windows and maximum delays exact.
* Variables are either ``int`` (constant under delay), ``real``
  (accrues each location's rate, summed over automata that declare
  one) or ``clock`` (rate 1 everywhere, resettable by updates).

Validation resolves every identifier, compiles every expression to a
closure, and reports *all* problems at once via NetworkValidationError.
Inside an automaton a bare name resolves to its own local variable
first, then to a network global; ``Other.var`` reads another
automaton's local.  Location tests are reserved for queries and
monitors and are rejected inside model expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .expressions import (
    Expr,
    Field,
    DeadlockAtom,
    Name,
    NonLinearExpression,
    Num,
    TokenStream,
    compile_expr,
    conjuncts,
    linear_form,
    parse_expr,
    parse_expression,
)

INF = math.inf


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class ModelError(Exception):
    """Base class for modelling and simulation errors."""


@dataclass(frozen=True)
class ValidationIssue:
    kind: str  # e.g. "UnpairedChannel", "UnknownVariable", "DuplicateId"
    where: str
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.where}: {self.message}"


class NetworkValidationError(ModelError):
    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        lines = "\n".join(f"  {i}" for i in issues)
        super().__init__(f"network validation failed:\n{lines}")


class TargetInvariantViolated(ModelError):
    """A jump landed in a location whose invariant the new state breaks."""


class InvariantViolatedDuringDelay(ModelError):
    """A delay was asked to run past a location invariant."""


class ZeroTotalWeight(ModelError):
    """All enabled moves have weight zero; the model is underspecified."""


class UnknownIdentifier(ModelError):
    """A query or monitor references something the network does not define."""


# ---------------------------------------------------------------------------
# Declarative model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = "real"  # 'int' | 'real' | 'clock'
    initial: float = 0.0

    def __post_init__(self):
        if self.kind not in ("int", "real", "clock"):
            raise ValueError(f"bad variable kind {self.kind!r}")


@dataclass(frozen=True)
class Location:
    name: str
    invariant: Any = None  # Expr | str | None
    rates: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Assignment:
    target: str  # 'var' or 'Automaton.var'
    value: Any  # Expr | str | number


@dataclass(frozen=True)
class FunctionUpdate:
    """Opaque update for logic that plain assignments cannot express.

    ``fn(state, rng)`` mutates valuation entries and ``state.aux``
    in place.  ``reads``/``writes`` list the variables touched so
    validation can still resolve them; the callable must restrict
    itself to those plus aux.  Use module-level functions or partials
    so networks stay picklable.
    """

    fn: Callable
    reads: tuple[str, ...] = ()
    writes: tuple[str, ...] = ()


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: Any = None  # Expr | str | None
    sync: str | None = None  # 'chan!' or 'chan?'
    weight: Any = None  # Expr | str | number | None (defaults to 1)
    updates: tuple = ()  # Assignment | FunctionUpdate | 'var = expr' strings
    eager: bool = False  # fire as soon as enabled instead of sampling


@dataclass(frozen=True)
class HybridAutomaton:
    name: str
    initial: str
    locations: tuple[Location, ...]
    edges: tuple[Edge, ...]
    variables: tuple[Variable, ...] = ()


@dataclass
class Network:
    automata: tuple[HybridAutomaton, ...]
    channels: tuple[str, ...] = ()
    variables: tuple[Variable, ...] = ()  # network globals
    aux_factories: dict[str, Callable] = field(default_factory=dict)
    _compiled: Any = field(default=None, repr=False, compare=False)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_compiled"] = None  # closures are rebuilt after unpickling
        return state


class NetworkState:
    """Mutable snapshot: one location per automaton, a flat valuation
    keyed by 'var' / 'Automaton.var', model time, and opaque aux
    objects (treated as immutable values and replaced, never edited)."""

    __slots__ = ("locations", "valuation", "time", "aux")

    def __init__(self, locations, valuation, time=0.0, aux=None):
        self.locations = locations
        self.valuation = valuation
        self.time = time
        self.aux = aux if aux is not None else {}

    def clone(self) -> "NetworkState":
        return NetworkState(
            dict(self.locations), dict(self.valuation), self.time, dict(self.aux)
        )

    def dump(self) -> str:
        locs = ", ".join(f"{a}={l}" for a, l in sorted(self.locations.items()))
        vals = ", ".join(f"{k}={v}" for k, v in sorted(self.valuation.items()))
        return f"t={self.time} | {locs} | {vals}"

    def __repr__(self):
        return f"NetworkState({self.dump()})"


@dataclass(frozen=True)
class Move:
    """One executable step: a single internal edge, or a sender edge
    paired with a receiver edge (sender listed first)."""

    parts: tuple  # ((automaton_name, CompiledEdge), ...)
    channel: str | None = None

    def describe(self) -> str:
        bits = []
        for auto, edge in self.parts:
            bits.append(f"{auto}:{edge.desc}")
        return " ".join(bits)


# ---------------------------------------------------------------------------
# Compiled form
# ---------------------------------------------------------------------------

class CompiledEdge:
    __slots__ = (
        "automaton", "source", "target", "guard_fn", "guard_lin",
        "weight_fn", "updates", "channel", "is_send", "eager", "desc",
    )

    def __init__(self, automaton, source, target):
        self.automaton = automaton
        self.source = source
        self.target = target
        self.guard_fn = None
        self.guard_lin = ()
        self.weight_fn = None
        self.updates = ()
        self.channel = None
        self.is_send = False
        self.eager = False
        self.desc = f"{source}->{target}"


class CompiledNetwork:
    """Per-network lookup tables and closures built by validate_network."""

    def __init__(self):
        self.order: tuple[str, ...] = ()
        self.initial_locations: dict[str, str] = {}
        self.initial_valuation: dict[str, float] = {}
        self.out_edges: dict[tuple[str, str], tuple[CompiledEdge, ...]] = {}
        self.recv_edges: dict[tuple[str, str, str], tuple[CompiledEdge, ...]] = {}
        self.invariant_fn: dict[tuple[str, str], Callable | None] = {}
        self.invariant_lin: dict[tuple[str, str], tuple] = {}
        self.rate_items: dict[tuple[str, str], tuple] = {}
        self.rate_sources: dict[str, tuple] = {}  # key -> ((auto, {loc: rate}), ...)
        self.clocks: frozenset[str] = frozenset()
        self.var_kind: dict[str, str] = {}
        self.location_names: dict[str, frozenset[str]] = {}
        self.local_keys: dict[str, dict[str, str]] = {}


def _as_expr(value) -> Expr:
    if isinstance(value, str):
        return parse_expression(value)
    if isinstance(value, (int, float)):
        return Num(float(value))
    return value


def parse_assignment(text: str) -> Assignment:
    """Parse ``target = expr`` update strings."""
    stream = TokenStream(text)
    tok = stream.next()
    if tok.kind != "ident":
        raise ValueError(f"bad assignment target in {text!r}")
    target = tok.text
    if stream.accept("."):
        attr = stream.next()
        if attr.kind != "ident":
            raise ValueError(f"bad assignment target in {text!r}")
        target = f"{target}.{attr.text}"
    stream.expect("=")
    value = parse_expr(stream)
    if stream.peek().kind != "end":
        raise ValueError(f"trailing input in assignment {text!r}")
    return Assignment(target, value)


# ---------------------------------------------------------------------------
# Validation and compilation
# ---------------------------------------------------------------------------

def validate_network(network: Network) -> Network:
    """Resolve names, compile expressions and attach lookup tables.

    Returns the same network with its compiled form attached, or
    raises NetworkValidationError carrying every issue found:
    duplicate identifiers, unknown variables/locations/channels,
    one-sided channels, constant negative weights, non-linear or
    non-conjunctive guards and invariants, and rates on non-real
    variables.
    """
    issues: list[ValidationIssue] = []
    comp = CompiledNetwork()

    names_seen: set[str] = set()
    for auto in network.automata:
        if auto.name in names_seen:
            issues.append(ValidationIssue(
                "DuplicateId", auto.name, "duplicate automaton name"))
        names_seen.add(auto.name)
    comp.order = tuple(a.name for a in network.automata)

    global_keys: dict[str, Variable] = {}
    for var in network.variables:
        if var.name in global_keys:
            issues.append(ValidationIssue(
                "DuplicateId", var.name, "duplicate global variable"))
        global_keys[var.name] = var

    autos = {a.name: a for a in network.automata}
    for auto in network.automata:
        locals_here: dict[str, str] = {}
        loc_names = set()
        for loc in auto.locations:
            if loc.name in loc_names:
                issues.append(ValidationIssue(
                    "DuplicateId", f"{auto.name}.{loc.name}", "duplicate location"))
            loc_names.add(loc.name)
        for var in auto.variables:
            if var.name in locals_here:
                issues.append(ValidationIssue(
                    "DuplicateId", f"{auto.name}.{var.name}", "duplicate local variable"))
            if var.name in loc_names:
                issues.append(ValidationIssue(
                    "DuplicateId", f"{auto.name}.{var.name}",
                    "variable name collides with a location name"))
            locals_here[var.name] = f"{auto.name}.{var.name}"
        comp.local_keys[auto.name] = locals_here
        comp.location_names[auto.name] = frozenset(loc_names)
        if auto.initial not in loc_names:
            issues.append(ValidationIssue(
                "UnknownLocation", auto.name, f"initial location {auto.initial!r}"))

    for var in network.variables:
        comp.var_kind[var.name] = var.kind
        comp.initial_valuation[var.name] = (
            int(var.initial) if var.kind == "int" else float(var.initial))
    for auto in network.automata:
        for var in auto.variables:
            key = f"{auto.name}.{var.name}"
            comp.var_kind[key] = var.kind
            comp.initial_valuation[key] = (
                int(var.initial) if var.kind == "int" else float(var.initial))
    comp.clocks = frozenset(k for k, kind in comp.var_kind.items() if kind == "clock")

    def resolve_var(node, auto_name: str, where: str) -> str | None:
        """Map a Name/Field leaf to a valuation key, or record an issue."""
        if isinstance(node, Name):
            local = comp.local_keys.get(auto_name, {}).get(node.ident)
            if local:
                return local
            if node.ident in global_keys:
                return node.ident
            issues.append(ValidationIssue(
                "UnknownVariable", where, f"unknown variable {node.ident!r}"))
            return None
        if isinstance(node, Field):
            if node.owner in autos:
                if node.attr in comp.location_names.get(node.owner, frozenset()):
                    issues.append(ValidationIssue(
                        "BadExpression", where,
                        "location tests are only allowed in queries and monitors"))
                    return None
                key = comp.local_keys.get(node.owner, {}).get(node.attr)
                if key:
                    return key
            issues.append(ValidationIssue(
                "UnknownVariable", where, f"unknown variable {node.owner}.{node.attr}"))
            return None
        issues.append(ValidationIssue(
            "BadExpression", where, "deadlock is only allowed in 'A[] not deadlock'"))
        return None

    def compile_in_scope(expr: Expr, auto_name: str, where: str):
        def leaf(node):
            key = resolve_var(node, auto_name, where)
            if key is None:
                return lambda state: 0.0
            return lambda state: state.valuation[key]
        return compile_expr(expr, leaf)

    def compile_condition(raw, auto_name: str, where: str):
        """Compile a guard/invariant into (check_fn|None, linear conjuncts)."""
        if raw is None:
            return None, ()
        expr = _as_expr(raw)
        parts = conjuncts(expr)
        if not parts:
            return None, ()
        lin = []
        key_of = lambda node: resolve_var(node, auto_name, where) or "?"
        for part in parts:
            try:
                lin.append(linear_form(part, key_of))
            except NonLinearExpression as exc:
                issues.append(ValidationIssue("NonLinearGuard", where, str(exc)))
                return None, ()
        check = compile_in_scope(expr, auto_name, where)
        return check, tuple(lin)

    rate_sources: dict[str, dict[str, dict[str, float]]] = {}

    for auto in network.automata:
        for loc in auto.locations:
            where = f"{auto.name}.{loc.name}"
            key = (auto.name, loc.name)
            check, lin = compile_condition(loc.invariant, auto.name, where)
            comp.invariant_fn[key] = check
            comp.invariant_lin[key] = lin
            items = []
            for var_name, rate in loc.rates.items():
                vkey = resolve_var(Name(var_name), auto.name, where)
                if vkey is None:
                    continue
                if comp.var_kind[vkey] != "real":
                    issues.append(ValidationIssue(
                        "BadRate", where,
                        f"rate on {comp.var_kind[vkey]} variable {var_name!r}"))
                    continue
                items.append((vkey, float(rate)))
                rate_sources.setdefault(vkey, {}).setdefault(
                    auto.name, {})[loc.name] = float(rate)
            comp.rate_items[key] = tuple(items)

        send_channels = set()
        for idx, edge in enumerate(auto.edges):
            where = f"{auto.name}:{edge.source}->{edge.target}"
            ce = CompiledEdge(auto.name, edge.source, edge.target)
            ce.eager = edge.eager
            if edge.source not in comp.location_names[auto.name]:
                issues.append(ValidationIssue(
                    "UnknownLocation", where, f"source {edge.source!r}"))
                continue
            if edge.target not in comp.location_names[auto.name]:
                issues.append(ValidationIssue(
                    "UnknownLocation", where, f"target {edge.target!r}"))
                continue

            ce.guard_fn, ce.guard_lin = compile_condition(edge.guard, auto.name, where)

            weight = edge.weight if edge.weight is not None else 1
            wexpr = _as_expr(weight)
            if isinstance(wexpr, Num) and wexpr.value < 0:
                issues.append(ValidationIssue(
                    "NegativeConstantWeight", where, f"weight {wexpr.value}"))
            ce.weight_fn = compile_in_scope(wexpr, auto.name, where)

            compiled_updates = []
            for upd in edge.updates:
                if isinstance(upd, str):
                    upd = parse_assignment(upd)
                if isinstance(upd, Assignment):
                    tnode = (Field(*upd.target.split(".", 1))
                             if "." in upd.target else Name(upd.target))
                    tkey = resolve_var(tnode, auto.name, where)
                    vfn = compile_in_scope(_as_expr(upd.value), auto.name, where)
                    if tkey is not None:
                        is_int = comp.var_kind[tkey] == "int"
                        compiled_updates.append(("assign", tkey, vfn, is_int))
                else:
                    for name in (*upd.reads, *upd.writes):
                        resolve_var(
                            Name(name) if "." not in name else Field(*name.split(".", 1)),
                            auto.name, where)
                    compiled_updates.append(("call", upd.fn))
            ce.updates = tuple(compiled_updates)

            if edge.sync is not None:
                if not edge.sync or edge.sync[-1] not in "!?":
                    issues.append(ValidationIssue(
                        "UnknownChannel", where, f"bad sync label {edge.sync!r}"))
                else:
                    chan, dir_ = edge.sync[:-1], edge.sync[-1]
                    if chan not in network.channels:
                        issues.append(ValidationIssue(
                            "UnknownChannel", where, f"undeclared channel {chan!r}"))
                    ce.channel = chan
                    ce.is_send = dir_ == "!"
                    ce.desc = f"{edge.source}->{edge.target} {chan}{dir_}"
                    if ce.is_send:
                        send_channels.add(chan)

            okey = (auto.name, edge.source)
            comp.out_edges[okey] = comp.out_edges.get(okey, ()) + (ce,)
            if ce.channel and not ce.is_send:
                rkey = (auto.name, edge.source, ce.channel)
                comp.recv_edges[rkey] = comp.recv_edges.get(rkey, ()) + (ce,)

    # channel pairing: every declared channel needs both sides, and every
    # send edge needs a potential partner in a different automaton
    senders: dict[str, set[str]] = {c: set() for c in network.channels}
    receivers: dict[str, set[str]] = {c: set() for c in network.channels}
    for (auto_name, _), edges in comp.out_edges.items():
        for ce in edges:
            if ce.channel:
                (senders if ce.is_send else receivers).setdefault(
                    ce.channel, set()).add(auto_name)
    for chan in network.channels:
        if not senders.get(chan):
            issues.append(ValidationIssue(
                "UnpairedChannel", chan, "channel has no send edge"))
        if not receivers.get(chan):
            issues.append(ValidationIssue(
                "UnpairedChannel", chan, "channel has no receive edge"))
        else:
            for s in senders.get(chan, ()):
                if not (receivers[chan] - {s}):
                    issues.append(ValidationIssue(
                        "UnpairedChannel", chan,
                        f"sends from {s} have no partner in another automaton"))

    for auto in network.automata:
        comp.initial_locations[auto.name] = auto.initial

    comp.rate_sources = {
        key: tuple((a, dict(locs)) for a, locs in by_auto.items())
        for key, by_auto in rate_sources.items()
    }

    if issues:
        raise NetworkValidationError(issues)
    network._compiled = comp
    return network


def compiled(network: Network) -> CompiledNetwork:
    if network._compiled is None:
        validate_network(network)
    return network._compiled


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def initial_state(network: Network) -> NetworkState:
    comp = compiled(network)
    aux = {name: factory() for name, factory in network.aux_factories.items()}
    return NetworkState(
        dict(comp.initial_locations), dict(comp.initial_valuation), 0.0, aux)


def var_slope(network: Network, state: NetworkState, key: str) -> float:
    """Time derivative of a variable in the current location vector."""
    comp = compiled(network)
    if key in comp.clocks:
        return 1.0
    total = 0.0
    for auto, by_loc in comp.rate_sources.get(key, ()):
        total += by_loc.get(state.locations[auto], 0.0)
    return total


def _lin_value_slope(network, state, items, const):
    value = const
    slope = 0.0
    val = state.valuation
    for key, coef in items:
        value += coef * val[key]
        slope += coef * var_slope(network, state, key)
    return value, slope


def max_delay(network: Network, state: NetworkState) -> float:
    """Largest dt every location invariant tolerates (inf if none binds).

    Exact for the linear fragment: each conjunct's value drifts at a
    constant slope, so the bound is a ratio.  A state already outside
    an invariant gives 0.
    """
    comp = compiled(network)
    bound = INF
    for auto, loc in state.locations.items():
        for items, const, op in comp.invariant_lin[(auto, loc)]:
            value, slope = _lin_value_slope(network, state, items, const)
            # conjunct reads: value + slope*dt  OP  0
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
            else:  # '!='
                if value == 0:
                    return 0.0
                limit = INF if slope == 0 else max(0.0, -value / slope)
            if limit < bound:
                bound = limit
    return bound


def elapse(network: Network, state: NetworkState, dt: float) -> NetworkState:
    """Advance time by dt: clocks by dt, rated variables by rate*dt.

    Locations are untouched.  Raises InvariantViolatedDuringDelay if
    the end of the delay breaks an invariant (linearity makes the
    endpoint check sufficient when the invariant held at the start).
    """
    if dt < 0:
        raise ValueError(f"negative delay {dt}")
    new = state.clone()
    _elapse_inplace(network, new, dt)
    comp = compiled(network)
    for auto, loc in new.locations.items():
        check = comp.invariant_fn[(auto, loc)]
        if check is not None and not check(new):
            raise InvariantViolatedDuringDelay(
                f"delay of {dt} leaves the invariant of {auto}.{loc}: {new.dump()}")
    return new


def _elapse_inplace(network: Network, state: NetworkState, dt: float) -> None:
    if dt == 0:
        return
    comp = compiled(network)
    val = state.valuation
    for key in comp.clocks:
        val[key] += dt
    for auto, loc in state.locations.items():
        for key, rate in comp.rate_items[(auto, loc)]:
            val[key] += rate * dt
    state.time += dt


def enabled_moves(network: Network, state: NetworkState) -> list[Move]:
    """All moves whose guards hold right now.

    Internal edges stand alone; send edges are paired with every
    enabled receive edge on the same channel in other automata.  An
    unpaired send contributes nothing.
    """
    comp = compiled(network)
    moves: list[Move] = []
    locs = state.locations
    for auto in comp.order:
        for ce in comp.out_edges.get((auto, locs[auto]), ()):
            if ce.guard_fn is not None and not ce.guard_fn(state):
                continue
            if ce.channel is None:
                moves.append(Move(((auto, ce),)))
            elif ce.is_send:
                for other in comp.order:
                    if other == auto:
                        continue
                    for re in comp.recv_edges.get((other, locs[other], ce.channel), ()):
                        if re.guard_fn is None or re.guard_fn(state):
                            moves.append(Move(((auto, ce), (other, re)), ce.channel))
    return moves


def apply_move(network: Network, state: NetworkState, move: Move, rng=None) -> NetworkState:
    """Execute a move: run updates part by part (sender before
    receiver), switch locations, keep time.  Raises
    TargetInvariantViolated if a target invariant fails afterwards."""
    new = state.clone()
    _apply_inplace(network, new, move, rng)
    comp = compiled(network)
    for auto, ce in move.parts:
        check = comp.invariant_fn[(auto, ce.target)]
        if check is not None and not check(new):
            raise TargetInvariantViolated(
                f"move {move.describe()} lands outside the invariant of "
                f"{auto}.{ce.target}: {new.dump()}")
    return new


def _apply_inplace(network: Network, state: NetworkState, move: Move, rng) -> None:
    val = state.valuation
    for auto, ce in move.parts:
        for item in ce.updates:
            if item[0] == "assign":
                _, key, vfn, is_int = item
                v = vfn(state)
                val[key] = int(v) if is_int else v
            else:
                item[1](state, rng)
        state.locations[auto] = ce.target


# ---------------------------------------------------------------------------
# Network-scope expressions (queries and monitors)
# ---------------------------------------------------------------------------

def compile_observer(network: Network, expr_or_text) -> Callable[[NetworkState], Any]:
    """Compile a query/monitor expression against a network.

    At network scope a bare name is a global variable and
    ``Automaton.x`` is either a location test (if ``x`` names one of
    that automaton's locations) or that automaton's local variable.
    Unresolvable identifiers raise UnknownIdentifier here, before any
    simulation starts.  The resulting closure is read-only: it must
    never mutate the state it observes.
    """
    comp = compiled(network)
    expr = parse_expression(expr_or_text) if isinstance(expr_or_text, str) else expr_or_text

    def leaf(node):
        if isinstance(node, Name):
            if node.ident in comp.var_kind and "." not in node.ident:
                key = node.ident
                return lambda state: state.valuation[key]
            raise UnknownIdentifier(
                f"unknown identifier {node.ident!r} (automaton-local variables "
                f"need qualification, e.g. Robot.{node.ident})")
        if isinstance(node, Field):
            owner, attr = node.owner, node.attr
            if owner in comp.location_names:
                if attr in comp.location_names[owner]:
                    return lambda state: state.locations[owner] == attr
                key = f"{owner}.{attr}"
                if key in comp.var_kind:
                    return lambda state: state.valuation[key]
            raise UnknownIdentifier(f"unknown identifier {owner}.{attr}")
        raise UnknownIdentifier("'deadlock' is only allowed in 'A[] not deadlock'")

    return compile_expr(expr, leaf)
