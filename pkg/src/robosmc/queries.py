"""Verification query language.

Six statistical query forms over network runs:

    E[<=T; N] (max: EXPR)        expected maximum of EXPR over N runs
    E[<=T; N] (min: EXPR)        expected minimum
    Pr[t<=T](<> PRED)            probability the predicate ever holds
    A[] PRED                     PRED holds at every observed state
    E<> PRED                     some run reaches a PRED state
    PRED --> PRED                every antecedent state is followed by
                                 a consequent state within the run
    A[] not deadlock             no run deadlocks

Predicates use the shared expression grammar: comparisons, ``and`` /
``or`` / ``not`` / ``imply``, automaton-qualified location tests such
as ``Behavior.InIdle`` and qualified local variables such as
``Behavior.angle1``.  Identifier resolution happens against a concrete
network when a query is evaluated; parsing only needs the text.

Query files are plain UTF-8, one query per line, ``#`` starts a
comment, blank lines are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

from .expressions import (
    DeadlockAtom,
    ParseError,
    TokenStream,
    Unary,
    iter_leaves,
    parse_expr,
)


@dataclass(frozen=True)
class ExpectedValue:
    horizon: float
    runs: int
    objective: str  # 'max' | 'min'
    expr: Any
    source: str


@dataclass(frozen=True)
class Probability:
    horizon: float
    pred: Any
    source: str


@dataclass(frozen=True)
class Always:
    pred: Any
    source: str


@dataclass(frozen=True)
class Exists:
    pred: Any
    source: str


@dataclass(frozen=True)
class LeadsTo:
    antecedent: Any
    consequent: Any
    source: str


@dataclass(frozen=True)
class NoDeadlock:
    source: str


Query = Union[ExpectedValue, Probability, Always, Exists, LeadsTo, NoDeadlock]


def parse_query(text: str) -> Query:
    """Parse one query; raises ParseError with a character position."""
    s = TokenStream(text)
    head = s.peek()

    if head.text == "E" and s.peek(1).text == "[":
        query = _parse_expected(s, text)
    elif head.text == "E" and s.peek(1).text == "<>":
        s.next(), s.next()
        query = Exists(_parse_pred(s), text)
    elif head.text == "Pr" and s.peek(1).text == "[":
        query = _parse_probability(s, text)
    elif head.text == "A" and s.peek(1).text == "[":
        s.next(), s.expect("["), s.expect("]")
        pred = _parse_pred(s, allow_deadlock=True)
        if pred == Unary("not", DeadlockAtom()):
            query = NoDeadlock(text)
        else:
            _reject_deadlock(pred, text)
            query = Always(pred, text)
    else:
        left = _parse_pred(s)
        tok = s.peek()
        if tok.text != "-->":
            raise ParseError("expected a query form (E[..], E<>, Pr[..], A[], or 'P --> Q')",
                             tok.pos)
        s.next()
        query = LeadsTo(left, _parse_pred(s), text)

    tail = s.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.pos)
    return query


def _parse_pred(s: TokenStream, allow_deadlock: bool = False):
    pred = parse_expr(s)
    if not allow_deadlock:
        _reject_deadlock(pred, s.text)
    return pred


def _reject_deadlock(pred, text: str):
    for leaf in iter_leaves(pred):
        if isinstance(leaf, DeadlockAtom):
            raise ParseError("'deadlock' is only supported as 'A[] not deadlock'",
                             max(text.find("deadlock"), 0))


def _parse_expected(s: TokenStream, text: str) -> ExpectedValue:
    s.next()  # E
    s.expect("[")
    s.expect("<=")
    horizon = _number(s)
    s.expect(";")
    runs = _number(s)
    if runs != int(runs) or runs < 1:
        raise ParseError(f"run count must be a positive integer, got {runs}",
                         s.peek().pos)
    s.expect("]")
    s.expect("(")
    tok = s.next()
    if tok.text not in ("max", "min"):
        raise ParseError(f"expected 'max' or 'min', found {tok.text!r}", tok.pos)
    objective = tok.text
    s.expect(":")
    expr = _parse_pred(s)
    s.expect(")")
    return ExpectedValue(horizon, int(runs), objective, expr, text)


def _parse_probability(s: TokenStream, text: str) -> Probability:
    s.next()  # Pr
    s.expect("[")
    if s.peek().text == "t":
        s.next()
    s.expect("<=")
    horizon = _number(s)
    s.expect("]")
    s.expect("(")
    s.expect("<>")
    pred = _parse_pred(s)
    s.expect(")")
    return Probability(horizon, pred, text)


def _number(s: TokenStream) -> float:
    tok = s.next()
    if tok.kind != "num":
        shown = tok.text or "end of input"
        raise ParseError(f"expected a number, found {shown!r}", tok.pos)
    return float(tok.text)


def load_queries(text: str) -> list[tuple[int, Query]]:
    """Parse a query file; returns (line number, query) pairs."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append((lineno, parse_query(line)))
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc.args[0]}", exc.position) from None
    return out
