"""Expression language shared by automaton models and verification queries.

Grammar (precedence low to high, parenthesised forms allowed everywhere):

    imply                       right-associative implication
    or   ||
    and  &&
    not  !
    ==  !=  <=  >=  <  >        comparisons
    +  -                        additive
    *  /                        multiplicative
    -x                          unary minus
    Name  Name.Field  Number  true  false  deadlock

``Name.Field`` is resolved later against a network: it denotes either a
location test (``Behavior.InIdle``) or an automaton-local variable
(``Behavior.angle1``).  ``deadlock`` is only meaningful inside the query
form ``A[] not deadlock``.

Expressions are plain immutable trees.  They are compiled to Python
closures once per network (see :func:`compile_expr`); evaluation happens
only through compiled closures, never by walking the tree.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator


class ParseError(ValueError):
    """Raised for malformed expression or query text.

    ``position`` is the character offset into the source string.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NonLinearExpression(ValueError):
    """Raised when a guard or invariant is not linear in its variables."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Field:
    owner: str
    attr: str


@dataclass(frozen=True)
class DeadlockAtom:
    pass


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or 'not'
    operand: Any


@dataclass(frozen=True)
class Binary:
    op: str
    left: Any
    right: Any


TRUE = BoolLit(True)
FALSE = BoolLit(False)

Expr = Any  # union of the node classes above


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>-->|<=|>=|==|!=|&&|\|\||<>|[-+*/<>()\[\];:,.!=])
    """,
    re.VERBOSE,
)

KEYWORDS = {"and", "or", "not", "imply", "true", "false", "deadlock"}


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        tokens.append(Token(m.lastgroup, m.group(), m.start()))
    tokens.append(Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class TokenStream:
    """Cursor over a token list, shared with the query parser."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.index + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        tok = self.tokens[self.index]
        if tok.kind != "end":
            self.index += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            shown = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {shown!r}", tok.pos)
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression tree.  Raises ParseError."""
    stream = TokenStream(text)
    expr = parse_expr(stream)
    tok = stream.peek()
    if tok.kind != "end":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.pos)
    return expr


def parse_expr(s: TokenStream) -> Expr:
    return _parse_imply(s)


def _parse_imply(s: TokenStream) -> Expr:
    left = _parse_or(s)
    if s.peek().text == "imply":
        s.next()
        right = _parse_imply(s)  # right associative
        return Binary("imply", left, right)
    return left


def _parse_or(s: TokenStream) -> Expr:
    left = _parse_and(s)
    while s.peek().text in ("or", "||"):
        s.next()
        left = Binary("or", left, _parse_and(s))
    return left


def _parse_and(s: TokenStream) -> Expr:
    left = _parse_not(s)
    while s.peek().text in ("and", "&&"):
        s.next()
        left = Binary("and", left, _parse_not(s))
    return left


def _parse_not(s: TokenStream) -> Expr:
    if s.peek().text in ("not", "!"):
        s.next()
        return Unary("not", _parse_not(s))
    return _parse_comparison(s)


_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


def _parse_comparison(s: TokenStream) -> Expr:
    left = _parse_additive(s)
    if s.peek().text in _CMP_OPS:
        op = s.next().text
        return Binary(op, left, _parse_additive(s))
    return left


def _parse_additive(s: TokenStream) -> Expr:
    left = _parse_multiplicative(s)
    while s.peek().text in ("+", "-"):
        op = s.next().text
        left = Binary(op, left, _parse_multiplicative(s))
    return left


def _parse_multiplicative(s: TokenStream) -> Expr:
    left = _parse_unary(s)
    while s.peek().text in ("*", "/"):
        op = s.next().text
        left = Binary(op, left, _parse_unary(s))
    return left


def _parse_unary(s: TokenStream) -> Expr:
    if s.peek().text == "-":
        s.next()
        operand = _parse_unary(s)
        if isinstance(operand, Num):
            return Num(-operand.value)
        return Unary("-", operand)
    return _parse_primary(s)


def _parse_primary(s: TokenStream) -> Expr:
    tok = s.next()
    if tok.kind == "num":
        return Num(float(tok.text))
    if tok.kind == "ident":
        if tok.text == "true":
            return TRUE
        if tok.text == "false":
            return FALSE
        if tok.text == "deadlock":
            return DeadlockAtom()
        if tok.text in KEYWORDS:
            raise ParseError(f"unexpected keyword {tok.text!r}", tok.pos)
        if s.at("."):
            s.next()
            attr = s.next()
            if attr.kind != "ident":
                raise ParseError("expected identifier after '.'", attr.pos)
            return Field(tok.text, attr.text)
        return Name(tok.text)
    if tok.text == "(":
        inner = parse_expr(s)
        s.expect(")")
        return inner
    shown = tok.text or "end of input"
    raise ParseError(f"expected an expression, found {shown!r}", tok.pos)


# ---------------------------------------------------------------------------
# Compilation to closures
# ---------------------------------------------------------------------------

_ARITH = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
    "==": operator.eq,
    "!=": operator.ne,
    "<=": operator.le,
    ">=": operator.ge,
    "<": operator.lt,
    ">": operator.gt,
}

LeafCompiler = Callable[[Expr], Callable[[Any], Any]]


def compile_expr(expr: Expr, leaf: LeafCompiler) -> Callable[[Any], Any]:
    """Compile a tree to a closure over an evaluation context.

    ``leaf`` supplies closures for Name/Field/DeadlockAtom nodes; it is
    where scope resolution lives, so unknown identifiers surface during
    compilation rather than at evaluation time.
    """
    if isinstance(expr, Num):
        v = expr.value
        return lambda state: v
    if isinstance(expr, BoolLit):
        v = expr.value
        return lambda state: v
    if isinstance(expr, (Name, Field, DeadlockAtom)):
        return leaf(expr)
    if isinstance(expr, Unary):
        f = compile_expr(expr.operand, leaf)
        if expr.op == "-":
            return lambda state: -f(state)
        return lambda state: not f(state)
    if isinstance(expr, Binary):
        lf = compile_expr(expr.left, leaf)
        rf = compile_expr(expr.right, leaf)
        op = expr.op
        if op == "and":
            return lambda state: lf(state) and rf(state)
        if op == "or":
            return lambda state: lf(state) or rf(state)
        if op == "imply":
            return lambda state: (not lf(state)) or rf(state)
        fn = _ARITH[op]
        return lambda state: fn(lf(state), rf(state))
    raise TypeError(f"cannot compile {expr!r}")


def iter_leaves(expr: Expr) -> Iterator[Expr]:
    """Yield every Name/Field/DeadlockAtom leaf of a tree."""
    if isinstance(expr, (Name, Field, DeadlockAtom)):
        yield expr
    elif isinstance(expr, Unary):
        yield from iter_leaves(expr.operand)
    elif isinstance(expr, Binary):
        yield from iter_leaves(expr.left)
        yield from iter_leaves(expr.right)


def conjuncts(expr: Expr | None) -> list[Expr]:
    """Flatten an and-tree into its conjuncts; trivially-true guards give []."""
    if expr is None or expr == TRUE:
        return []
    if isinstance(expr, Binary) and expr.op == "and":
        return conjuncts(expr.left) + conjuncts(expr.right)
    return [expr]


def linear_form(
    cmp: Expr, key_of: Callable[[Expr], str]
) -> tuple[tuple[tuple[str, float], ...], float, str]:
    """Decompose a comparison into ``sum(coef*var) + const  OP  0``.

    ``key_of`` maps Name/Field leaves to flat valuation keys.  Raises
    NonLinearExpression for anything outside the linear fragment, which
    is the shape required of guards and invariants (timed enabling
    windows are computed exactly from this form).
    """
    if not (isinstance(cmp, Binary) and cmp.op in _CMP_OPS):
        raise NonLinearExpression(f"not a comparison: {cmp!r}")

    def lin(e: Expr) -> tuple[dict[str, float], float]:
        if isinstance(e, Num):
            return {}, e.value
        if isinstance(e, (Name, Field)):
            return {key_of(e): 1.0}, 0.0
        if isinstance(e, Unary) and e.op == "-":
            terms, const = lin(e.operand)
            return {k: -c for k, c in terms.items()}, -const
        if isinstance(e, Binary) and e.op in ("+", "-"):
            lt, lc = lin(e.left)
            rt, rc = lin(e.right)
            sign = 1.0 if e.op == "+" else -1.0
            for k, c in rt.items():
                lt[k] = lt.get(k, 0.0) + sign * c
            return lt, lc + sign * rc
        if isinstance(e, Binary) and e.op == "*":
            lt, lc = lin(e.left)
            rt, rc = lin(e.right)
            if lt and rt:
                raise NonLinearExpression(f"product of variables in {e!r}")
            if lt:
                return {k: c * rc for k, c in lt.items()}, lc * rc
            return {k: c * lc for k, c in rt.items()}, lc * rc
        if isinstance(e, Binary) and e.op == "/":
            rt, rc = lin(e.right)
            if rt or rc == 0:
                raise NonLinearExpression(f"non-constant divisor in {e!r}")
            lt, lc = lin(e.left)
            return {k: c / rc for k, c in lt.items()}, lc / rc
        raise NonLinearExpression(f"non-linear term {e!r}")

    lt, lc = lin(cmp.left)
    rt, rc = lin(cmp.right)
    for k, c in rt.items():
        lt[k] = lt.get(k, 0.0) - c
    items = tuple((k, c) for k, c in lt.items() if c != 0.0)
    return items, lc - rc, cmp.op


def unparse(expr: Expr) -> str:
    """Render a tree back to source text (fully parenthesised)."""
    if isinstance(expr, Num):
        v = expr.value
        return str(int(v)) if v == int(v) else repr(v)
    if isinstance(expr, BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, Name):
        return expr.ident
    if isinstance(expr, Field):
        return f"{expr.owner}.{expr.attr}"
    if isinstance(expr, DeadlockAtom):
        return "deadlock"
    if isinstance(expr, Unary):
        inner = unparse(expr.operand)
        return f"-{inner}" if expr.op == "-" else f"not ({inner})"
    if isinstance(expr, Binary):
        return f"({unparse(expr.left)} {expr.op} {unparse(expr.right)})"
    raise TypeError(f"cannot unparse {expr!r}")
