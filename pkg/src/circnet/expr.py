"""Tiny arithmetic language for time-dependent network entries.

Grammar (whitespace-insensitive, keywords case-sensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := NUMBER | 't' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'sin' | 'cos' | 'abs'

There is deliberately no division and no exponentiation operator, so
every expression evaluates to a finite value at every real ``t``.
Numeric literals are nonnegative decimals, optionally with a fraction
part and a base-10 exponent (``1.3``, ``0.5``, ``2e-3``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class ExpressionError(ValueError):
    """Base class for expression-language errors."""


class ExpressionSyntaxError(ExpressionError):
    """Input does not match the grammar.

    :attr offset: character offset of the offending token.
    :attr expected: tuple of token descriptions that would have been legal.
    """

    def __init__(self, offset: int, expected: tuple[str, ...], found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(
            f"syntax error at offset {offset}: expected "
            f"{' or '.join(expected)}, found {found}"
        )


class UnknownFunctionError(ExpressionError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function {name!r} at offset {offset}")


# AST nodes.  All immutable; TimeExpression is the union of the five.


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class TimeVar:
    pass


@dataclass(frozen=True)
class PiConst:
    pass


@dataclass(frozen=True)
class Call:
    func: str  # 'sin' | 'cos' | 'abs'
    arg: "TimeExpression"


@dataclass(frozen=True)
class BinOp:
    op: str  # '+' | '-' | '*'
    left: "TimeExpression"
    right: "TimeExpression"


TimeExpression = Number | TimeVar | PiConst | Call | BinOp

_FUNCTIONS = ("sin", "cos", "abs")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    """Return (kind, text, offset) triples, terminated by an 'end' token."""
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            # only whitespace may remain, otherwise it is a bad character
            rest = src[pos:]
            if rest.strip() == "":
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ExpressionSyntaxError(
                bad, ("number", "name", "operator"), repr(src[bad])
            )
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append((m.group("op"), m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, label: str) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            self.fail((label,))
        return self.advance()

    def fail(self, expected: tuple[str, ...]) -> None:
        kind, text, offset = self.peek()
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(offset, expected, found)

    def parse(self) -> TimeExpression:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(("'+'", "'-'", "'*'", "end of input"))
        return node

    def expr(self) -> TimeExpression:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> TimeExpression:
        node = self.factor()
        while self.peek()[0] == "*":
            self.advance()
            node = BinOp("*", node, self.factor())
        return node

    def factor(self) -> TimeExpression:
        kind, text, offset = self.peek()
        if kind == "num":
            self.advance()
            return Number(float(text))
        if kind == "name":
            self.advance()
            if text == "t":
                return TimeVar()
            if text == "pi":
                return PiConst()
            if self.peek()[0] == "(":
                if text not in _FUNCTIONS:
                    raise UnknownFunctionError(text, offset)
                self.advance()
                arg = self.expr()
                self.expect(")", "')'")
                return Call(text, arg)
            if text in _FUNCTIONS:
                self.fail(("'('",))
            raise UnknownFunctionError(text, offset)
        if kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")", "')'")
            return node
        self.fail(("number", "'t'", "'pi'", "function name", "'('"))
        raise AssertionError("unreachable")


def parse_expression(src: str) -> TimeExpression:
    """Parse ``src`` into an AST, or raise :class:`ExpressionSyntaxError` /
    :class:`UnknownFunctionError` carrying the character offset."""
    return _Parser(src).parse()


def evaluate(node: TimeExpression, t: float) -> float:
    """Evaluate an expression at time ``t``.  Total: never raises for real t."""
    if isinstance(node, Number):
        return node.value
    if isinstance(node, TimeVar):
        return float(t)
    if isinstance(node, PiConst):
        return math.pi
    if isinstance(node, Call):
        x = evaluate(node.arg, t)
        if node.func == "sin":
            return math.sin(x)
        if node.func == "cos":
            return math.cos(x)
        return abs(x)
    if node.op == "+":
        return evaluate(node.left, t) + evaluate(node.right, t)
    if node.op == "-":
        return evaluate(node.left, t) - evaluate(node.right, t)
    return evaluate(node.left, t) * evaluate(node.right, t)


def definite_nonnegative(node: TimeExpression) -> bool:
    """Conservative structural check that the expression is >= 0 for all t.

    True for nonnegative literals, ``pi``, abs-wrapped subtrees, and sums
    or products of such parts.  False otherwise; a False result does not
    mean the expression can actually go negative.
    """
    if isinstance(node, Number):
        return node.value >= 0.0
    if isinstance(node, PiConst):
        return True
    if isinstance(node, TimeVar):
        return False
    if isinstance(node, Call):
        return node.func == "abs"
    if node.op in ("+", "*"):
        return definite_nonnegative(node.left) and definite_nonnegative(node.right)
    return False  # subtraction


_PRECEDENCE = {"+": 1, "-": 1, "*": 2}


def to_source(node: TimeExpression) -> str:
    """Render an AST back to source.  ``parse_expression(to_source(e))``
    reproduces the exact tree, so evaluation round-trips bit for bit."""
    return _render(node, 0)


def _render(node: TimeExpression, min_prec: int) -> str:
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, TimeVar):
        return "t"
    if isinstance(node, PiConst):
        return "pi"
    if isinstance(node, Call):
        return f"{node.func}({_render(node.arg, 0)})"
    prec = _PRECEDENCE[node.op]
    # right child needs strictly higher precedence to keep left-association
    text = f"{_render(node.left, prec)} {node.op} {_render(node.right, prec + 1)}"
    if prec < min_prec:
        return f"({text})"
    return text
