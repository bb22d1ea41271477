"""Recursive-descent parser for scalar expressions.

Grammar (whitespace-insensitive)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | "+" unary | power
    power  := atom ("^" ["-"] INTEGER)?
    atom   := NUMBER | IDENT | "(" expr ")"

Identifiers must be coordinates declared on the chart.  Numbers are integers
or finite decimals, both read exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .scalar import Chart, ScalarExpr

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9']*)|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    """Syntax or name error with a 1-based line/column position."""

    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        self.line, self.column, self.text = line, col, text
        super().__init__(f"{message} at line {line}, column {col}")


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def tokenize(text: str) -> list:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, chart: Chart):
        self.text = text
        self.chart = chart
        self.toks = tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, self.text, tok.pos)

    def expect(self, value: str):
        t = self.peek()
        if t.kind != "op" or t.value != value:
            self.error(f"expected {value!r}, found {t.value or 'end of input'!r}")
        return self.take()

    def parse(self) -> ScalarExpr:
        if self.peek().kind == "end":
            self.error("empty expression")
        e = self.expr()
        if self.peek().kind != "end":
            self.error(f"unexpected {self.peek().value!r}")
        return e

    def expr(self) -> ScalarExpr:
        e = self.term()
        while self.peek().kind == "op" and self.peek().value in "+-":
            op = self.take().value
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> ScalarExpr:
        e = self.unary()
        while self.peek().kind == "op" and self.peek().value in "*/":
            tok = self.take()
            rhs = self.unary()
            if tok.value == "*":
                e = e * rhs
            else:
                try:
                    e = e / rhs
                except ZeroDivisionError as exc:
                    self.error(f"division by a non-invertible expression ({exc})", tok)
        return e

    def unary(self) -> ScalarExpr:
        t = self.peek()
        if t.kind == "op" and t.value in "+-":
            self.take()
            e = self.unary()
            return -e if t.value == "-" else e
        return self.power()

    def power(self) -> ScalarExpr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().value == "^":
            tok = self.take()
            sign = 1
            if self.peek().kind == "op" and self.peek().value == "-":
                self.take()
                sign = -1
            n = self.peek()
            if n.kind != "num" or not n.value.isdigit():
                self.error("exponent must be an integer literal")
            self.take()
            try:
                return base ** (sign * int(n.value))
            except ZeroDivisionError as exc:
                self.error(f"negative power of a non-invertible expression ({exc})", tok)
        return base

    def atom(self) -> ScalarExpr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return self.chart.const(Fraction(t.value))
        if t.kind == "ident":
            self.take()
            if t.value not in self.chart.index:
                self.error(f"undeclared coordinate {t.value!r}", t)
            return self.chart.coordinate(t.value)
        if t.kind == "op" and t.value == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"unexpected {t.value or 'end of input'!r}")


def parse_expression(text: str, chart: Chart) -> ScalarExpr:
    """Parse ``text`` into a ScalarExpr on ``chart``."""
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    return _Parser(text, chart).parse()
