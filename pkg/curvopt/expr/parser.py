"""Recursive-descent parser for the expression grammar in docs/grammar.md.

Precedence, tightest first: ``^`` (right-associative), unary ``-``,
``* /``, ``+ -``. The right operand of ``^`` is parsed at unary level, so
``x1^-2`` and ``2^x1^2`` work and ``-x1^2`` means ``-(x1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import List

from curvopt.errors import ExpressionSyntaxError, UnknownFunction, VariableOutOfRange
from curvopt.expr.nodes import (
    CONSTANTS,
    FUNCTIONS,
    BinOp,
    Call,
    Const,
    Expression,
    Neg,
    Node,
    Num,
    Var,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"x(\d+)")


@dataclass(frozen=True)
class Token:
    kind: str   # num | ident | op | eof
    text: str
    offset: int  # byte offset into the source


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(
                f"Unexpected character {source[pos]!r}", _byte_offset(source, pos), source
            )
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), _byte_offset(source, pos)))
        pos = m.end()
    tokens.append(Token("eof", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, char_pos: int) -> int:
    return len(source[:char_pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, n: int):
        self.source = source
        self.n = n
        self.tokens = tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def fail(self, message: str, tok: Token = None):
        tok = tok or self.tok
        if tok.kind == "eof":
            message = f"{message}: unexpected end of input"
        else:
            message = f"{message}: unexpected {tok.text!r}"
        raise ExpressionSyntaxError(message, tok.offset, self.source)

    def expect(self, text: str) -> Token:
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        self.fail(f"Expected {text!r}")

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail("Trailing input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExpressionSyntaxError(
                    f"Numeric literal {tok.text!r} is not finite", tok.offset, self.source
                )
            return Num(value)
        if tok.kind == "ident":
            self.advance()
            return self.identifier(tok)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("Expected a number, variable, function call or '('")

    def identifier(self, tok: Token) -> Node:
        name = tok.text
        is_call = self.tok.kind == "op" and self.tok.text == "("
        if is_call:
            if name not in FUNCTIONS:
                raise UnknownFunction(name, tok.offset)
            self.advance()
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        m = _VAR_RE.fullmatch(name)
        if m:
            index = int(m.group(1))
            if index < 1 or index > self.n:
                raise VariableOutOfRange(index, self.n, tok.offset)
            return Var(index)
        if name in CONSTANTS:
            return Const(name)
        if name in FUNCTIONS:
            raise ExpressionSyntaxError(
                f"Function '{name}' needs an argument", tok.offset, self.source
            )
        raise ExpressionSyntaxError(f"Unknown identifier '{name}'", tok.offset, self.source)


def parse(source: str, n: int) -> Expression:
    """Parse `source` into an Expression over x1..xn."""

    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValueError(f"Dimension n must be a positive integer, got {n!r}")
    if not source or not source.strip():
        raise ExpressionSyntaxError("Empty expression", 0, source or "")
    root = _Parser(source, n).parse()
    return Expression(root=root, n=n, source=source)
