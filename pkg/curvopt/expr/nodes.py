"""Immutable expression tree."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import FrozenSet, Union

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")
BINARY_OPS = ("+", "-", "*", "/", "^")


@dataclass(frozen=True)
class Num:
    value: float

    def to_source(self) -> str:
        return repr(self.value)

    def variables(self) -> FrozenSet[int]:
        return frozenset()


@dataclass(frozen=True)
class Const:
    name: str

    @property
    def value(self) -> float:
        return CONSTANTS[self.name]

    def to_source(self) -> str:
        return self.name

    def variables(self) -> FrozenSet[int]:
        return frozenset()


@dataclass(frozen=True)
class Var:
    index: int  # 1-based

    def to_source(self) -> str:
        return f"x{self.index}"

    def variables(self) -> FrozenSet[int]:
        return frozenset({self.index})


@dataclass(frozen=True)
class Neg:
    operand: "Node"

    def to_source(self) -> str:
        return f"(-{self.operand.to_source()})"

    def variables(self) -> FrozenSet[int]:
        return self.operand.variables()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def to_source(self) -> str:
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"

    def variables(self) -> FrozenSet[int]:
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def to_source(self) -> str:
        return f"{self.func}({self.arg.to_source()})"

    def variables(self) -> FrozenSet[int]:
        return self.arg.variables()


Node = Union[Num, Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expression:
    """A parsed scalar expression over x1..xn.

    Equality is structural (tree and dimension); the original text is kept
    for reporting only.
    """

    root: Node
    n: int
    source: str = field(default="", compare=False)

    def to_source(self) -> str:
        return self.root.to_source()

    def variables(self) -> FrozenSet[int]:
        return self.root.variables()

    def __str__(self) -> str:
        return self.source or self.to_source()
