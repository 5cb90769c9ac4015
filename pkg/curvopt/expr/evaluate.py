"""Evaluation of expression trees: plain values and second-order jets.

Both evaluators walk the tree with the same arithmetic; only the number
type differs (float vs Jet2). Integer powers with a constant exponent are
expanded into repeated multiplication so ``x1^2`` is defined at ``x1 = 0``
and both paths round identically.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, Tuple, Union

import numpy as np

from curvopt.errors import DimensionMismatch, DomainError
from curvopt.expr.jet import Jet2
from curvopt.expr.nodes import BinOp, Call, Const, Expression, Neg, Node, Num, Var

Number = Union[float, Jet2]

# exponents above this fall back to the general (positive base) rule
MAX_INT_EXPONENT = 4096


def _val(u: Number) -> float:
    return u.value if isinstance(u, Jet2) else u


def _int_exponent(node: Node) -> Union[int, None]:
    """Integer value of a variable-free exponent, else None."""
    if node.variables():
        return None
    k = eval_value_node(node, ())
    if k.is_integer() and abs(k) <= MAX_INT_EXPONENT:
        return int(k)
    return None


def _int_power(base: Number, k: int, node: Node) -> Number:
    if k == 0:
        return base * 0.0 + 1.0 if isinstance(base, Jet2) else 1.0
    result = base
    for _ in range(abs(k) - 1):
        result = result * base
    if k < 0:
        if _val(result) == 0.0:
            raise DomainError("Division by zero", node.to_source())
        result = 1.0 / result
    return result


def _general_power(base: Number, expo: Number, node: Node) -> Number:
    b = _val(base)
    if not b > 0.0:
        raise DomainError("Non-integer power of a non-positive base", node.to_source())
    try:
        value = b ** _val(expo)
    except OverflowError:
        raise DomainError("Overflow", node.to_source()) from None
    if not isinstance(base, Jet2) and not isinstance(expo, Jet2):
        return value
    n = base.n if isinstance(base, Jet2) else expo.n
    jb = base if isinstance(base, Jet2) else Jet2.constant(base, n)
    # b^e = exp(e log b); exp' = exp'' = value
    w = expo * jb.chain(math.log(b), 1.0 / b, -1.0 / (b * b))
    return w.chain(value, value, value)


def _apply(func: str, u: Number, node: Node) -> Number:
    x = _val(u)
    try:
        if func == "sin":
            value = math.sin(x)
            derivs = (math.cos(x), -value)
        elif func == "cos":
            value = math.cos(x)
            derivs = (-math.sin(x), -value)
        elif func == "exp":
            value = math.exp(x)
            derivs = (value, value)
        elif func == "log":
            if not x > 0.0:
                raise DomainError("log of a non-positive number", node.to_source())
            value = math.log(x)
            derivs = (1.0 / x, -1.0 / (x * x))
        elif func == "sqrt":
            if x < 0.0:
                raise DomainError("sqrt of a negative number", node.to_source())
            value = math.sqrt(x)
            if isinstance(u, Jet2):
                if x == 0.0:
                    raise DomainError("sqrt is not differentiable at 0", node.to_source())
                derivs = (0.5 / value, -0.25 / (value * x))
            else:
                derivs = None
        elif func == "tanh":
            value = math.tanh(x)
            d1 = 1.0 - value * value
            derivs = (d1, -2.0 * value * d1)
        else:  # pragma: no cover - parser rejects unknown names
            raise DomainError(f"Unknown function {func}", node.to_source())
    except OverflowError:
        raise DomainError("Overflow", node.to_source()) from None
    if isinstance(u, Jet2):
        return u.chain(value, *derivs)
    return value


def _walk(node: Node, leaf: Callable[[int], Number]) -> Number:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return leaf(node.index)
    if isinstance(node, Neg):
        return -_walk(node.operand, leaf)
    if isinstance(node, Call):
        return _check(_apply(node.func, _walk(node.arg, leaf), node), node)
    if isinstance(node, BinOp):
        a = _walk(node.left, leaf)
        if node.op == "^":
            k = _int_exponent(node.right)
            if k is not None:
                return _check(_int_power(a, k, node), node)
            return _check(_general_power(a, _walk(node.right, leaf), node), node)
        b = _walk(node.right, leaf)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        else:
            if _val(b) == 0.0:
                raise DomainError("Division by zero", node.to_source())
            out = a / b
        return _check(out, node)
    raise TypeError(f"Not an expression node: {node!r}")


def _check(u: Number, node: Node) -> Number:
    if not math.isfinite(_val(u)):
        raise DomainError("Non-finite result", node.to_source())
    return u


def _point(e: Expression, x) -> Tuple[float, ...]:
    pt = np.asarray(x, dtype=float).reshape(-1)
    if pt.shape[0] != e.n:
        raise DimensionMismatch(f"Point has {pt.shape[0]} coordinates, expression has n={e.n}")
    if not np.all(np.isfinite(pt)):
        raise DomainError("Non-finite evaluation point", e.to_source())
    return tuple(float(v) for v in pt)


def eval_value_node(node: Node, x: Tuple[float, ...]) -> float:
    return _walk(node, lambda i: x[i - 1])


def eval_value(e: Expression, x) -> float:
    """Value of `e` at `x`; agrees exactly with eval_jet2(e, x).value."""

    return eval_value_node(e.root, _point(e, x))


def eval_jet2(e: Expression, x) -> Jet2:
    """Value, gradient and Hessian of `e` at `x`, exact up to rounding."""

    pt = _point(e, x)
    n = e.n
    leaves: Dict[int, Jet2] = {}

    def leaf(i: int) -> Jet2:
        if i not in leaves:
            leaves[i] = Jet2.variable(pt[i - 1], i - 1, n)
        return leaves[i]

    out = _walk(e.root, leaf)
    if not isinstance(out, Jet2):
        out = Jet2.constant(out, n)
    if not out.is_finite():
        raise DomainError("Non-finite derivative", e.to_source())
    return out


def eval_gradient(e: Expression, x) -> Tuple[float, np.ndarray]:
    j = eval_jet2(e, x)
    return j.value, j.grad
