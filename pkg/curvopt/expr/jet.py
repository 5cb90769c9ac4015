"""Second-order forward-mode dual numbers.

A Jet2 carries value, gradient and Hessian of a scalar with respect to
x1..xn. The Hessian is stored as its packed upper triangle, so the full
matrix handed out by `hess` is symmetric bit for bit.

Every operation computes its value with exactly the float arithmetic the
plain evaluator uses; `eval_value` and `eval_jet2(...).value` agree exactly.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Tuple, Union

import numpy as np


@lru_cache(maxsize=64)
def triu(n: int) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _sym_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Packed a b^T + b a^T."""
    r, c = triu(a.shape[0])
    return a[r] * b[c] + b[r] * a[c]


def _outer(a: np.ndarray) -> np.ndarray:
    """Packed a a^T."""
    r, c = triu(a.shape[0])
    return a[r] * a[c]


class Jet2:
    __slots__ = ("value", "grad", "hpack")

    def __init__(self, value: float, grad: np.ndarray, hpack: np.ndarray):
        self.value = value
        self.grad = grad
        self.hpack = hpack

    @property
    def n(self) -> int:
        return self.grad.shape[0]

    @classmethod
    def constant(cls, value: float, n: int) -> "Jet2":
        m = n * (n + 1) // 2
        return cls(value, np.zeros(n), np.zeros(m))

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Jet2":
        """Independent variable x_{index+1} (0-based index)."""
        g = np.zeros(n)
        g[index] = 1.0
        return cls(value, g, np.zeros(n * (n + 1) // 2))

    @property
    def hess(self) -> np.ndarray:
        n = self.n
        r, c = triu(n)
        h = np.empty((n, n))
        h[r, c] = self.hpack
        h[c, r] = self.hpack
        return h

    def is_finite(self) -> bool:
        return (
            np.isfinite(self.value)
            and bool(np.all(np.isfinite(self.grad)))
            and bool(np.all(np.isfinite(self.hpack)))
        )

    def _lift(self, other: Union["Jet2", float]) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(float(other), self.n)

    # ── arithmetic ─────────────────────────────────────────────────────────

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hpack)

    def __add__(self, other):
        o = self._lift(other)
        return Jet2(self.value + o.value, self.grad + o.grad, self.hpack + o.hpack)

    def __radd__(self, other):
        o = self._lift(other)
        return Jet2(o.value + self.value, o.grad + self.grad, o.hpack + self.hpack)

    def __sub__(self, other):
        o = self._lift(other)
        return Jet2(self.value - o.value, self.grad - o.grad, self.hpack - o.hpack)

    def __rsub__(self, other):
        o = self._lift(other)
        return Jet2(o.value - self.value, o.grad - self.grad, o.hpack - self.hpack)

    def __mul__(self, other):
        o = self._lift(other)
        return Jet2(
            self.value * o.value,
            self.value * o.grad + o.value * self.grad,
            self.value * o.hpack + o.value * self.hpack + _sym_outer(self.grad, o.grad),
        )

    def __rmul__(self, other):
        o = self._lift(other)
        return Jet2(
            o.value * self.value,
            o.value * self.grad + self.value * o.grad,
            o.value * self.hpack + self.value * o.hpack + _sym_outer(o.grad, self.grad),
        )

    def __truediv__(self, other):
        return _divide(self, self._lift(other))

    def __rtruediv__(self, other):
        return _divide(self._lift(other), self)

    def chain(self, value: float, d1: float, d2: float) -> "Jet2":
        """phi(self) given phi = value, phi' = d1, phi'' = d2 at self.value."""
        return Jet2(value, d1 * self.grad, d1 * self.hpack + d2 * _outer(self.grad))

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r})"


def _divide(a: Jet2, b: Jet2) -> Jet2:
    # a = q b  =>  Hq = (Ha - q Hb - (gq gb^T + gb gq^T)) / b
    q = a.value / b.value
    gq = (a.grad - q * b.grad) / b.value
    hq = (a.hpack - q * b.hpack - _sym_outer(gq, b.grad)) / b.value
    return Jet2(q, gq, hq)
