"""Problem instances: min f(x) subject to g(x) = 0."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from curvopt.compute.geometry import DerivativeBundle
from curvopt.errors import ProblemValidationError
from curvopt.expr import Expression, eval_gradient, eval_jet2, eval_value, parse
from curvopt.expr.nodes import BinOp, Num


@dataclass(frozen=True)
class ProblemDefinition:
    n: int
    m: int
    f: Expression
    g: Tuple[Expression, ...]

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        if not 1 <= self.m <= self.n:
            raise ProblemValidationError(
                f"Need 1 <= m <= n, got n={self.n}, m={self.m}"
            )
        if len(self.g) != self.m:
            raise ProblemValidationError(
                f"Expected {self.m} constraint expressions, got {len(self.g)}"
            )
        if any(e.n != self.n for e in (self.f,) + self.g):
            raise ProblemValidationError("All expressions must be declared over the same n")

    @classmethod
    def from_sources(cls, n: int, f: str, g: Sequence[str]) -> "ProblemDefinition":
        return cls(n=n, m=len(g), f=parse(f, n), g=tuple(parse(s, n) for s in g))

    def objective(self, x) -> float:
        return eval_value(self.f, x)

    def constraints(self, x) -> np.ndarray:
        return np.array([eval_value(e, x) for e in self.g])

    def objective_gradient(self, x) -> Tuple[float, np.ndarray]:
        return eval_gradient(self.f, x)

    def constraint_jacobian(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """(g(x), Jg(x)) without second derivatives."""
        pairs = [eval_gradient(e, x) for e in self.g]
        return np.array([v for v, _ in pairs]), np.array([gr for _, gr in pairs])

    def bundle(self, x) -> DerivativeBundle:
        jf = eval_jet2(self.f, x)
        jg = [eval_jet2(e, x) for e in self.g]
        return DerivativeBundle(
            x=np.asarray(x, dtype=float),
            fval=jf.value,
            grad_f=jf.grad,
            hess_f=jf.hess,
            gvals=np.array([j.value for j in jg]),
            jac_g=np.array([j.grad for j in jg]).reshape(self.m, self.n),
            hess_g=tuple(j.hess for j in jg),
        )

    def scaled(self, c: float) -> "ProblemDefinition":
        """Same constraints, objective multiplied by c."""
        root = BinOp("*", Num(float(c)), self.f.root)
        f = Expression(root=root, n=self.n, source=root.to_source())
        return ProblemDefinition(n=self.n, m=self.m, f=f, g=self.g)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "f": self.f.source or self.f.to_source(),
            "g": [e.source or e.to_source() for e in self.g],
        }
