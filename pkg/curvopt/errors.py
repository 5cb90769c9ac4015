"""Exception hierarchy for curvopt.

Library code raises these; only the CLI maps them to exit codes.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class CurvoptError(Exception):
    """Base class. `kind` is the stable, machine-readable error name."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind, "message": self.message}
        out.update(self.details)
        return out


# ── Input errors (exit code 2) ─────────────────────────────────────────────

class InputError(CurvoptError):
    """Anything wrong with what the user handed us."""


class ProblemValidationError(InputError, ValueError):
    pass


class ExpressionSyntaxError(InputError, ValueError):
    """Malformed expression text. `offset` is a byte offset into the source."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}", offset=offset)
        self.offset = offset
        self.source = source


class UnknownFunction(InputError, ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"Unknown function '{name}'", name=name, offset=offset)
        self.name = name
        self.offset = offset


class VariableOutOfRange(InputError, ValueError):
    def __init__(self, index: int, n: int, offset: Optional[int] = None):
        super().__init__(
            f"Variable x{index} out of range for dimension n={n}",
            index=index,
            n=n,
            offset=offset,
        )
        self.index = index
        self.n = n


# ── Evaluation errors ──────────────────────────────────────────────────────

class DomainError(CurvoptError, ArithmeticError):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message}: {subexpression}", subexpression=subexpression)
        self.subexpression = subexpression


# ── Geometric preconditions ────────────────────────────────────────────────

class DegeneratePoint(CurvoptError):
    """Gradient of f vanishes (x is not a regular point of f)."""


class RankDeficientJacobian(CurvoptError):
    """Jg(x) is not of full row rank."""


class NotTangent(CurvoptError):
    pass


class DimensionMismatch(CurvoptError, ValueError):
    pass


class FirstOrderViolated(CurvoptError):
    pass


# ── Numerical failures ─────────────────────────────────────────────────────

class NewtonDivergence(CurvoptError):
    """Newton correction failed; `at` is the curve parameter or chart point."""

    def __init__(self, message: str, at: Any = None):
        super().__init__(message, at=at)
        self.at = at


class InsufficientSamples(CurvoptError):
    pass
