"""Scalar expressions over x1..xn with exact second-order derivatives."""

from curvopt.expr.evaluate import eval_gradient, eval_jet2, eval_value
from curvopt.expr.jet import Jet2
from curvopt.expr.nodes import Expression
from curvopt.expr.parser import parse

__all__ = ["Expression", "Jet2", "parse", "eval_jet2", "eval_value", "eval_gradient"]
