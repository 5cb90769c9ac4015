"""Default tolerances, numerical constants and option resolution."""

from __future__ import annotations

import copy
from typing import Any, Dict, Optional

from curvopt.errors import ProblemValidationError

SCHEMA_VERSION = 1

# Regularity thresholds
EPS_REGULAR = 1e-10          # ||grad f|| below this -> DegeneratePoint
EPS_RANK = 1e-8              # sigma_min(Jg) / sigma_max(Jg) below this -> rank deficient
TANGENT_RTOL = 1e-8          # |Jg v| relative tolerance for tangent vectors
PARALLEL_ANGLE = 1e-6        # rad, grad f vs grad g for the planar sign test
QUADRANT_ZERO = 1e-10        # |kappa| below this is "zero" for the quadrant tie rule

# Direction auto-projection for `trace`
DIRECTION_WARN = 1e-8
DIRECTION_REJECT = 1e-3

FD_STEP = 1e-4

TOLERANCES: Dict[str, Optional[float]] = {
    # None -> 1e-8 * (1 + max|Hess L|), computed per point
    "tol": None,
    # first-order gate, relative to (1 + ||grad f||)
    "fo_tol": 1e-6,
}

TRACE_DEFAULTS: Dict[str, Any] = {
    # None -> derived from the local feature scale of the traced manifold
    "half_width": None,
    "step": None,
    "steps_per_side": 200,
    "newton_tol": 1e-12,
    "newton_max_iter": 50,
}

SAMPLING_DEFAULTS: Dict[str, Any] = {
    "radius_factor": 0.5,
    "count": 512,
    "seed": 0,
}

# Certificate verdict thresholds
MARGIN_FLOOR = 1e-12
REFUTE_DROP = 1e-10

# Chart probing for the reduced functional
CHART_PROBE_STEPS = 32
CHART_PROBE_SCALE = 4.0


def default_options() -> Dict[str, Any]:
    """Fresh copy of every option with its built-in default."""

    return {
        "tol": TOLERANCES["tol"],
        "fo_tol": TOLERANCES["fo_tol"],
        "fd_step": FD_STEP,
        "trace": copy.deepcopy(TRACE_DEFAULTS),
        "sampling": copy.deepcopy(SAMPLING_DEFAULTS),
    }


def _merge_section(name: str, base: Dict[str, Any], layer: Dict[str, Any]) -> None:
    if not isinstance(layer, dict):
        raise ProblemValidationError(f"options.{name} must be an object")
    for key, value in layer.items():
        if key not in base:
            raise ProblemValidationError(
                f"Unknown option '{name}.{key}'. Valid: {', '.join(sorted(base))}"
            )
        if value is not None:
            base[key] = value


def resolve_options(
    file_options: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Merge defaults < problem-file options < CLI overrides.

    `None` values in a layer mean "not set" and never overwrite.
    """

    opts = default_options()
    for layer in (file_options or {}, overrides or {}):
        if not isinstance(layer, dict):
            raise ProblemValidationError("options must be an object")
        for key, value in layer.items():
            if key not in opts:
                raise ProblemValidationError(
                    f"Unknown option '{key}'. Valid: {', '.join(sorted(opts))}"
                )
            if key in ("trace", "sampling"):
                if value is not None:
                    _merge_section(key, opts[key], value)
            elif value is not None:
                opts[key] = value
    _check_options(opts)
    return opts


def _check_options(opts: Dict[str, Any]) -> None:
    def positive(path: str, value: Any) -> None:
        if value is None:
            return
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            raise ProblemValidationError(f"Option '{path}' must be a positive number")

    positive("tol", opts["tol"])
    positive("fo_tol", opts["fo_tol"])
    positive("fd_step", opts["fd_step"])
    for key in ("half_width", "step", "newton_tol"):
        positive(f"trace.{key}", opts["trace"][key])
    positive("sampling.radius_factor", opts["sampling"]["radius_factor"])
    for path, value in (
        ("trace.steps_per_side", opts["trace"]["steps_per_side"]),
        ("trace.newton_max_iter", opts["trace"]["newton_max_iter"]),
        ("sampling.count", opts["sampling"]["count"]),
    ):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ProblemValidationError(f"Option '{path}' must be a positive integer")
    seed = opts["sampling"]["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ProblemValidationError("Option 'sampling.seed' must be a non-negative integer")
    trace = opts["trace"]
    if trace["half_width"] is not None and trace["step"] is not None:
        if not trace["step"] < trace["half_width"]:
            raise ProblemValidationError("trace.step must be smaller than trace.half_width")
