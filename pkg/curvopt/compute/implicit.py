"""Normal-section curves on M_{f,x*} and M_g.

A normal section through x* along a unit tangent v is the set of points
x* + t v + N b, where the columns of N span the normal space at x*
(grad f(x*) for the level set, Jg(x*)^T for the constraint manifold).
For each t the normal coordinates b are found by Newton, marching outward
from t = 0 with the previous b as warm start. Newton failure truncates the
curve symmetrically instead of aborting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from curvopt import config
from curvopt.compute.geometry import DerivativeBundle, check_rank
from curvopt.compute.newton import newton_solve
from curvopt.errors import (
    DegeneratePoint,
    InsufficientSamples,
    NewtonDivergence,
    NotTangent,
    ProblemValidationError,
)
from curvopt.expr import Expression, eval_gradient, eval_value

log = logging.getLogger(__name__)

LEVEL_SET_F = "level_set_f"
CONSTRAINT_G = "constraint_g"


@dataclass(frozen=True)
class TraceParams:
    half_width: float
    step: float
    newton_tol: float = config.TRACE_DEFAULTS["newton_tol"]
    newton_max_iter: int = config.TRACE_DEFAULTS["newton_max_iter"]

    def __post_init__(self):
        if not (self.half_width > 0 and self.step > 0):
            raise ProblemValidationError("half_width and step must be positive")
        if not self.step < self.half_width:
            raise ProblemValidationError("step must be smaller than half_width")
        if not self.newton_tol > 0:
            raise ProblemValidationError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ProblemValidationError("newton_max_iter must be at least 1")

    @property
    def steps_per_side(self) -> int:
        return int(math.floor(self.half_width / self.step + 1e-9))


def feature_scale(b: DerivativeBundle, manifold: str) -> float:
    """Local length scale of the traced manifold at b.x."""
    if manifold == "f":
        gnorm = float(np.linalg.norm(b.grad_f))
        if not gnorm > config.EPS_REGULAR:
            raise DegeneratePoint("grad f vanishes; the level set has no feature scale here")
        return gnorm / (1.0 + float(np.abs(b.hess_f).max()))
    if manifold == "g":
        smin = float(check_rank(b.jac_g)[-1])
        hmax = max(float(np.abs(h).max()) for h in b.hess_g)
        return smin / (1.0 + hmax)
    raise ValueError(f"manifold must be 'f' or 'g', got {manifold!r}")


def default_trace_params(
    b: DerivativeBundle,
    manifold: str,
    trace_options: Optional[dict] = None,
) -> TraceParams:
    """Fill unset half_width/step from the feature scale.

    half_width = 0.5 * scale, step = half_width / steps_per_side; when only
    one of the two is given the other follows from steps_per_side.
    """

    opts = dict(config.TRACE_DEFAULTS)
    opts.update({k: v for k, v in (trace_options or {}).items() if v is not None})
    per_side = opts["steps_per_side"]
    half_width, step = opts["half_width"], opts["step"]
    if half_width is None and step is None:
        half_width = 0.5 * feature_scale(b, manifold)
        step = half_width / per_side
    elif half_width is None:
        half_width = step * per_side
    elif step is None:
        step = half_width / per_side
    return TraceParams(
        half_width=half_width,
        step=step,
        newton_tol=opts["newton_tol"],
        newton_max_iter=opts["newton_max_iter"],
    )


@dataclass(frozen=True)
class NormalSection:
    """The affine plane x* + t v + N b and the equations cut out on it."""

    kind: str
    x_star: np.ndarray
    v: np.ndarray
    N: np.ndarray
    equations: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]] = field(repr=False)
    tol: float
    max_iter: int
    scale: float = 0.0

    def point(self, t: float, b) -> np.ndarray:
        return self.x_star + t * self.v + self.N @ np.atleast_1d(b)

    def solve(self, t: float, b0) -> Tuple[np.ndarray, np.ndarray]:
        """Point of the section at parameter t and its normal coordinates."""
        if t == 0.0:
            return self.x_star.copy(), np.zeros(self.N.shape[1])

        def residual(b):
            r, jac = self.equations(self.point(t, b))
            return r, jac @ self.N

        res = newton_solve(
            residual, b0, self.tol, self.max_iter, scale=self.scale, at=float(t)
        )
        return self.point(t, res.b), res.b

    def velocity(self, x: np.ndarray) -> np.ndarray:
        """gamma'(t) = v + N b'(t) at a point x of the section."""
        _, jac = self.equations(x)
        bdot = np.linalg.solve(jac @ self.N, -(jac @ self.v))
        return self.v + self.N @ bdot


@dataclass(frozen=True)
class TracedCurve:
    ts: np.ndarray
    points: np.ndarray
    converged_extent: float
    kind: str
    parametrization: str = "section"
    section: Optional[NormalSection] = field(default=None, repr=False, compare=False)
    diagnostics: List[str] = field(default_factory=list, compare=False)

    @property
    def step(self) -> float:
        return float(self.ts[1] - self.ts[0])

    @property
    def center(self) -> int:
        return int(np.flatnonzero(self.ts == 0.0)[0])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise ValueError("direction v must be a unit vector")
    return v


def level_section(f: Expression, x_star, v, p: TraceParams) -> NormalSection:
    x_star = np.asarray(x_star, dtype=float)
    v = _unit(v)
    f0, grad0 = eval_gradient(f, x_star)
    gnorm = float(np.linalg.norm(grad0))
    if not gnorm > config.EPS_REGULAR:
        raise DegeneratePoint("grad f vanishes at x*; the level set is not a hypersurface there")
    if abs(grad0 @ v) > config.TANGENT_RTOL * gnorm:
        raise NotTangent("v is not tangent to the level set of f at x*")

    def equations(x):
        val, grad = eval_gradient(f, x)
        return np.array([val - f0]), grad.reshape(1, -1)

    return NormalSection(
        kind=LEVEL_SET_F,
        x_star=x_star,
        v=v,
        N=grad0.reshape(-1, 1),
        equations=equations,
        tol=p.newton_tol * max(1.0, abs(f0)),
        max_iter=p.newton_max_iter,
        scale=abs(f0),
    )


def constraint_section(g: Sequence[Expression], x_star, v, p: TraceParams) -> NormalSection:
    x_star = np.asarray(x_star, dtype=float)
    v = _unit(v)
    J0 = np.array([eval_gradient(e, x_star)[1] for e in g])
    check_rank(J0)
    if np.abs(J0 @ v).max() > config.TANGENT_RTOL * (1.0 + np.abs(J0).max()):
        raise NotTangent("v is not in Ker(Jg(x*))")

    def equations(x):
        pairs = [eval_gradient(e, x) for e in g]
        return np.array([val for val, _ in pairs]), np.array([gr for _, gr in pairs])

    return NormalSection(
        kind=CONSTRAINT_G,
        x_star=x_star,
        v=v,
        N=J0.T.copy(),
        equations=equations,
        tol=p.newton_tol,
        max_iter=p.newton_max_iter,
    )


def _march(section: NormalSection, ts_side: Sequence[float]) -> List[np.ndarray]:
    """Solve outward along one side; stops at the first Newton failure."""
    points = []
    b = np.zeros(section.N.shape[1])
    for t in ts_side:
        try:
            x, b = section.solve(t, b)
        except NewtonDivergence as exc:
            log.warning("trace truncated at t = %.6g: %s", t, exc.message)
            break
        points.append(x)
    return points


def trace_section(section: NormalSection, p: TraceParams) -> TracedCurve:
    k = p.steps_per_side
    plus = _march(section, [i * p.step for i in range(1, k + 1)])
    minus = _march(section, [-i * p.step for i in range(1, k + 1)])
    kept = min(len(plus), len(minus))
    if kept == 0:
        raise NewtonDivergence(
            f"Newton correction failed at t = +/-{p.step:g}; no curve could be traced",
            at=p.step,
        )
    diagnostics = []
    if kept < k:
        diagnostics.append(
            f"trace truncated to |t| <= {kept * p.step:.6g} of half_width {p.half_width:.6g}"
        )
    ts = np.array([i * p.step for i in range(-kept, kept + 1)])
    ts[kept] = 0.0
    pts = np.vstack(minus[:kept][::-1] + [section.x_star] + plus[:kept])
    return TracedCurve(
        ts=ts,
        points=pts,
        converged_extent=kept * p.step,
        kind=section.kind,
        section=section,
        diagnostics=diagnostics,
    )


def trace_level_section(f: Expression, x_star, v, p: TraceParams) -> TracedCurve:
    """Trace M_{f,x*} in the normal section spanned by v and grad f(x*)."""
    return trace_section(level_section(f, x_star, v, p), p)


def trace_constraint_section(g: Sequence[Expression], x_star, v, p: TraceParams) -> TracedCurve:
    """Trace M_g in the normal section spanned by v and the rows of Jg(x*)."""
    return trace_section(constraint_section(g, x_star, v, p), p)


# ── arc length ─────────────────────────────────────────────────────────────

def _arclength_from_chords(c: TracedCurve) -> TracedCurve:
    chords = np.linalg.norm(np.diff(c.points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(chords)])
    s = s - s[c.center]
    h = c.step
    k = int(math.floor(min(s[-1], -s[0]) / h + 1e-9))
    nodes = np.arange(-k, k + 1) * h
    nodes[k] = 0.0
    pts = PchipInterpolator(s, c.points, axis=0)(nodes)
    pts[k] = c.points[c.center]
    return replace(
        c, ts=nodes, points=pts, converged_extent=k * h, parametrization="arclength"
    )


def arclength_reparametrize(c: TracedCurve) -> TracedCurve:
    """Resample `c` at uniform arc-length nodes, s = 0 at x*.

    With the section attached, the speed |gamma'(t)| is evaluated exactly at
    every sample, integrated by cubic spline, inverted by Newton, and each
    resampled point is re-solved on the manifold. Without it, cumulative
    chord length and monotone cubic interpolation of the coordinates are used.
    """

    if len(c.ts) < 5:
        raise InsufficientSamples(f"arc-length reparametrization needs >= 5 samples, got {len(c.ts)}")
    if c.parametrization == "arclength":
        return c
    if c.section is None:
        return _arclength_from_chords(c)

    section = c.section
    speed = np.array([np.linalg.norm(section.velocity(x)) for x in c.points])
    spline = CubicSpline(c.ts, speed)
    S = spline.antiderivative()
    s0 = float(S(0.0))
    s_lo, s_hi = float(S(c.ts[0])) - s0, float(S(c.ts[-1])) - s0
    h = c.step
    k = int(math.floor(min(s_hi, -s_lo) / h + 1e-9))

    nodes = np.arange(1, k + 1) * h
    diagnostics = list(c.diagnostics)
    sides = []
    for sgn in (1.0, -1.0):
        target = sgn * nodes
        t = target.copy()
        for _ in range(50):
            t = np.clip(t, c.ts[0], c.ts[-1])
            delta = (S(t) - s0 - target) / spline(t)
            t = t - delta
            if np.abs(delta).max(initial=0.0) <= 1e-15 * (1.0 + c.converged_extent):
                break
        sides.append(_march(section, list(np.clip(t, c.ts[0], c.ts[-1]))))
    kept = min(len(sides[0]), len(sides[1]))
    if kept < k:
        diagnostics.append(f"arc-length resampling truncated to |s| <= {kept * h:.6g}")
    ts = np.arange(-kept, kept + 1) * h
    ts[kept] = 0.0
    pts = np.vstack(sides[1][:kept][::-1] + [section.x_star] + sides[0][:kept])
    return replace(
        c,
        ts=ts,
        points=pts,
        converged_extent=kept * h,
        parametrization="arclength",
        diagnostics=diagnostics,
    )


# ── derivatives at the base point ──────────────────────────────────────────

def _stencil(c: TracedCurve) -> Tuple[int, float]:
    i0 = c.center
    if len(c.ts) < 5 or i0 < 2 or i0 + 2 >= len(c.ts):
        raise InsufficientSamples("need at least two samples on each side of t = 0")
    return i0, c.step


def first_derivative_at_zero(c: TracedCurve) -> np.ndarray:
    i0, h = _stencil(c)
    p = c.points
    return (p[i0 - 2] - 8 * p[i0 - 1] + 8 * p[i0 + 1] - p[i0 + 2]) / (12 * h)


def second_derivative_at_zero(c: TracedCurve) -> np.ndarray:
    """Five-point central estimate of gamma''(0)."""
    i0, h = _stencil(c)
    p = c.points
    return (-p[i0 - 2] + 16 * p[i0 - 1] - 30 * p[i0] + 16 * p[i0 + 1] - p[i0 + 2]) / (12 * h * h)


def _second_of(values: np.ndarray, i0: int, h: float):
    v = values
    return (-v[i0 - 2] + 16 * v[i0 - 1] - 30 * v[i0] + 16 * v[i0 + 1] - v[i0 + 2]) / (12 * h * h)


@dataclass(frozen=True)
class ChainRuleCheck:
    f_second: float
    chain_value: float
    residual_f: float
    g_second: np.ndarray
    residual_g: float
    curvature_gap: float

    def to_dict(self) -> dict:
        return {
            "f_second": self.f_second,
            "chain_value": self.chain_value,
            "residual_f": self.residual_f,
            "g_second": self.g_second.tolist(),
            "residual_g": self.residual_g,
            "curvature_gap": self.curvature_gap,
        }


def chain_rule_checks(
    f: Expression, g: Sequence[Expression], c: TracedCurve, b: DerivativeBundle
) -> ChainRuleCheck:
    """(f o gamma)''(0) against the chain rule, and (g o gamma)''(0) against 0.

    `curvature_gap` is (f o gamma)''(0) / |grad f|, the curve estimate of
    <nu_f, h_g(v,v)> - <nu_f, h_f(v,v)> at a stationary point.
    """

    i0, h = _stencil(c)
    window = c.points[i0 - 2 : i0 + 3]
    fvals = np.array([eval_value(f, x) for x in window])
    gvals = np.array([[eval_value(e, x) for e in g] for x in window])
    f_second = float(_second_of(fvals, 2, h))
    g_second = _second_of(gvals, 2, h)
    d1 = first_derivative_at_zero(c)
    d2 = second_derivative_at_zero(c)
    chain = float(d1 @ b.hess_f @ d1 + b.grad_f @ d2)
    gnorm = float(np.linalg.norm(b.grad_f))
    return ChainRuleCheck(
        f_second=f_second,
        chain_value=chain,
        residual_f=abs(f_second - chain),
        g_second=g_second,
        residual_g=float(np.linalg.norm(g_second)),
        curvature_gap=f_second / gnorm if gnorm > config.EPS_REGULAR else math.nan,
    )


def curve_verdict(check: ChainRuleCheck, tol: Optional[float] = None) -> bool:
    """Second-order verdict along the curve: (f o gamma)''(0) >= -tol."""
    if tol is None:
        tol = 1e-6 * (1.0 + abs(check.chain_value))
    return bool(check.f_second >= -tol)
