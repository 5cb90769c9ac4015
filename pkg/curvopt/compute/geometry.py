"""Point-local differential geometry of M_{f,x*} and M_g.

Unit normals, tangent projectors, tangent bases, second fundamental forms
along nu_f, and the planar algebraic curvatures. The closed forms are
primary; `sff_fd_oracle` differentiates the projector along a traced curve
and is used only to cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg

from curvopt import config
from curvopt.errors import (
    DegeneratePoint,
    DimensionMismatch,
    FirstOrderViolated,
    NotTangent,
    RankDeficientJacobian,
)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DerivativeBundle:
    """Values and derivatives of f and g at one point."""

    x: np.ndarray
    fval: float
    grad_f: np.ndarray
    hess_f: np.ndarray
    gvals: np.ndarray
    jac_g: np.ndarray
    hess_g: Tuple[np.ndarray, ...]

    def __post_init__(self):
        for name in ("x", "grad_f", "hess_f", "gvals", "jac_g"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "hess_g", tuple(_frozen(h) for h in self.hess_g))
        object.__setattr__(self, "fval", float(self.fval))
        n, m = self.n, self.m
        if self.jac_g.ndim != 2 or self.jac_g.shape != (m, n):
            raise DimensionMismatch(f"jac_g must be {m}x{n}, got {self.jac_g.shape}")
        if m > n:
            raise DimensionMismatch(f"More constraints than variables (m={m} > n={n})")
        if self.grad_f.shape != (n,) or self.hess_f.shape != (n, n):
            raise DimensionMismatch("grad_f / hess_f do not match the point dimension")
        if len(self.hess_g) != m or any(h.shape != (n, n) for h in self.hess_g):
            raise DimensionMismatch("hess_g must hold m matrices of size n x n")
        arrays = (self.x, self.grad_f, self.hess_f, self.gvals, self.jac_g) + self.hess_g
        if not (math.isfinite(self.fval) and all(np.all(np.isfinite(a)) for a in arrays)):
            raise ValueError("DerivativeBundle entries must be finite")
        for h in (self.hess_f,) + self.hess_g:
            if not np.allclose(h, h.T, rtol=0, atol=1e-12 * (1 + np.abs(h).max())):
                raise ValueError("Hessians in a DerivativeBundle must be symmetric")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.gvals.shape[0]


@dataclass(frozen=True)
class TangentBasis:
    """Orthonormal basis (columns of V) of a tangent space."""

    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "V", _frozen(self.V))
        if __debug__:
            k = self.V.shape[1]
            gram = self.V.T @ self.V
            assert np.abs(gram - np.eye(k)).max(initial=0.0) <= 1e-12, "V^T V != I"

    @property
    def dim(self) -> int:
        return self.V.shape[1]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector onto a tangent space of dimension `dim`."""

    P: np.ndarray
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))
        if __debug__:
            P = self.P
            assert np.abs(P - P.T).max() <= 1e-10, "projector not symmetric"
            assert np.abs(P @ P - P).max() <= 1e-10, "projector not idempotent"
            assert abs(np.trace(P) - self.dim) <= 1e-8, "projector trace != dim"


@dataclass(frozen=True)
class SffValue:
    """h(v,v) as a normal vector plus its component along nu_f."""

    vector_part: np.ndarray
    along_nu_f: float

    def __post_init__(self):
        object.__setattr__(self, "vector_part", _frozen(self.vector_part))


@dataclass(frozen=True)
class PlanarCurvatureReport:
    kappa_f: float
    kappa_g: float
    sign: int
    u_f: np.ndarray
    u_g: np.ndarray
    holds: bool
    quadrant: str
    angle: float

    def to_dict(self) -> dict:
        return {
            "kappa_f": self.kappa_f,
            "kappa_g": self.kappa_g,
            "sign": self.sign,
            "u_f": self.u_f.tolist(),
            "u_g": self.u_g.tolist(),
            "holds": self.holds,
            "quadrant": self.quadrant,
            "angle": self.angle,
        }


# ── normals and projectors ─────────────────────────────────────────────────

def unit_normal_f(b: DerivativeBundle, eps_reg: float = config.EPS_REGULAR) -> np.ndarray:
    norm = float(np.linalg.norm(b.grad_f))
    if not norm > eps_reg:
        raise DegeneratePoint(
            f"grad f vanishes at x (|grad f| = {norm:.3e} <= {eps_reg:g}); not a regular point of f"
        )
    return b.grad_f / norm


def projector_hypersurface(b: DerivativeBundle) -> Projector:
    nu = unit_normal_f(b)
    return Projector(np.eye(b.n) - np.outer(nu, nu), b.n - 1)


def _singular_values(J: np.ndarray) -> np.ndarray:
    return linalg.svdvals(J)


def check_rank(J: np.ndarray, eps_rank: float = config.EPS_RANK) -> np.ndarray:
    s = _singular_values(J)
    if s.size == 0 or not s[0] > 0 or not s[-1] > eps_rank * s[0]:
        smin = s[-1] if s.size else 0.0
        raise RankDeficientJacobian(
            f"Jg is not full row rank (sigma_min = {smin:.3e}); 0 is not a regular value here"
        )
    return s


def gram_factor(J: np.ndarray):
    """Cholesky factor of J J^T after a full-rank check."""
    check_rank(J)
    return linalg.cho_factor(J @ J.T)


def projector_constraint(b: DerivativeBundle) -> Projector:
    J = b.jac_g
    K = linalg.cho_solve(gram_factor(J), J)
    P = np.eye(b.n) - J.T @ K
    return Projector(0.5 * (P + P.T), b.n - b.m)


def orient_columns(Q: np.ndarray) -> np.ndarray:
    """Flip columns so the first entry of non-negligible size is positive."""
    Q = np.array(Q, dtype=float)
    for j in range(Q.shape[1]):
        col = Q[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if big.size and col[big[0]] < 0:
            Q[:, j] = -col
    return Q


def _kernel_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of Ker(A) for a full-row-rank A (k x n), via Householder QR of A^T."""
    k = A.shape[0]
    Q, _ = linalg.qr(A.T, mode="full")
    return orient_columns(Q[:, k:])


def tangent_basis(b: DerivativeBundle) -> TangentBasis:
    J = b.jac_g
    check_rank(J)
    V = _kernel_basis(J)
    if __debug__ and V.size:
        assert np.abs(J @ V).max() <= 1e-10 * (1 + np.abs(J).max()), "Jg V != 0"
    return TangentBasis(V)


def hypersurface_basis(b: DerivativeBundle) -> TangentBasis:
    """Orthonormal basis of T_x M_{f,x} = Ker(grad f^T)."""
    unit_normal_f(b)
    return TangentBasis(_kernel_basis(b.grad_f.reshape(1, -1)))


# ── second fundamental forms ───────────────────────────────────────────────

def sff_f(b: DerivativeBundle, v, tangent_rtol: float = config.TANGENT_RTOL) -> SffValue:
    """h_f(v,v) = -nu_f (v^T Hf v) / |grad f| for v tangent to M_{f,x}."""
    v = np.asarray(v, dtype=float)
    nu = unit_normal_f(b)
    gnorm = float(np.linalg.norm(b.grad_f))
    if abs(b.grad_f @ v) > tangent_rtol * gnorm * np.linalg.norm(v):
        raise NotTangent("v is not tangent to the level set of f (grad f . v != 0)")
    along = -float(v @ b.hess_f @ v) / gnorm
    return SffValue(along * nu, along)


def _check_constraint_tangent(b: DerivativeBundle, v: np.ndarray, rtol: float) -> None:
    J = b.jac_g
    if np.abs(J @ v).max(initial=0.0) > rtol * (1 + np.abs(J).max()) * np.linalg.norm(v):
        raise NotTangent("v is not in Ker(Jg(x))")


def sff_g(b: DerivativeBundle, v, tangent_rtol: float = config.TANGENT_RTOL) -> SffValue:
    """h_g(v,v) = -Jg^T (Jg Jg^T)^-1 (v^T Hg_i v)_i for v in Ker(Jg)."""
    v = np.asarray(v, dtype=float)
    J = b.jac_g
    factor = gram_factor(J)
    _check_constraint_tangent(b, v, tangent_rtol)
    q = np.array([v @ h @ v for h in b.hess_g])
    vec = -J.T @ linalg.cho_solve(factor, q)
    gnorm = float(np.linalg.norm(b.grad_f))
    # no nu_f at a critical point of f; the vector part is still defined
    along = float(b.grad_f @ vec) / gnorm if gnorm > config.EPS_REGULAR else math.nan
    return SffValue(vec, along)


def sff_bilinear(
    form: Callable[..., SffValue], b: DerivativeBundle, u, v, **kw
) -> np.ndarray:
    """Polarized h(u,v) = (h(u+v,u+v) - h(u-v,u-v)) / 4."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    plus = form(b, u + v, **kw).vector_part
    minus = form(b, u - v, **kw).vector_part
    return 0.25 * (plus - minus)


def projector_field(problem, manifold: str) -> Callable[[np.ndarray], Projector]:
    """x -> tangent projector of M_{f,x} ("f") or M_g ("g") at x."""
    if manifold == "f":
        return lambda x: projector_hypersurface(problem.bundle(x))
    if manifold == "g":
        return lambda x: projector_constraint(problem.bundle(x))
    raise ValueError(f"manifold must be 'f' or 'g', got {manifold!r}")


def sff_fd_oracle(projector_fn: Callable[[np.ndarray], Projector], curve) -> np.ndarray:
    """Finite-difference (dPi(x) v) v along a traced curve through x.

    `curve` needs `ts` (uniform grid containing 0) and `points`; v is the
    curve's own velocity at 0.
    """
    ts = np.asarray(curve.ts)
    pts = np.asarray(curve.points)
    i0 = int(np.flatnonzero(ts == 0.0)[0])
    if i0 < 1 or i0 + 1 >= len(ts):
        raise ValueError("curve needs samples on both sides of t = 0")
    h = ts[i0 + 1] - ts[i0]
    P = lambda k: projector_fn(pts[i0 + k]).P  # noqa: E731
    if i0 >= 2 and i0 + 2 < len(ts):
        v = (-pts[i0 + 2] + 8 * pts[i0 + 1] - 8 * pts[i0 - 1] + pts[i0 - 2]) / (12 * h)
        dP = (-P(2) + 8 * P(1) - 8 * P(-1) + P(-2)) / (12 * h)
    else:
        v = (pts[i0 + 1] - pts[i0 - 1]) / (2 * h)
        dP = (P(1) - P(-1)) / (2 * h)
    return dP @ v


# ── planar curvatures (n = 2, m = 1) ───────────────────────────────────────

def quadrant_for(kappa_f: float, kappa_g: float, zero: float = config.QUADRANT_ZERO) -> str:
    """Sign-pattern label (a)-(d); a near-zero curvature takes its partner's sign."""
    sf = 0 if abs(kappa_f) <= zero else (1 if kappa_f > 0 else -1)
    sg = 0 if abs(kappa_g) <= zero else (1 if kappa_g > 0 else -1)
    if sf == 0 and sg == 0:
        return "a"
    if sf == 0:
        sf = sg
    if sg == 0:
        sg = sf
    return {(1, 1): "a", (-1, -1): "b", (1, -1): "c", (-1, 1): "d"}[(sf, sg)]


def _planar_kappa(grad: np.ndarray, hess: np.ndarray) -> Tuple[float, np.ndarray]:
    vdir = np.array([grad[1], -grad[0]])
    u = vdir / np.linalg.norm(vdir)
    return -float(u @ hess @ u) / float(np.linalg.norm(grad)), u


def planar_curvatures(
    bf: DerivativeBundle, bg: Optional[DerivativeBundle] = None, tol: Optional[float] = None
) -> PlanarCurvatureReport:
    """Algebraic curvatures of M_{f,x*} and M_g and the signed inequality.

    f data come from `bf`, g data from `bg` (defaults to `bf`).
    """
    bg = bf if bg is None else bg
    if bf.n != 2 or bg.n != 2 or bg.m != 1:
        raise DimensionMismatch(f"Planar curvatures need n = 2, m = 1 (got n={bg.n}, m={bg.m})")
    unit_normal_f(bf)
    gg = bg.jac_g[0]
    if not np.linalg.norm(gg) > config.EPS_REGULAR:
        raise RankDeficientJacobian("grad g vanishes; not a regular point of g")

    kappa_f, u_f = _planar_kappa(bf.grad_f, bf.hess_f)
    kappa_g, u_g = _planar_kappa(gg, bg.hess_g[0])

    gf = bf.grad_f
    dot = float(gf @ gg)
    cross = float(gf[0] * gg[1] - gf[1] * gg[0])
    angle = math.atan2(abs(cross), abs(dot))
    if angle > config.PARALLEL_ANGLE:
        raise FirstOrderViolated(
            f"grad f and grad g are not parallel (angle {angle:.3e} rad); "
            "first-order conditions fail"
        )
    sign = 1 if dot > 0 else -1
    if tol is None:
        tol = 1e-10 * (1 + abs(kappa_f) + abs(kappa_g))
    return PlanarCurvatureReport(
        kappa_f=kappa_f,
        kappa_g=kappa_g,
        sign=sign,
        u_f=_frozen(u_f),
        u_g=_frozen(u_g),
        holds=bool(kappa_f <= sign * kappa_g + tol),
        quadrant=quadrant_for(kappa_f, kappa_g),
        angle=angle,
    )
