"""First- and second-order optimality at a candidate point.

Multipliers come from the Gram system (Jg Jg^T) lambda = Jg grad f, solved
by Cholesky. The second-order test is run twice, once on the projected
Lagrangian Hessian V^T (Hess L) V and once as the curvature inequality
<nu_f, h_f(v,v)> <= <nu_f, h_g(v,v)>; the two must agree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from curvopt import config
from curvopt.compute.geometry import (
    DerivativeBundle,
    PlanarCurvatureReport,
    TangentBasis,
    gram_factor,
    orient_columns,
    quadrant_for,
    sff_f,
    sff_g,
    tangent_basis,
    unit_normal_f,
)
from curvopt.errors import DimensionMismatch, FirstOrderViolated

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiplierSet:
    lam: np.ndarray
    residual: np.ndarray
    residual_norm: float
    grad_norm: float
    constraint_norm: float

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam.tolist(),
            "residual": self.residual.tolist(),
            "residual_norm": self.residual_norm,
            "grad_norm": self.grad_norm,
            "constraint_norm": self.constraint_norm,
        }


@dataclass(frozen=True)
class SecondOrderReport:
    projected_hessian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    necessary_holds: bool
    sufficient_holds: bool
    indeterminate: bool
    first_order_ok: bool
    tol: float
    diagnostics: List[str] = field(default_factory=list)

    @property
    def min_eigenvalue(self) -> Optional[float]:
        return float(self.eigenvalues[0]) if self.eigenvalues.size else None

    def to_dict(self) -> dict:
        return {
            "projected_hessian": self.projected_hessian.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "min_eigenvalue": self.min_eigenvalue,
            "necessary_holds": self.necessary_holds,
            "sufficient_holds": self.sufficient_holds,
            "indeterminate": self.indeterminate,
            "first_order_ok": self.first_order_ok,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class CurvatureComparisonReport:
    directions: List[np.ndarray]
    lhs: List[float]
    rhs: List[float]
    gaps: List[float]
    identity_residuals: List[float]
    holds: bool
    tol: float

    @property
    def min_gap(self) -> Optional[float]:
        return min(self.gaps) if self.gaps else None

    def to_dict(self) -> dict:
        return {
            "directions": [d.tolist() for d in self.directions],
            "lhs": list(self.lhs),
            "rhs": list(self.rhs),
            "gaps": list(self.gaps),
            "min_gap": self.min_gap,
            "identity_residuals": list(self.identity_residuals),
            "max_identity_residual": max(self.identity_residuals, default=0.0),
            "holds": self.holds,
            "tol": self.tol,
        }


# ── first order ────────────────────────────────────────────────────────────

def multipliers(b: DerivativeBundle) -> MultiplierSet:
    J = b.jac_g
    lam = linalg.cho_solve(gram_factor(J), J @ b.grad_f)
    residual = b.grad_f - J.T @ lam
    return MultiplierSet(
        lam=lam,
        residual=residual,
        residual_norm=float(np.linalg.norm(residual)),
        grad_norm=float(np.linalg.norm(b.grad_f)),
        constraint_norm=float(np.linalg.norm(b.gvals)),
    )


def check_first_order(ms: MultiplierSet, tol: float = config.TOLERANCES["fo_tol"]) -> bool:
    return bool(ms.residual_norm <= tol * (1.0 + ms.grad_norm))


def check_feasible(ms: MultiplierSet, tol: float = config.TOLERANCES["fo_tol"]) -> bool:
    return bool(ms.constraint_norm <= tol)


# ── second order ───────────────────────────────────────────────────────────

def lagrangian_hessian(b: DerivativeBundle, lam) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (b.m,):
        raise DimensionMismatch(f"lambda must have {b.m} entries, got {lam.shape[0]}")
    L = b.hess_f.copy()
    for li, h in zip(lam, b.hess_g):
        L = L - li * h
    return L


def default_tol(L: np.ndarray) -> float:
    return 1e-8 * (1.0 + float(np.abs(L).max(initial=0.0)))


def second_order_report(
    b: DerivativeBundle,
    ms: MultiplierSet,
    V: TangentBasis,
    tol: Optional[float] = None,
    fo_tol: float = config.TOLERANCES["fo_tol"],
) -> SecondOrderReport:
    """Eigen-analysis of V^T (Hess L) V.

    necessary <=> min eig >= -tol, sufficient <=> min eig >= +tol; values
    strictly between are flagged indeterminate.
    """

    L = lagrangian_hessian(b, ms.lam)
    if tol is None:
        tol = default_tol(L)
    diagnostics: List[str] = []
    first_order_ok = check_first_order(ms, fo_tol)
    if not first_order_ok:
        msg = (
            f"first-order residual {ms.residual_norm:.3e} exceeds "
            f"{fo_tol:g}*(1+|grad f|); second-order verdicts assume stationarity"
        )
        log.warning(msg)
        diagnostics.append(msg)

    k = V.dim
    if k == 0:
        return SecondOrderReport(
            projected_hessian=np.zeros((0, 0)),
            eigenvalues=np.zeros(0),
            eigenvectors=np.zeros((0, 0)),
            necessary_holds=True,
            sufficient_holds=True,
            indeterminate=False,
            first_order_ok=first_order_ok,
            tol=tol,
            diagnostics=diagnostics,
        )

    H = V.V.T @ L @ V.V
    H = 0.5 * (H + H.T)
    w, Q = linalg.eigh(H)
    Q = orient_columns(Q)
    necessary = bool(w[0] >= -tol)
    sufficient = bool(w[0] >= tol)
    if necessary and not sufficient:
        diagnostics.append(
            f"min projected eigenvalue {w[0]:.3e} lies within +/-{tol:.1e}; "
            "second order is indeterminate"
        )
    return SecondOrderReport(
        projected_hessian=H,
        eigenvalues=w,
        eigenvectors=Q,
        necessary_holds=necessary,
        sufficient_holds=sufficient,
        indeterminate=necessary and not sufficient,
        first_order_ok=first_order_ok,
        tol=tol,
        diagnostics=diagnostics,
    )


def curvature_comparison(
    b: DerivativeBundle,
    ms: MultiplierSet,
    directions: Optional[Sequence] = None,
    tol: Optional[float] = None,
    so: Optional[SecondOrderReport] = None,
    fo_tol: float = config.TOLERANCES["fo_tol"],
) -> CurvatureComparisonReport:
    """Compare <nu_f, h_f(v,v)> with <nu_f, h_g(v,v)> over tangent directions.

    Without `directions`, uses the eigenvectors of the projected Lagrangian
    Hessian mapped through V. `tol` defaults to the second-order tolerance
    divided by |grad f|, so `holds` matches `necessary_holds`.
    """

    if not check_first_order(ms, fo_tol):
        raise FirstOrderViolated(
            f"first-order residual {ms.residual_norm:.3e} exceeds {fo_tol:g}*(1+|grad f|); "
            "the curvature inequality presumes stationarity"
        )
    unit_normal_f(b)
    gnorm = ms.grad_norm
    if directions is None or tol is None:
        if so is None:
            so = second_order_report(b, ms, tangent_basis(b), fo_tol=fo_tol)
    if directions is None:
        V = tangent_basis(b).V
        mapped = V @ so.eigenvectors
        directions = [mapped[:, j] for j in range(mapped.shape[1])]
    if tol is None:
        tol = so.tol / gnorm

    # stationarity only holds to fo_tol, so grad f . v is that small, not zero
    f_rtol = max(config.TANGENT_RTOL, 2.0 * fo_tol * (1.0 + gnorm) / gnorm)
    L = lagrangian_hessian(b, ms.lam)
    dirs, lhs, rhs, gaps, resid = [], [], [], [], []
    for d in directions:
        v = np.asarray(d, dtype=float)
        v = v / np.linalg.norm(v)
        hg = sff_g(b, v)
        hf = sff_f(b, v, tangent_rtol=f_rtol)
        gap = hg.along_nu_f - hf.along_nu_f
        dirs.append(v)
        lhs.append(hf.along_nu_f)
        rhs.append(hg.along_nu_f)
        gaps.append(gap)
        resid.append(abs(gap - float(v @ L @ v) / gnorm))
    return CurvatureComparisonReport(
        directions=dirs,
        lhs=lhs,
        rhs=rhs,
        gaps=gaps,
        identity_residuals=resid,
        holds=bool(min(gaps, default=0.0) >= -tol),
        tol=tol,
    )


# ── planar view ────────────────────────────────────────────────────────────

def figure1_quadrant(report: PlanarCurvatureReport) -> str:
    return quadrant_for(report.kappa_f, report.kappa_g)


def planar_consistency(
    planar: PlanarCurvatureReport, comparison: CurvatureComparisonReport
) -> float:
    """Max defect between (lhs, rhs) and (kappa_f, sign*kappa_g) for n=2, m=1."""
    if not comparison.directions or comparison.directions[0].shape != (2,):
        raise DimensionMismatch("planar consistency needs a planar comparison")
    target_rhs = planar.sign * planar.kappa_g
    return max(
        max(abs(l - planar.kappa_f), abs(r - target_rhs))
        for l, r in zip(comparison.lhs, comparison.rhs)
    )
