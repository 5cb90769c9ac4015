"""Reduced functional F(a) = f(x* + V a + Jg(x*)^T psi(a)).

psi(a) is the normal correction that puts x* + V a back on M_g. The module
checks grad F(0) = 0, compares the finite-difference Hessian of F with the
projected Lagrangian Hessian, checks the second-derivative identities of
psi, and samples a ball around 0 for the lower bound
F(a) >= F(0) + (mu/4)|a|^2.

The certificate is sampled evidence, not a proof.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import norm, qmc

from curvopt import config
from curvopt.compute.geometry import DerivativeBundle, TangentBasis, check_rank, tangent_basis
from curvopt.compute.implicit import feature_scale
from curvopt.compute.newton import newton_solve
from curvopt.compute.optimality import (
    MultiplierSet,
    SecondOrderReport,
    check_first_order,
    lagrangian_hessian,
)
from curvopt.errors import (
    CurvoptError,
    DimensionMismatch,
    DomainError,
    FirstOrderViolated,
    NewtonDivergence,
)
from curvopt.expr import eval_gradient, eval_value

log = logging.getLogger(__name__)

# substeps for the ray continuation used when a cold Newton start fails
_CONTINUATION_STEPS = 8


class ReducedFunctional:
    """F and psi for one problem at one base point.

    Solved (a -> psi(a)) pairs are cached; the cache is guarded by a lock so
    sample evaluation can run on a thread pool.
    """

    def __init__(
        self,
        problem,
        x_star,
        V: Optional[TangentBasis] = None,
        newton_tol: float = config.TRACE_DEFAULTS["newton_tol"],
        newton_max_iter: int = config.TRACE_DEFAULTS["newton_max_iter"],
    ):
        self.problem = problem
        self.x_star = np.asarray(x_star, dtype=float)
        self.bundle: DerivativeBundle = problem.bundle(self.x_star)
        self.J = np.array(self.bundle.jac_g)
        self.singular_values = check_rank(self.J)
        self.V = V if V is not None else tangent_basis(self.bundle)
        if self.V.V.shape != (problem.n, problem.n - problem.m):
            raise DimensionMismatch("tangent basis does not match the problem dimensions")
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self._cache: Dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()
        self._jmax = float(np.abs(self.J).max())
        self._xmax = float(np.abs(self.x_star).max())

    @property
    def dim(self) -> int:
        return self.V.dim

    @property
    def nu(self) -> float:
        """Smallest singular value of Jg(x*)^T."""
        return float(self.singular_values[-1])

    def lift(self, a, b) -> np.ndarray:
        return self.x_star + self.V.V @ np.asarray(a, dtype=float) + self.J.T @ np.asarray(b, dtype=float)

    def _check_a(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape != (self.dim,):
            raise DimensionMismatch(f"a must have {self.dim} entries, got {a.shape[0]}")
        return a

    def _newton(self, a: np.ndarray, b0: np.ndarray) -> np.ndarray:
        def residual(b):
            x = self.lift(a, b)
            pairs = [eval_gradient(e, x) for e in self.problem.g]
            r = np.array([val for val, _ in pairs])
            jac = np.array([gr for _, gr in pairs])
            return r, jac @ self.J.T

        scale = self._jmax * (1.0 + self._xmax + float(np.abs(a).max(initial=0.0)))
        res = newton_solve(
            residual, b0, self.newton_tol, self.newton_max_iter, scale=scale, at=a.tolist()
        )
        return res.b

    def solve_psi(self, a, b0=None) -> np.ndarray:
        a = self._check_a(a)
        m = self.problem.m
        if not np.any(a):
            return np.zeros(m)
        key = a.tobytes()
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit.copy()
        start = np.zeros(m) if b0 is None else np.asarray(b0, dtype=float)
        try:
            b = self._newton(a, start)
        except NewtonDivergence:
            if b0 is not None:
                raise
            b = np.zeros(m)
            for i in range(1, _CONTINUATION_STEPS + 1):
                b = self._newton(a * (i / _CONTINUATION_STEPS), b)
        with self._lock:
            self._cache[key] = b
        return b.copy()

    def value(self, a, b0=None) -> float:
        a = self._check_a(a)
        return eval_value(self.problem.f, self.lift(a, self.solve_psi(a, b0)))

    def cache_size(self) -> int:
        with self._lock:
            return len(self._cache)


def solve_psi(rf: ReducedFunctional, a) -> np.ndarray:
    return rf.solve_psi(a)


def reduced_value(rf: ReducedFunctional, a) -> float:
    return rf.value(a)


# ── derivatives of F and psi at 0 ──────────────────────────────────────────

def _fd_hessian(fn, k: int, h: float) -> np.ndarray:
    """Central FD Hessian at 0 of fn: R^k -> R^p, returned as (p, k, k)."""
    E = np.eye(k)
    f0 = np.atleast_1d(fn(np.zeros(k)))
    H = np.zeros((f0.shape[0], k, k))
    for i in range(k):
        H[:, i, i] = (np.atleast_1d(fn(h * E[i])) - 2 * f0 + np.atleast_1d(fn(-h * E[i]))) / (h * h)
        for j in range(i + 1, k):
            pp = np.atleast_1d(fn(h * (E[i] + E[j])))
            pm = np.atleast_1d(fn(h * (E[i] - E[j])))
            mp = np.atleast_1d(fn(h * (-E[i] + E[j])))
            mm = np.atleast_1d(fn(-h * (E[i] + E[j])))
            H[:, i, j] = H[:, j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return 0.5 * (H + np.swapaxes(H, 1, 2))


def reduced_gradient_zero(rf: ReducedFunctional, fd_step: float = config.FD_STEP) -> np.ndarray:
    k = rf.dim
    E = np.eye(k)
    return np.array(
        [(rf.value(fd_step * E[i]) - rf.value(-fd_step * E[i])) / (2 * fd_step) for i in range(k)]
    )


def reduced_hessian_zero(rf: ReducedFunctional, fd_step: float = config.FD_STEP) -> np.ndarray:
    if rf.dim == 0:
        return np.zeros((0, 0))
    return _fd_hessian(rf.value, rf.dim, fd_step)[0]


def psi_hessian_zero(rf: ReducedFunctional, fd_step: float = config.FD_STEP) -> np.ndarray:
    """Hess psi_j(0) for each j, shape (m, k, k)."""
    if rf.dim == 0:
        return np.zeros((rf.problem.m, 0, 0))
    return _fd_hessian(rf.solve_psi, rf.dim, fd_step)


def lemma1_check(
    rf: ReducedFunctional,
    b: DerivativeBundle,
    ms: MultiplierSet,
    fd_step: float = config.FD_STEP,
    fo_tol: float = config.TOLERANCES["fo_tol"],
) -> float:
    """max |Hess F(0) - V^T (Hess L) V|."""
    if not check_first_order(ms, fo_tol):
        raise FirstOrderViolated(
            f"first-order residual {ms.residual_norm:.3e} too large; "
            "the Hessian reduction presumes a stationary point"
        )
    if rf.dim == 0:
        return 0.0
    V = rf.V.V
    projected = V.T @ lagrangian_hessian(b, ms.lam) @ V
    return float(np.abs(reduced_hessian_zero(rf, fd_step) - projected).max())


def psi_identities_check(
    rf: ReducedFunctional,
    b: DerivativeBundle,
    fd_step: float = config.FD_STEP,
    samples: int = 8,
    seed: int = 0,
) -> Tuple[float, float]:
    """Residuals of the two second-derivative identities of psi at 0.

    First: V^T Hg_i V + sum_j (grad g_i . grad g_j) Hess psi_j(0) = 0 for
    every i (max abs entry). Second: a^T Hess psi(0) a equals
    -(Jg Jg^T)^-1 (a^T V^T Hg_i V a)_i for random unit a (max norm defect).
    """

    k = rf.dim
    if k == 0:
        return 0.0, 0.0
    V = rf.V.V
    J = b.jac_g
    gram = J @ J.T
    Hpsi = psi_hessian_zero(rf, fd_step)
    reduced_hg = [V.T @ h @ V for h in b.hess_g]

    first = 0.0
    for i, rhg in enumerate(reduced_hg):
        lhs = rhg + np.tensordot(gram[i], Hpsi, axes=1)
        first = max(first, float(np.abs(lhs).max()))

    rng = np.random.default_rng(seed)
    factor = linalg.cho_factor(gram)
    second = 0.0
    for _ in range(samples):
        a = rng.standard_normal(k)
        a /= np.linalg.norm(a)
        quad_psi = np.array([a @ hp @ a for hp in Hpsi])
        quad_g = np.array([a @ rhg @ a for rhg in reduced_hg])
        second = max(second, float(np.linalg.norm(quad_psi + linalg.cho_solve(factor, quad_g))))
    return first, second


# ── chart extent and certificate ───────────────────────────────────────────

@dataclass(frozen=True)
class ChartExtent:
    r_bar: float
    r_bar_prime: float
    probe_radius: float


def chart_extent(
    rf: ReducedFunctional,
    r_max: Optional[float] = None,
    steps: int = config.CHART_PROBE_STEPS,
) -> ChartExtent:
    """Probe +/- each tangent axis outward until psi stops converging.

    r_bar is the smallest radius reached over all probes; r_bar_prime is
    the largest |psi| seen inside r_bar.
    """

    k = rf.dim
    if r_max is None:
        r_max = config.CHART_PROBE_SCALE * feature_scale(rf.bundle, "g")
    radii = r_max * np.arange(1, steps + 1) / steps
    reached = r_max
    seen: List[Tuple[float, float]] = []
    E = np.eye(k)
    for axis in range(k):
        for sgn in (1.0, -1.0):
            b = np.zeros(rf.problem.m)
            last = 0.0
            for r in radii:
                try:
                    b = rf.solve_psi(sgn * r * E[axis], b0=b)
                except (NewtonDivergence, DomainError):
                    break
                last = float(r)
                seen.append((last, float(np.linalg.norm(b))))
            reached = min(reached, last)
    r_bar_prime = max((nb for r, nb in seen if r <= reached), default=0.0)
    return ChartExtent(r_bar=reached, r_bar_prime=r_bar_prime, probe_radius=float(r_max))


@dataclass(frozen=True)
class SufficiencyCertificate:
    mu: Optional[float]
    nu: float
    R: float
    r_bar: float
    r_bar_prime: float
    sample_radius: float
    samples: int
    failed_samples: int
    min_margin: Optional[float]
    verdict: str
    seed: int
    radius_factor: float
    lowest_point: Optional[Dict[str, Any]] = None
    diagnostics: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "nu": self.nu,
            "R": self.R,
            "r_bar": self.r_bar,
            "r_bar_prime": self.r_bar_prime,
            "sample_radius": self.sample_radius,
            "samples": self.samples,
            "failed_samples": self.failed_samples,
            "min_margin": self.min_margin,
            "verdict": self.verdict,
            "seed": self.seed,
            "radius_factor": self.radius_factor,
            "lowest_point": self.lowest_point,
        }


def sample_ball(k: int, radius: float, count: int, seed: int) -> np.ndarray:
    """Deterministic scrambled-Halton points in the k-ball of `radius`."""
    u = qmc.Halton(d=k + 1, scramble=True, seed=seed).random(count)
    r = radius * u[:, 0] ** (1.0 / k)
    z = norm.ppf(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
    lengths = np.linalg.norm(z, axis=1)
    z[lengths == 0.0] = np.eye(k)[0]
    lengths[lengths == 0.0] = 1.0
    return (z / lengths[:, None]) * r[:, None]


def certify(
    rf: ReducedFunctional,
    so: SecondOrderReport,
    sampling: Optional[dict] = None,
    workers: int = 1,
    extent: Optional[ChartExtent] = None,
) -> SufficiencyCertificate:
    """Sampled check of F(a) - F(0) >= (mu/4)|a|^2 near 0.

    certified: mu > tol, every sample converged and every margin
    >= -1e-12 (1+|F(0)|);
    refuted: some sample has F(a) < F(0) - 1e-10 (1+|F(0)|);
    inconclusive otherwise. Sample failures are counted, never raised.
    """

    opts = dict(config.SAMPLING_DEFAULTS)
    opts.update({k: v for k, v in (sampling or {}).items() if v is not None})
    seed, count, radius_factor = opts["seed"], opts["count"], opts["radius_factor"]
    k = rf.dim
    diagnostics: List[str] = []
    F0 = rf.value(np.zeros(k))
    mu = so.min_eigenvalue

    if k == 0:
        diagnostics.append("m = n: x* is an isolated feasible point; nothing to sample")
        return SufficiencyCertificate(
            mu=None, nu=rf.nu, R=0.0, r_bar=0.0, r_bar_prime=0.0, sample_radius=0.0,
            samples=0, failed_samples=0, min_margin=None, verdict="certified",
            seed=seed, radius_factor=radius_factor, diagnostics=diagnostics,
        )

    if extent is None:
        extent = chart_extent(rf)
    R = min(extent.r_bar, rf.nu * extent.r_bar_prime)
    sample_radius = radius_factor * extent.r_bar
    points = sample_ball(k, sample_radius, count, seed) if sample_radius > 0 else np.zeros((0, k))
    if sample_radius <= 0:
        diagnostics.append("psi did not converge on any probe; chart extent is 0")

    def evaluate(a: np.ndarray) -> Optional[float]:
        try:
            return rf.value(a)
        except CurvoptError as exc:
            log.debug("certificate sample at %s failed: %s", a.tolist(), exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(evaluate, points))
    else:
        values = [evaluate(a) for a in points]

    ok = [(a, v) for a, v in zip(points, values) if v is not None]
    failed = len(points) - len(ok)
    if failed:
        diagnostics.append(f"{failed} of {len(points)} certificate samples failed to converge")
        log.warning("%d certificate samples failed to converge", failed)

    quarter_mu = (mu if mu is not None else 0.0) / 4.0
    margins = [v - F0 - quarter_mu * float(a @ a) for a, v in ok]
    min_margin = min(margins) if margins else None

    lowest = None
    verdict = "inconclusive"
    if ok:
        a_low, f_low = min(ok, key=lambda item: item[1])
        if f_low < F0 - config.REFUTE_DROP * (1.0 + abs(F0)):
            verdict = "refuted"
            x_low = rf.lift(a_low, rf.solve_psi(a_low))
            lowest = {"a": a_low.tolist(), "x": x_low.tolist(), "f": f_low, "f_star": F0}
            log.warning("feasible point below f(x*) found at x = %s (f = %.12g)", x_low.tolist(), f_low)
        elif mu is not None and mu > so.tol and min_margin >= -config.MARGIN_FLOOR * (1.0 + abs(F0)):
            if failed:
                diagnostics.append(
                    "unconverged samples leave part of the ball unchecked; verdict cannot be certified"
                )
            else:
                verdict = "certified"
    else:
        diagnostics.append("no certificate sample converged")
    if verdict == "inconclusive" and mu is not None and mu <= so.tol:
        diagnostics.append(f"mu = {mu:.3e} is not safely positive; lower bound cannot be certified")

    return SufficiencyCertificate(
        mu=mu,
        nu=rf.nu,
        R=R,
        r_bar=extent.r_bar,
        r_bar_prime=extent.r_bar_prime,
        sample_radius=sample_radius,
        samples=len(points),
        failed_samples=failed,
        min_margin=min_margin,
        verdict=verdict,
        seed=seed,
        radius_factor=radius_factor,
        lowest_point=lowest,
        diagnostics=diagnostics,
    )
