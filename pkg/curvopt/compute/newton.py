"""Newton correction shared by curve tracing and the reduced functional."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Tuple

import numpy as np
from scipy import linalg

from curvopt.errors import DomainError, NewtonDivergence

log = logging.getLogger(__name__)

ResidualFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class NewtonResult:
    b: np.ndarray
    residual: float
    iterations: int


def newton_solve(
    residual_fn: ResidualFn,
    b0,
    tol: float,
    max_iter: int,
    *,
    scale: float = 1.0,
    at: Any = None,
) -> NewtonResult:
    """Solve residual_fn(b)[0] = 0 starting from b0.

    Iterates until the residual reaches the rounding floor
    (1e-15 * (1 + scale)), or is within `tol` and stops improving. The best
    iterate seen is returned; NewtonDivergence if it is not within `tol`.
    """

    b = np.array(b0, dtype=float)
    floor = 1e-15 * (1.0 + abs(scale))
    best_b, best_res = b.copy(), math.inf
    prev_res = math.inf
    it = 0
    for it in range(max_iter + 1):
        try:
            r, jac = residual_fn(b)
        except DomainError as exc:
            log.debug("newton step left the domain at %s: %s", at, exc)
            break
        res = float(np.linalg.norm(r))
        if not math.isfinite(res):
            break
        if res < best_res:
            best_b, best_res = b.copy(), res
        if res <= floor:
            break
        if res <= tol and res > 0.5 * prev_res:
            break
        if it == max_iter:
            break
        try:
            delta = linalg.solve(np.atleast_2d(jac), -np.atleast_1d(r))
        except (linalg.LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(delta)):
            break
        b = b + delta
        prev_res = res

    if best_res <= tol:
        return NewtonResult(best_b, best_res, it)
    raise NewtonDivergence(
        f"Newton correction did not converge (best residual {best_res:.3e} > {tol:g})",
        at=at,
    )
