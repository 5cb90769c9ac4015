"""Shared fixtures: problem builders and the quadric battery."""

import numpy as np
import pytest

from curvopt.problem import ProblemDefinition

SHIPPED = [
    "sphere_linear_min",
    "sphere_linear_max",
    "paraboloid_line",
    "quadrant_a",
    "quadrant_b",
    "quadrant_c",
    "quadrant_d",
    "planar_violating",
    "quartic_degenerate",
]

# (id, n, constraints, point on the manifold)
QUADRICS = [
    ("circle", 2, ["x1^2 + x2^2 - 1"], [1.0, 0.0]),
    ("sphere", 3, ["x1^2 + x2^2 + x3^2 - 1"], [-1.0, 0.0, 0.0]),
    ("cylinder", 3, ["x1^2 + x2^2 - 1"], [0.0, 1.0, 0.0]),
    ("ellipsoid", 3, ["x1^2 + 4*x2^2 + 9*x3^2 - 1"], [1.0, 0.0, 0.0]),
    ("paraboloid", 3, ["x3 - x1^2 - x2^2"], [0.0, 0.0, 0.0]),
    ("hyperplane", 3, ["x1 + 2*x2 - x3 - 1"], [1.0, 0.0, 0.0]),
    ("sphere5", 5, ["x1^2 + x2^2 + x3^2 + x4^2 + x5^2 - 4"], [0.0, 0.0, 2.0, 0.0, 0.0]),
    ("circle_in_plane", 3, ["x3", "x1^2 + x2^2 - 1"], [1.0, 0.0, 0.0]),
]


def make_problem(n, f, g):
    return ProblemDefinition.from_sources(n, f, list(g))


@pytest.fixture(params=QUADRICS, ids=[q[0] for q in QUADRICS])
def quadric(request):
    """(problem, x) with f equal to the first constraint, so M_f and M_g coincide when m = 1."""
    _, n, g, x = request.param
    return make_problem(n, g[0], g), np.array(x)


@pytest.fixture
def sphere_min():
    return make_problem(3, "x1", ["x1^2 + x2^2 + x3^2 - 1"]), np.array([-1.0, 0.0, 0.0])


@pytest.fixture
def sphere_max():
    return make_problem(3, "x1", ["x1^2 + x2^2 + x3^2 - 1"]), np.array([1.0, 0.0, 0.0])


@pytest.fixture
def paraboloid_line():
    return make_problem(2, "x1^2 + x2^2", ["x1 + x2 - 2"]), np.array([1.0, 1.0])


def random_stationary_problem(rng, n, m):
    """Quadratic-plus-quartic f and mixed affine/quadric g with a stationary point at 0.

    g_i(x) = a_i . x + x^T Q_i x (every g_i vanishes at 0), and
    f(x) = c . x + x^T P x + sum_j w_j x_j^4 with c = Jg^T lambda.
    """

    def fmt(v):
        return f"({v:.17g})"

    A = rng.standard_normal((m, n))
    lam = rng.uniform(0.5, 2.0, m) * rng.choice([-1.0, 1.0], m)
    c = A.T @ lam
    g_src = []
    for i in range(m):
        terms = [f"{fmt(A[i, j])}*x{j + 1}" for j in range(n)]
        if i % 2 == 1:
            Q = rng.standard_normal((n, n))
            Q = 0.5 * (Q + Q.T)
            terms += [f"{fmt(Q[j, k])}*x{j + 1}*x{k + 1}" for j in range(n) for k in range(n)]
        g_src.append(" + ".join(terms))
    P = rng.standard_normal((n, n))
    P = 0.5 * (P + P.T)
    w = rng.uniform(0.0, 1.0, n)
    f_terms = [f"{fmt(c[j])}*x{j + 1}" for j in range(n)]
    f_terms += [f"{fmt(P[j, k])}*x{j + 1}*x{k + 1}" for j in range(n) for k in range(n)]
    f_terms += [f"{fmt(w[j])}*x{j + 1}^4" for j in range(n)]
    return make_problem(n, " + ".join(f_terms), g_src), np.zeros(n), lam
