"""Tests for curvopt.compute.geometry."""

import math

import numpy as np
import pytest

from curvopt.compute.geometry import (
    DerivativeBundle,
    hypersurface_basis,
    planar_curvatures,
    projector_constraint,
    projector_field,
    projector_hypersurface,
    quadrant_for,
    sff_bilinear,
    sff_f,
    sff_fd_oracle,
    sff_g,
    tangent_basis,
    unit_normal_f,
)
from curvopt.compute.implicit import TraceParams, trace_constraint_section, trace_level_section
from curvopt.errors import (
    DegeneratePoint,
    DimensionMismatch,
    FirstOrderViolated,
    NotTangent,
    RankDeficientJacobian,
)
from tests.conftest import make_problem


def bundle(n, f, g, x):
    return make_problem(n, f, g).bundle(np.array(x, dtype=float))


class TestDerivativeBundle:
    def test_rejects_asymmetric_hessian(self):
        with pytest.raises(ValueError):
            DerivativeBundle(
                x=np.zeros(2), fval=0.0, grad_f=np.ones(2),
                hess_f=np.array([[0.0, 1.0], [0.0, 0.0]]),
                gvals=np.zeros(1), jac_g=np.ones((1, 2)), hess_g=(np.zeros((2, 2)),),
            )

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            DerivativeBundle(
                x=np.zeros(2), fval=math.nan, grad_f=np.ones(2), hess_f=np.zeros((2, 2)),
                gvals=np.zeros(1), jac_g=np.ones((1, 2)), hess_g=(np.zeros((2, 2)),),
            )

    def test_shapes(self, sphere_min):
        problem, x = sphere_min
        b = problem.bundle(x)
        assert (b.n, b.m) == (3, 1)
        assert b.jac_g.shape == (1, 3)


class TestNormalsAndProjectors:
    def test_linear_normal(self):
        np.testing.assert_allclose(unit_normal_f(bundle(3, "x1", ["x3"], [0.3, 0.1, 0.0])), [1, 0, 0])

    def test_normalized(self):
        nu = unit_normal_f(bundle(2, "x1^2 + x2^2", ["x1 + x2 - 2"], [1, 1]))
        np.testing.assert_allclose(nu, [1 / math.sqrt(2)] * 2, atol=1e-14)

    def test_critical_point_is_degenerate(self):
        with pytest.raises(DegeneratePoint):
            unit_normal_f(bundle(2, "x1^2 + x2^2", ["x1"], [0, 0]))

    def test_hypersurface_projector_axis(self):
        P = projector_hypersurface(bundle(3, "x1", ["x3"], [0, 0, 0])).P
        np.testing.assert_allclose(P, np.diag([0.0, 1.0, 1.0]), atol=1e-15)

    def test_hypersurface_projector_radial(self):
        P = projector_hypersurface(bundle(2, "x1^2 + x2^2", ["x1"], [1, 0])).P
        np.testing.assert_allclose(P, np.diag([0.0, 1.0]), atol=1e-15)

    def test_constraint_projector_plane(self):
        P = projector_constraint(bundle(3, "x1", ["x3"], [0, 0, 0])).P
        np.testing.assert_allclose(P, np.diag([1.0, 1.0, 0.0]), atol=1e-15)

    def test_constraint_projector_circle(self):
        b = bundle(2, "x1", ["x1^2 + x2^2 - 1"], [1, 0])
        P = projector_constraint(b).P
        np.testing.assert_allclose(P, np.diag([0.0, 1.0]), atol=1e-15)
        J = b.jac_g
        gram_oracle = np.eye(2) - J.T @ np.linalg.inv(J @ J.T) @ J
        np.testing.assert_allclose(P, gram_oracle, atol=1e-14)

    def test_duplicated_rows_rank_deficient(self):
        b = bundle(3, "x1", ["x1 + x2", "x1 + x2"], [0, 0, 0])
        with pytest.raises(RankDeficientJacobian):
            projector_constraint(b)
        with pytest.raises(RankDeficientJacobian):
            tangent_basis(b)

    def test_projector_invariants_on_battery(self, quadric):
        problem, x = quadric
        b = problem.bundle(x)
        pr = projector_constraint(b)
        P = pr.P
        np.testing.assert_allclose(P, P.T, atol=1e-12)
        np.testing.assert_allclose(P @ P, P, atol=1e-10)
        assert np.trace(P) == pytest.approx(b.n - b.m, abs=1e-8)
        assert np.abs(P @ b.jac_g.T).max() <= 1e-9


class TestTangentBasis:
    def test_axis_kernel(self):
        V = tangent_basis(bundle(3, "x1", ["x3"], [0, 0, 0])).V
        assert V.shape == (3, 2)
        np.testing.assert_allclose(np.abs(V.T @ V), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(V[2], [0.0, 0.0], atol=1e-14)

    def test_line_direction(self):
        V = tangent_basis(bundle(2, "x1", ["x1 + x2 - 2"], [1, 1])).V
        assert V.shape == (2, 1)
        np.testing.assert_allclose(V[:, 0], np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-14)

    def test_point_constraint_is_zero_dimensional(self):
        V = tangent_basis(bundle(2, "x1", ["x1", "x2"], [0, 0])).V
        assert V.shape == (2, 0)

    def test_orthonormal_and_deterministic(self, quadric):
        problem, x = quadric
        b = problem.bundle(x)
        V = tangent_basis(b).V
        np.testing.assert_allclose(V.T @ V, np.eye(b.n - b.m), atol=1e-12)
        assert np.abs(b.jac_g @ V).max() <= 1e-10 * (1 + np.abs(b.jac_g).max())
        np.testing.assert_array_equal(V, tangent_basis(problem.bundle(x)).V)
        for j in range(V.shape[1]):
            col = V[:, j]
            first = col[np.abs(col) > 1e-12][0]
            assert first > 0

    def test_hypersurface_basis(self):
        b = bundle(3, "x1 + x2", ["x3"], [0, 0, 0])
        V = hypersurface_basis(b).V
        assert V.shape == (3, 2)
        np.testing.assert_allclose(b.grad_f @ V, [0.0, 0.0], atol=1e-14)


class TestSecondFundamentalForm:
    def test_linear_f_has_zero_form(self):
        b = bundle(3, "x1", ["x3"], [0, 0, 0])
        assert sff_f(b, [0, 1, 0]).along_nu_f == 0.0

    def test_paraboloid_level_set(self):
        b = bundle(2, "x1^2 + x2^2", ["x1 + x2 - 2"], [1, 1])
        v = np.array([1.0, -1.0]) / math.sqrt(2)
        assert sff_f(b, v).along_nu_f == pytest.approx(-1 / math.sqrt(2), abs=1e-12)

    def test_unit_sphere_level_set(self):
        b = bundle(3, "x1^2 + x2^2 + x3^2", ["x3 - 1"], [0, 0, 1])
        h = sff_f(b, [1, 0, 0])
        assert h.along_nu_f == pytest.approx(-1.0)
        np.testing.assert_allclose(h.vector_part, [0.0, 0.0, -1.0], atol=1e-15)

    def test_not_tangent(self):
        b = bundle(2, "x1^2 + x2^2", ["x1 + x2 - 2"], [1, 1])
        with pytest.raises(NotTangent):
            sff_f(b, [1.0, 0.0])
        with pytest.raises(NotTangent):
            sff_g(b, [1.0, 0.0])

    def test_affine_constraint_flat(self):
        h = sff_g(bundle(3, "x1", ["x1 + 2*x2 - x3 - 1"], [1, 0, 0]), [0, 1, 2])
        np.testing.assert_array_equal(h.vector_part, np.zeros(3))

    def test_circle_along_linear_objective(self):
        h = sff_g(bundle(2, "x1", ["x1^2 + x2^2 - 1"], [-1, 0]), [0, 1])
        assert h.along_nu_f == pytest.approx(1.0)

    def test_codimension_two(self):
        h = sff_g(bundle(3, "x1", ["x3", "x1^2 + x2^2 - 1"], [1, 0, 0]), [0, 1, 0])
        np.testing.assert_allclose(h.vector_part, [-1.0, 0.0, 0.0], atol=1e-14)

    def test_critical_point_of_f_keeps_vector_part(self):
        h = sff_g(bundle(2, "x1^2 + x2^2", ["x2 - x1^2"], [0, 0]), [1, 0])
        np.testing.assert_allclose(h.vector_part, [0.0, 2.0])
        assert math.isnan(h.along_nu_f)

    def test_normality_and_symmetry_on_battery(self, quadric):
        problem, x = quadric
        b = problem.bundle(x)
        V = tangent_basis(b).V
        P = projector_constraint(b).P
        rng = np.random.default_rng(7)
        for _ in range(5):
            u = V @ rng.standard_normal(V.shape[1])
            v = V @ rng.standard_normal(V.shape[1])
            h = sff_g(b, v).vector_part
            assert np.linalg.norm(P @ h) <= 1e-8 * (1 + np.linalg.norm(h))
            np.testing.assert_allclose(
                sff_bilinear(sff_g, b, u, v), sff_bilinear(sff_g, b, v, u), atol=1e-9
            )

    def test_scale_invariance(self):
        problem = make_problem(2, "x1^2 + 3*x2^2 + x1*x2", ["x1 + x2 - 2"])
        x = np.array([1.0, 1.0])
        b1, b2 = problem.bundle(x), problem.scaled(10.0).bundle(x)
        v = hypersurface_basis(b1).V[:, 0]
        np.testing.assert_allclose(unit_normal_f(b1), unit_normal_f(b2), atol=1e-12)
        np.testing.assert_allclose(projector_hypersurface(b1).P, projector_hypersurface(b2).P, atol=1e-10)
        assert sff_f(b1, v).along_nu_f == pytest.approx(sff_f(b2, v).along_nu_f, abs=1e-10)


class TestFiniteDifferenceOracle:
    def _params(self, step):
        return TraceParams(half_width=4 * step, step=step)

    def test_flat(self):
        problem = make_problem(3, "x1", ["x1 + 2*x2 - x3 - 1"])
        x = np.array([1.0, 0.0, 0.0])
        v = tangent_basis(problem.bundle(x)).V[:, 0]
        c = trace_constraint_section(problem.g, x, v, self._params(1e-3))
        np.testing.assert_allclose(sff_fd_oracle(projector_field(problem, "g"), c), 0.0, atol=1e-6)

    def test_circle_constraint(self):
        problem = make_problem(2, "x1", ["x1^2 + x2^2 - 1"])
        x = np.array([1.0, 0.0])
        c = trace_constraint_section(problem.g, x, [0.0, 1.0], self._params(1e-3))
        expected = sff_g(problem.bundle(x), [0.0, 1.0]).vector_part
        np.testing.assert_allclose(sff_fd_oracle(projector_field(problem, "g"), c), expected, atol=1e-4)

    def test_sphere_level_set(self):
        problem = make_problem(3, "x1^2 + x2^2 + x3^2", ["x3 - 1"])
        x = np.array([0.0, 0.0, 1.0])
        c = trace_level_section(problem.f, x, [1.0, 0.0, 0.0], self._params(1e-3))
        expected = sff_f(problem.bundle(x), [1.0, 0.0, 0.0]).vector_part
        np.testing.assert_allclose(sff_fd_oracle(projector_field(problem, "f"), c), expected, atol=1e-4)

    def test_battery(self, quadric):
        problem, x = quadric
        b = problem.bundle(x)
        v = tangent_basis(b).V[:, 0]
        c = trace_constraint_section(problem.g, x, v, self._params(1e-3))
        oracle = sff_fd_oracle(projector_field(problem, "g"), c)
        np.testing.assert_allclose(oracle, sff_g(b, v).vector_part, atol=1e-4)


class TestPlanarCurvatures:
    def test_paraboloid_line(self):
        r = planar_curvatures(bundle(2, "x1^2 + x2^2", ["x1 + x2 - 2"], [1, 1]))
        assert r.kappa_f == pytest.approx(-1 / math.sqrt(2), abs=1e-12)
        assert r.kappa_g == 0.0
        assert r.sign == 1
        assert r.holds
        assert r.quadrant == "b"
        assert np.linalg.norm(r.u_f) == pytest.approx(1.0, abs=1e-12)

    def test_circle_linear(self):
        r = planar_curvatures(bundle(2, "x1", ["x1^2 + x2^2 - 1"], [-1, 0]))
        assert r.kappa_f == 0.0
        assert r.kappa_g == pytest.approx(-1.0)
        assert r.sign == -1
        assert r.holds

    def test_unit_circle_kappa_is_minus_one_everywhere(self):
        for angle in (0.3, 1.2, 2.5, 4.0):
            x = [math.cos(angle), math.sin(angle)]
            r = planar_curvatures(bundle(2, "x1^2 + x2^2 - 1", ["x1^2 + x2^2 - 1"], x))
            assert r.kappa_g == pytest.approx(-1.0, abs=1e-12)

    def test_identical_curves(self):
        r = planar_curvatures(bundle(2, "x2 - x1^2", ["x2 - x1^2"], [0, 0]))
        assert r.kappa_f == r.kappa_g
        assert r.sign == 1
        assert r.holds

    def test_separate_bundles(self):
        bf = bundle(2, "x1^2 + x2^2", ["x1"], [1, 1])
        bg = bundle(2, "x1", ["x1 + x2 - 2"], [1, 1])
        r = planar_curvatures(bf, bg)
        assert r.kappa_f == pytest.approx(-1 / math.sqrt(2), abs=1e-12)
        assert r.kappa_g == 0.0

    def test_dimension_mismatch(self, sphere_min):
        problem, x = sphere_min
        with pytest.raises(DimensionMismatch):
            planar_curvatures(problem.bundle(x))

    def test_non_parallel_gradients(self):
        with pytest.raises(FirstOrderViolated):
            planar_curvatures(bundle(2, "x1", ["x2"], [0, 0]))

    @pytest.mark.parametrize(
        "kf, kg, label",
        [(-0.7071, 0.0, "b"), (0.5, -0.5, "c"), (-0.5, 0.7, "d"), (1.0, 2.0, "a"), (0.0, 0.0, "a"), (0.0, 3.0, "a")],
    )
    def test_quadrant_tie_rule(self, kf, kg, label):
        assert quadrant_for(kf, kg) == label
