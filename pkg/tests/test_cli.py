"""End-to-end tests of the click commands."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from curvopt.cli import EXIT_FAILED, EXIT_INPUT, EXIT_OK, cli
from curvopt.problem_store import load_problem, resolve_problem
from curvopt.render.curves import read_curve_csv
from tests.conftest import SHIPPED

CIRCLE = {"n": 2, "m": 1, "f": "x1", "g": ["x1^2 + x2^2 - 1"], "x_star": [-1, 0]}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def circle_file(tmp_path):
    path = tmp_path / "circle.json"
    path.write_text(json.dumps(CIRCLE))
    return str(path)


def run_json(runner, tmp_path, *args):
    out = tmp_path / "report.json"
    result = runner.invoke(cli, [*args, "--quiet", "--json", str(out)])
    doc = json.loads(out.read_text()) if out.exists() else None
    return result, doc


class TestCheck:
    def test_sphere_minimizer(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "check", "sphere_linear_min")
        assert result.exit_code == EXIT_OK
        assert doc["passed"] is True
        assert doc["first_order"]["lambda"] == pytest.approx([-0.5])
        assert doc["second_order"]["min_eigenvalue"] == pytest.approx(1.0)
        assert doc["curvature"]["holds"] is True
        assert doc["lemma1_residual"] <= 1e-5
        assert doc["psi_identities"]["hessian_identity"] <= 1e-4
        assert "certificate" not in doc
        assert doc["schema"] == 1 and doc["command"] == "check"

    def test_sphere_maximizer_fails(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "check", "sphere_linear_max")
        assert result.exit_code == EXIT_FAILED
        assert doc["second_order"]["necessary_holds"] is False
        assert doc["passed"] is False

    def test_planar_section(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "check", "quadrant_c")
        assert result.exit_code == EXIT_OK
        assert doc["planar"]["quadrant"] == "c"
        assert doc["planar"]["consistency_residual"] <= 1e-12

    def test_degenerate_passes_but_is_indeterminate(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "check", "quartic_degenerate")
        assert result.exit_code == EXIT_OK
        assert doc["second_order"]["indeterminate"] is True

    def test_certificate_flag(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "check", "quartic_degenerate", "--certify", "--samples", "32")
        assert result.exit_code == EXIT_FAILED
        assert doc["certificate"]["verdict"] == "inconclusive"

    def test_stationary_objective_skips_curvature(self, runner, tmp_path):
        path = tmp_path / "flat.json"
        path.write_text(json.dumps({"n": 2, "m": 1, "f": "x1^2 + x2^2", "g": ["x2"], "x_star": [0, 0]}))
        result, doc = run_json(runner, tmp_path, "check", str(path))
        assert result.exit_code == EXIT_OK
        assert doc["passed"] is True
        assert doc["curvature"] is None
        assert "planar" not in doc
        assert any(d.startswith("curvature comparison skipped") for d in doc["diagnostics"])
        assert doc["lemma1_residual"] <= 1e-5

    def test_certificate_uses_problem_newton_options(self, runner, tmp_path):
        data = {"n": 3, "m": 1, "f": "x2", "g": ["x1^2 + x2^2 + x3^2 - 1"], "x_star": [-1, 0, 0]}
        plain = tmp_path / "plain.json"
        plain.write_text(json.dumps(data))
        starved = tmp_path / "starved.json"
        starved.write_text(json.dumps({**data, "options": {"trace": {"newton_max_iter": 1}}}))

        _, doc = run_json(runner, tmp_path, "check", str(plain), "--certify", "--samples", "16")
        assert doc["first_order"]["holds"] is False
        assert doc["certificate"]["r_bar"] > 0.0

        _, doc = run_json(runner, tmp_path, "check", str(starved), "--certify", "--samples", "16")
        assert doc["certificate"]["r_bar"] == 0.0
        assert doc["certificate"]["verdict"] == "inconclusive"

    def test_invalid_problem_exits_2(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "m": 2, "f": "x1", "g": ["x1", "x1 - 1"], "x_star": [0]}))
        result = runner.invoke(cli, ["check", str(path), "--quiet"])
        assert result.exit_code == EXIT_INPUT
        lines = result.output.strip().splitlines()
        assert len(lines) == 1
        error = json.loads(lines[0])["error"]
        assert error["kind"] == "ProblemValidationError"

    def test_unknown_problem_exits_2(self, runner):
        result = runner.invoke(cli, ["check", "no_such_problem", "--quiet"])
        assert result.exit_code == EXIT_INPUT

    def test_json_to_stdout(self, runner):
        result = runner.invoke(cli, ["check", "paraboloid_line", "--quiet"])
        assert result.exit_code == EXIT_OK
        doc = json.loads(result.output)
        assert doc["first_order"]["lambda"] == pytest.approx([2.0])

    def test_byte_identical_runs(self, runner, tmp_path):
        outputs = []
        for i in range(2):
            out = tmp_path / f"run{i}.json"
            runner.invoke(
                cli, ["check", "sphere_linear_min", "--certify", "--samples", "32", "--quiet", "--json", str(out)]
            )
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestTrace:
    def test_default_circle(self, runner, circle_file):
        result = runner.invoke(cli, ["trace", circle_file, "--quiet"])
        assert result.exit_code == EXIT_OK
        lines = result.output.strip().splitlines()
        assert lines[0] == "t,x1,x2"
        assert len(lines) == 402

    def test_verify_sidecar(self, runner, circle_file, tmp_path):
        out = tmp_path / "curve.csv"
        result = runner.invoke(cli, ["trace", circle_file, "--verify", "--out", str(out), "--quiet"])
        assert result.exit_code == EXIT_OK
        assert out.exists()
        frame = read_curve_csv(out)
        assert list(frame.columns) == ["t", "x1", "x2"]
        assert len(frame) == 401
        np.testing.assert_allclose(frame["x1"] ** 2 + frame["x2"] ** 2, 1.0, atol=1e-12)
        doc = json.loads(out.with_suffix(".json").read_text())
        assert doc["rows"] == 401
        assert doc["verify"]["curvature_residual"] <= 1e-3
        assert doc["verify"]["max_equation_residual"] <= 1e-12
        assert doc["verify"]["chain_rule"]["f_second"] == pytest.approx(1.0, abs=1e-4)

    def test_arclength_and_explicit_step(self, runner, circle_file, tmp_path):
        result, doc = run_json(
            runner, tmp_path, "trace", circle_file, "--arclength", "--step", "0.01", "--half-width", "0.2"
        )
        assert result.exit_code == EXIT_OK
        assert doc["parametrization"] == "arclength"
        assert doc["step"] == pytest.approx(0.01)

    def test_level_set(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "trace", "sphere_linear_min", "--manifold", "f", "--verify")
        assert result.exit_code == EXIT_OK
        assert doc["kind"] == "level_set_f"
        assert doc["verify"]["curvature_residual"] <= 1e-8
        assert "chain_rule" not in doc["verify"]

    def test_vector_direction(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "trace", "sphere_linear_min", "--direction", "0,1,1")
        assert result.exit_code == EXIT_OK
        assert doc["direction"] == pytest.approx([0.0, 2 ** -0.5, 2 ** -0.5])

    def test_non_tangent_direction(self, runner, circle_file):
        result = runner.invoke(cli, ["trace", circle_file, "--direction", "1,0", "--quiet"])
        assert result.exit_code == EXIT_INPUT

    def test_direction_index_out_of_range(self, runner, circle_file):
        result = runner.invoke(cli, ["trace", circle_file, "--direction", "2", "--quiet"])
        assert result.exit_code == EXIT_INPUT

    def test_verify_needs_a_sidecar_path(self, runner, circle_file):
        result = runner.invoke(cli, ["trace", circle_file, "--verify", "--quiet"])
        assert result.exit_code == 2


class TestPlanarFigure:
    @pytest.mark.parametrize("stem, label", [
        ("quadrant_a", "a"),
        ("quadrant_b", "b"),
        ("quadrant_c", "c"),
        ("quadrant_d", "d"),
        ("paraboloid_line", "b"),
    ])
    def test_quadrants(self, runner, tmp_path, stem, label):
        result, doc = run_json(runner, tmp_path, "figure1", stem)
        assert result.exit_code == EXIT_OK
        assert doc["planar"]["quadrant"] == label
        assert doc["planar"]["holds"] is True
        assert doc["curves"]["level_f"]["path"] is None

    def test_violating(self, runner, tmp_path):
        result, doc = run_json(runner, tmp_path, "figure1", "planar_violating")
        assert result.exit_code == EXIT_FAILED
        assert doc["planar"]["holds"] is False

    @pytest.mark.parametrize("stem", ["quadrant_a", "quadrant_b", "quadrant_c", "quadrant_d", "planar_violating"])
    def test_verdict_matches_feasible_scan(self, runner, tmp_path, stem):
        # every shipped planar constraint is affine in x2, so the feasible
        # curve near x* is x2 = -g(x1, 0) / (g(x1, 1) - g(x1, 0))
        pf = load_problem(resolve_problem(stem))
        f_star = pf.problem.objective(pf.x_star)
        lowest = np.inf
        for x1 in np.linspace(-0.3, 0.3, 601):
            g0 = pf.problem.constraints([x1, 0.0])[0]
            g1 = pf.problem.constraints([x1, 1.0])[0]
            x = np.array([x1, -g0 / (g1 - g0)])
            if np.linalg.norm(x - pf.x_star) <= 0.3:
                assert abs(pf.problem.constraints(x)[0]) <= 1e-12
                lowest = min(lowest, pf.problem.objective(x) - f_star)
        _, doc = run_json(runner, tmp_path, "figure1", stem)
        assert doc["planar"]["holds"] is bool(lowest >= -1e-12)

    def test_needs_planar_problem(self, runner):
        result = runner.invoke(cli, ["figure1", "sphere_linear_min", "--quiet"])
        assert result.exit_code == EXIT_INPUT
        assert json.loads(result.output.strip())["error"]["kind"] == "DimensionMismatch"

    def test_writes_curves(self, runner, tmp_path):
        out_dir = tmp_path / "fig"
        result, doc = run_json(runner, tmp_path, "figure1", "quadrant_a", "--out", str(out_dir))
        assert result.exit_code == EXIT_OK
        for label in ("level_f", "constraint_g"):
            path = out_dir / f"quadrant_a_{label}.csv"
            assert path.exists()
            assert len(path.read_text().strip().splitlines()) == doc["curves"][label]["rows"] + 1


class TestCertify:
    @pytest.mark.parametrize("stem, code, verdict", [
        ("sphere_linear_min", EXIT_OK, "certified"),
        ("sphere_linear_max", EXIT_FAILED, "refuted"),
        ("quartic_degenerate", EXIT_FAILED, "inconclusive"),
    ])
    def test_verdicts(self, runner, tmp_path, stem, code, verdict):
        result, doc = run_json(runner, tmp_path, "certify", stem, "--samples", "64")
        assert result.exit_code == code
        assert doc["certificate"]["verdict"] == verdict
        assert doc["certificate"]["samples"] == 64

    def test_refuted_reports_lower_point(self, runner, tmp_path):
        _, doc = run_json(runner, tmp_path, "certify", "sphere_linear_max", "--samples", "64")
        low = doc["certificate"]["lowest_point"]
        assert low["f"] < low["f_star"]

    def test_workers_do_not_change_result(self, runner, tmp_path):
        _, serial = run_json(runner, tmp_path, "certify", "sphere_linear_min", "--samples", "64")
        _, pooled = run_json(runner, tmp_path, "certify", "sphere_linear_min", "--samples", "64", "--workers", "3")
        assert pooled == serial

    def test_seed_is_reported(self, runner, tmp_path):
        _, doc = run_json(runner, tmp_path, "certify", "sphere_linear_min", "--samples", "16", "--seed", "7")
        assert doc["certificate"]["seed"] == 7


class TestList:
    def test_lists_shipped(self, runner):
        result = runner.invoke(cli, ["list"])
        assert result.exit_code == EXIT_OK
        for stem in SHIPPED:
            assert stem in result.output


class TestSummary:
    def test_summary_on_stderr(self, tmp_path):
        out = tmp_path / "r.json"
        result = CliRunner().invoke(cli, ["check", "sphere_linear_min", "--json", str(out)])
        assert result.exit_code == EXIT_OK
        assert "first order" in result.output
        assert "[ok]" in result.output
