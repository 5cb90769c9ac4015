"""CLI interface for curvopt: optimality checks for equality-constrained problems.

Exit codes: 0 all requested checks hold, 1 a check failed (or the
certificate is not "certified"), 2 invalid input.
"""

from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
import numpy as np

from curvopt import config
from curvopt.errors import (
    CurvoptError,
    DimensionMismatch,
    DomainError,
    InputError,
    DegeneratePoint,
    NewtonDivergence,
    ProblemValidationError,
)
from curvopt.problem_store import ProblemFile, list_problems, load_problem, resolve_problem
from curvopt.render.report import build_report, dumps, error_line, write_report
from curvopt.render.summary import render_summary

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2

INPUT_ERRORS = (InputError, DimensionMismatch, DomainError)

log = logging.getLogger("curvopt")


def _configure_logging(quiet: bool, verbose: bool) -> None:
    log.handlers.clear()
    log.propagate = False
    handler = logging.StreamHandler(click.get_text_stream("stderr"))
    handler.setFormatter(logging.Formatter("[%(levelname)s] %(name)s: %(message)s"))
    log.addHandler(handler)
    if quiet:
        log.setLevel(logging.CRITICAL + 1)
    else:
        log.setLevel(logging.DEBUG if verbose else logging.WARNING)


def _guarded(fn):
    """Map library errors to the single-line error and exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except INPUT_ERRORS as exc:
            click.echo(error_line(exc), err=True)
            raise SystemExit(EXIT_INPUT)
        except CurvoptError as exc:
            click.echo(error_line(exc), err=True)
            raise SystemExit(EXIT_FAILED)

    return wrapper


def output_options(fn):
    fn = click.option("--verbose", is_flag=True, help="Debug logging on stderr")(fn)
    fn = click.option("--quiet", is_flag=True, help="Nothing on stderr except errors")(fn)
    fn = click.option(
        "--json", "json_path", type=click.Path(dir_okay=False, path_type=Path),
        help="Write the JSON document here instead of stdout",
    )(fn)
    return fn


def tolerance_options(fn):
    fn = click.option("--fd-step", type=float, help=f"Finite-difference step (default {config.FD_STEP:g})")(fn)
    fn = click.option("--tol", type=float, help="Second-order verdict tolerance (default 1e-8*(1+max|Hess L|))")(fn)
    return fn


def sampling_options(fn):
    fn = click.option("--workers", type=int, default=1, show_default=True, help="Threads for sample evaluation")(fn)
    fn = click.option("--radius-factor", type=float, help="Sample radius as a fraction of the chart extent")(fn)
    fn = click.option("--samples", type=int, help=f"Sample count (default {config.SAMPLING_DEFAULTS['count']})")(fn)
    fn = click.option("--seed", type=int, help=f"Sampling seed (default {config.SAMPLING_DEFAULTS['seed']})")(fn)
    return fn


def _load(ref: str, overrides: Dict[str, Any]) -> Tuple[ProblemFile, Dict[str, Any]]:
    pf = load_problem(resolve_problem(ref))
    return pf, config.resolve_options(pf.options, overrides)


def _emit(command: str, doc: Dict[str, Any], json_path: Optional[Path], quiet: bool) -> None:
    if json_path is not None:
        write_report(doc, json_path)
    else:
        click.echo(dumps(doc))
    if not quiet:
        click.echo(render_summary(command, doc), err=True, nl=False)


# ── shared analysis steps ──────────────────────────────────────────────────

def _first_order_section(ms, fo_tol: float) -> Dict[str, Any]:
    from curvopt.compute.optimality import check_feasible, check_first_order

    section = ms.to_dict()
    section["holds"] = check_first_order(ms, fo_tol)
    section["feasible"] = check_feasible(ms, fo_tol)
    section["tol"] = fo_tol
    return section


def _reduced_functional(pf: ProblemFile, opts, V):
    from curvopt.compute.reduced import ReducedFunctional

    return ReducedFunctional(
        pf.problem,
        pf.x_star,
        V,
        newton_tol=opts["trace"]["newton_tol"],
        newton_max_iter=opts["trace"]["newton_max_iter"],
    )


def _reduced_checks(pf: ProblemFile, opts, b, ms, V, diagnostics: List[str]):
    """Hessian reduction residual and psi identities; None on Newton failure."""
    from curvopt.compute.reduced import lemma1_check, psi_identities_check

    rf = _reduced_functional(pf, opts, V)
    try:
        lemma1 = lemma1_check(rf, b, ms, opts["fd_step"], opts["fo_tol"])
        first, second = psi_identities_check(rf, b, opts["fd_step"], seed=opts["sampling"]["seed"])
    except NewtonDivergence as exc:
        diagnostics.append(f"reduced functional: {exc.message}")
        return rf, None, None
    if lemma1 > 1e-4:
        diagnostics.append(f"reduced Hessian differs from V^T (Hess L) V by {lemma1:.3e}")
    return rf, lemma1, {"hessian_identity": first, "quadratic_identity": second}


# ── commands ───────────────────────────────────────────────────────────────

@click.group()
def cli():
    """curvopt: first- and second-order optimality checks for min f(x) s.t. g(x) = 0."""
    pass


@cli.command("list")
def list_cmd():
    """Show the shipped problem instances."""
    click.echo(f"\n{'Problem':<28}{'n':<4}{'m':<4}{'f':<28}{'Description'}")
    click.echo("-" * 100)
    for name, path in list_problems().items():
        try:
            pf = load_problem(path)
        except CurvoptError as exc:
            click.echo(f"{name:<28}(invalid: {exc.message})")
            continue
        f_src = str(pf.problem.f)
        f_src = f_src if len(f_src) <= 26 else f_src[:23] + "..."
        click.echo(f"{name:<28}{pf.problem.n:<4}{pf.problem.m:<4}{f_src:<28}{pf.description}")
    click.echo()


@cli.command()
@click.argument("problem")
@tolerance_options
@click.option("--certify", "with_certificate", is_flag=True, help="Add the sampled sufficiency certificate")
@sampling_options
@output_options
@_guarded
def check(problem, tol, fd_step, with_certificate, seed, samples, radius_factor, workers,
          json_path, quiet, verbose):
    """Run the first-order, second-order and curvature checks at x*."""
    from curvopt.compute.geometry import planar_curvatures, tangent_basis
    from curvopt.compute.optimality import (
        curvature_comparison,
        multipliers,
        planar_consistency,
        second_order_report,
    )
    from curvopt.compute.reduced import certify

    _configure_logging(quiet, verbose)
    pf, opts = _load(problem, {
        "tol": tol,
        "fd_step": fd_step,
        "sampling": {"seed": seed, "count": samples, "radius_factor": radius_factor},
    })
    fo_tol = opts["fo_tol"]
    diagnostics: List[str] = []
    sections: Dict[str, Any] = {}

    b = pf.problem.bundle(pf.x_star)
    ms = multipliers(b)
    first = _first_order_section(ms, fo_tol)
    sections["first_order"] = first
    if not first["feasible"]:
        diagnostics.append(f"x* is not feasible: |g(x*)| = {ms.constraint_norm:.3e}")

    V = tangent_basis(b)
    so = second_order_report(b, ms, V, tol=opts["tol"], fo_tol=fo_tol)
    sections["second_order"] = so.to_dict()
    diagnostics.extend(so.diagnostics)

    curvature = None
    if first["holds"]:
        try:
            curvature = curvature_comparison(b, ms, so=so, fo_tol=fo_tol)
        except DegeneratePoint as exc:
            sections["curvature"] = None
            diagnostics.append(f"curvature comparison skipped: {exc.message}")
        else:
            sections["curvature"] = curvature.to_dict()
    else:
        diagnostics.append("curvature comparison skipped: first-order conditions fail")

    planar = None
    if pf.problem.n == 2 and pf.problem.m == 1:
        try:
            planar = planar_curvatures(b)
        except CurvoptError as exc:
            diagnostics.append(f"planar curvatures skipped: {exc.message}")
        else:
            sections["planar"] = planar.to_dict()
            if curvature is not None:
                sections["planar"]["consistency_residual"] = planar_consistency(planar, curvature)

    cert = None
    if first["holds"] and V.dim > 0:
        rf, lemma1, psi = _reduced_checks(pf, opts, b, ms, V, diagnostics)
        sections["lemma1_residual"] = lemma1
        sections["psi_identities"] = psi
        if with_certificate:
            cert = certify(rf, so, opts["sampling"], workers=workers)
    elif with_certificate:
        cert = certify(_reduced_functional(pf, opts, V), so, opts["sampling"], workers=workers)
    if cert is not None:
        sections["certificate"] = cert.to_dict()
        diagnostics.extend(cert.diagnostics)

    passed = (
        first["holds"]
        and first["feasible"]
        and so.necessary_holds
        and (curvature is None or curvature.holds)
        and (planar is None or planar.holds)
        and (cert is None or cert.verdict == "certified")
    )
    doc = build_report("check", pf.to_dict(), sections, diagnostics)
    doc["passed"] = bool(passed)
    _emit("check", doc, json_path, quiet)
    if not passed:
        raise SystemExit(EXIT_FAILED)


def _resolve_direction(text: str, b, manifold: str, diagnostics: List[str]) -> np.ndarray:
    from curvopt.compute.geometry import hypersurface_basis, tangent_basis

    basis = (tangent_basis(b) if manifold == "g" else hypersurface_basis(b)).V
    if basis.shape[1] == 0:
        raise ProblemValidationError("the tangent space is {0}; there is no direction to trace")
    text = text.strip()
    if text.isdigit():
        idx = int(text)
        if not 1 <= idx <= basis.shape[1]:
            raise ProblemValidationError(
                f"direction index {idx} out of range 1..{basis.shape[1]}"
            )
        return basis[:, idx - 1].copy()
    try:
        v = np.array([float(part) for part in text.split(",")])
    except ValueError:
        raise ProblemValidationError(f"direction {text!r} is neither an index nor a vector") from None
    if v.shape[0] != b.n or not np.all(np.isfinite(v)) or not np.linalg.norm(v) > 0:
        raise ProblemValidationError(f"direction must be a nonzero finite vector of length {b.n}")
    v = v / np.linalg.norm(v)
    projected = basis @ (basis.T @ v)
    off = float(np.linalg.norm(v - projected))
    if off > config.DIRECTION_REJECT:
        raise ProblemValidationError(f"direction is not tangent (off by {off:.3e})")
    if off > config.DIRECTION_WARN:
        msg = f"direction projected onto the tangent space (was off by {off:.3e})"
        log.warning(msg)
        diagnostics.append(msg)
        v = projected / np.linalg.norm(projected)
    return v


@cli.command()
@click.argument("problem")
@click.option("--manifold", type=click.Choice(["f", "g"]), default="g", show_default=True,
              help="f: level set of f through x*; g: constraint manifold")
@click.option("--direction", default="1", show_default=True,
              help="1-based tangent basis index, or a comma-separated vector")
@click.option("--step", type=float, help="Parameter step")
@click.option("--half-width", type=float, help="Parameter half range")
@click.option("--arclength", is_flag=True, help="Emit the arc-length reparametrized curve")
@click.option("--verify", is_flag=True, help="Compare gamma''(0) with the second fundamental form")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV path (default stdout)")
@output_options
@_guarded
def trace(problem, manifold, direction, step, half_width, arclength, verify, out,
          json_path, quiet, verbose):
    """Trace a normal-section curve through x* and emit it as CSV."""
    from curvopt.compute.geometry import sff_f, sff_g
    from curvopt.compute.implicit import (
        arclength_reparametrize,
        chain_rule_checks,
        default_trace_params,
        first_derivative_at_zero,
        second_derivative_at_zero,
        trace_constraint_section,
        trace_level_section,
    )
    from curvopt.expr import eval_value
    from curvopt.render.curves import write_curve_csv

    _configure_logging(quiet, verbose)
    if verify and json_path is None and out is None:
        raise click.UsageError("--verify needs --json PATH or --out PATH for the sidecar")
    pf, opts = _load(problem, {"trace": {"step": step, "half_width": half_width}})
    diagnostics: List[str] = []
    b = pf.problem.bundle(pf.x_star)
    v = _resolve_direction(direction, b, manifold, diagnostics)
    params = default_trace_params(b, manifold, opts["trace"])
    if manifold == "f":
        curve = trace_level_section(pf.problem.f, pf.x_star, v, params)
    else:
        curve = trace_constraint_section(pf.problem.g, pf.x_star, v, params)
    diagnostics.extend(curve.diagnostics)
    emitted = arclength_reparametrize(curve) if arclength else curve

    text = write_curve_csv(emitted, out)
    if out is None:
        click.echo(text, nl=False)

    sections: Dict[str, Any] = {
        "kind": curve.kind,
        "direction": v,
        "rows": len(emitted.ts),
        "step": params.step,
        "half_width": params.half_width,
        "converged_extent": emitted.converged_extent,
        "parametrization": emitted.parametrization,
    }
    if verify:
        rc = arclength_reparametrize(curve)
        diagnostics.extend(d for d in rc.diagnostics if d not in diagnostics)
        h = (sff_f(b, v) if manifold == "f" else sff_g(b, v)).vector_part
        d2 = second_derivative_at_zero(rc)
        if manifold == "f":
            eq = max(abs(eval_value(pf.problem.f, x) - b.fval) for x in curve.points)
        else:
            eq = max(float(np.linalg.norm(pf.problem.constraints(x))) for x in curve.points)
        check_doc: Dict[str, Any] = {
            "second_derivative": d2,
            "sff": h,
            "curvature_residual": float(np.linalg.norm(d2 - h)),
            "tangent_residual": float(np.linalg.norm(first_derivative_at_zero(rc) - v)),
            "max_equation_residual": eq,
        }
        if manifold == "g":
            check_doc["chain_rule"] = chain_rule_checks(pf.problem.f, pf.problem.g, rc, b).to_dict()
        sections["verify"] = check_doc

    doc = build_report("trace", pf.to_dict(), sections, diagnostics)
    if verify or json_path is not None:
        write_report(doc, json_path if json_path is not None else out.with_suffix(".json"))
    if not quiet:
        click.echo(render_summary("trace", doc), err=True, nl=False)


@cli.command()
@click.argument("problem")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path),
              help="Directory for <stem>_level_f.csv and <stem>_constraint_g.csv")
@output_options
@_guarded
def figure1(problem, out_dir, json_path, quiet, verbose):
    """Planar curvatures, the signed inequality and its quadrant (n = 2, m = 1)."""
    from curvopt.compute.geometry import planar_curvatures
    from curvopt.compute.implicit import (
        default_trace_params,
        trace_constraint_section,
        trace_level_section,
    )
    from curvopt.render.curves import write_curve_csv

    _configure_logging(quiet, verbose)
    pf, opts = _load(problem, {})
    if pf.problem.n != 2 or pf.problem.m != 1:
        raise DimensionMismatch(
            f"figure1 needs n = 2 and m = 1 (got n={pf.problem.n}, m={pf.problem.m})"
        )
    b = pf.problem.bundle(pf.x_star)
    planar = planar_curvatures(b)
    diagnostics: List[str] = []

    stem = pf.name or "problem"
    curves: Dict[str, Any] = {}
    jobs = (
        ("level_f", "f", lambda p: trace_level_section(pf.problem.f, pf.x_star, planar.u_f, p)),
        ("constraint_g", "g", lambda p: trace_constraint_section(pf.problem.g, pf.x_star, planar.u_g, p)),
    )
    for label, manifold, run in jobs:
        entry: Dict[str, Any] = {"path": None, "rows": 0, "converged_extent": 0.0}
        try:
            curve = run(default_trace_params(b, manifold, opts["trace"]))
        except NewtonDivergence as exc:
            diagnostics.append(f"{label}: {exc.message}")
            curves[label] = entry
            continue
        diagnostics.extend(f"{label}: {d}" for d in curve.diagnostics)
        entry["rows"] = len(curve.ts)
        entry["converged_extent"] = curve.converged_extent
        if out_dir is not None:
            path = out_dir / f"{stem}_{label}.csv"
            write_curve_csv(curve, path)
            entry["path"] = str(path)
        curves[label] = entry

    doc = build_report("figure1", pf.to_dict(), {"planar": planar.to_dict(), "curves": curves}, diagnostics)
    _emit("figure1", doc, json_path, quiet)
    if not planar.holds:
        raise SystemExit(EXIT_FAILED)


@cli.command("certify")
@click.argument("problem")
@tolerance_options
@sampling_options
@output_options
@_guarded
def certify_cmd(problem, tol, fd_step, seed, samples, radius_factor, workers, json_path, quiet, verbose):
    """Sampled check of F(a) >= F(0) + (mu/4)|a|^2 on the reduced functional."""
    from curvopt.compute.geometry import tangent_basis
    from curvopt.compute.optimality import multipliers, second_order_report
    from curvopt.compute.reduced import certify

    _configure_logging(quiet, verbose)
    pf, opts = _load(problem, {
        "tol": tol,
        "fd_step": fd_step,
        "sampling": {"seed": seed, "count": samples, "radius_factor": radius_factor},
    })
    diagnostics: List[str] = []
    b = pf.problem.bundle(pf.x_star)
    ms = multipliers(b)
    first = _first_order_section(ms, opts["fo_tol"])
    if not first["holds"]:
        diagnostics.append("first-order conditions fail; the certificate presumes a stationary point")
    V = tangent_basis(b)
    so = second_order_report(b, ms, V, tol=opts["tol"], fo_tol=opts["fo_tol"])
    diagnostics.extend(so.diagnostics)
    rf = _reduced_functional(pf, opts, V)
    cert = certify(rf, so, opts["sampling"], workers=workers)
    diagnostics.extend(cert.diagnostics)

    sections = {
        "first_order": first,
        "second_order": so.to_dict(),
        "certificate": cert.to_dict(),
    }
    doc = build_report("certify", pf.to_dict(), sections, diagnostics)
    _emit("certify", doc, json_path, quiet)
    if cert.verdict != "certified":
        raise SystemExit(EXIT_FAILED)


if __name__ == "__main__":
    cli()
