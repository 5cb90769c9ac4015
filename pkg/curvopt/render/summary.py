"""Human-readable run summaries for stderr, one jinja2 template per command."""

from __future__ import annotations

from typing import Any, Dict

from jinja2 import DictLoader, Environment, StrictUndefined


def _num(value: Any, spec: str = ".6g") -> str:
    if value is None:
        return "--"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_num(v, spec) for v in value) + "]"
    return format(value, spec)


def _tag(ok: Any) -> str:
    if ok is None:
        return "[skip]"
    return "[ok]  " if ok else "[fail]"


_FIRST_ORDER = """\
{{ first_order.holds | tag }} first order   |grad f - Jg^T lambda| = {{ first_order.residual_norm | num }}  lambda = {{ first_order["lambda"] | num }}
{{ first_order.feasible | tag }} feasible      |g(x*)| = {{ first_order.constraint_norm | num }}
"""

_SECOND_ORDER = """\
{{ second_order.necessary_holds | tag }} necessary     min eig = {{ second_order.min_eigenvalue | num }} (tol {{ second_order.tol | num(".1e") }})
{{ second_order.sufficient_holds | tag }} sufficient    eigenvalues = {{ second_order.eigenvalues | num }}
"""

TEMPLATES = {
    "check": _FIRST_ORDER + _SECOND_ORDER + """\
{% if curvature %}{{ curvature.holds | tag }} curvature     min gap = {{ curvature.min_gap | num }}  identity residual = {{ curvature.max_identity_residual | num(".2e") }}
{% else %}[skip] curvature     not compared (see diagnostics)
{% endif %}
{% if planar %}{{ planar.holds | tag }} planar        kappa_f = {{ planar.kappa_f | num }}  kappa_g = {{ planar.kappa_g | num }}  sign = {{ planar.sign }}  quadrant ({{ planar.quadrant }})
{% endif %}
{% if lemma1_residual is not none %}[ok]   reduced Hessian residual = {{ lemma1_residual | num(".2e") }}
{% endif %}
{% if certificate %}{{ (certificate.verdict == "certified") | tag }} certificate   {{ certificate.verdict }} (mu = {{ certificate.mu | num }}, {{ certificate.samples }} samples)
{% endif %}
{% for d in diagnostics %}[warn] {{ d }}
{% endfor %}
""",
    "certify": _FIRST_ORDER + """\
{{ (certificate.verdict == "certified") | tag }} certificate   {{ certificate.verdict }}
       mu = {{ certificate.mu | num }}  nu = {{ certificate.nu | num }}  R = {{ certificate.R | num }}
       sample radius = {{ certificate.sample_radius | num }}  samples = {{ certificate.samples }} ({{ certificate.failed_samples }} failed)  min margin = {{ certificate.min_margin | num(".3e") }}
{% if certificate.lowest_point %}       lower feasible point x = {{ certificate.lowest_point.x | num }}  f = {{ certificate.lowest_point.f | num(".12g") }}
{% endif %}
{% for d in diagnostics %}[warn] {{ d }}
{% endfor %}
""",
    "figure1": """\
{{ planar.holds | tag }} kappa_f = {{ planar.kappa_f | num }} <= {{ planar.sign }} * kappa_g = {{ planar.kappa_g | num }}
       quadrant ({{ planar.quadrant }})  angle(grad f, grad g) = {{ planar.angle | num(".1e") }} rad
{% for name, c in curves.items() %}{% if c.path %}[ok]   {{ name }}: {{ c.rows }} rows -> {{ c.path }}
{% else %}[skip] {{ name }}: no --out directory
{% endif %}{% endfor %}
{% for d in diagnostics %}[warn] {{ d }}
{% endfor %}
""",
    "trace": """\
[ok]   {{ kind }}: {{ rows }} rows, converged extent {{ converged_extent | num }} of {{ half_width | num }}
{% if verify %}{{ (verify.curvature_residual is not none and verify.curvature_residual <= 1e-3) | tag }} |gamma''(0) - h(v,v)| = {{ verify.curvature_residual | num(".2e") }}
{% endif %}
{% for d in diagnostics %}[warn] {{ d }}
{% endfor %}
""",
}

_env = Environment(
    loader=DictLoader(TEMPLATES),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)
_env.filters["num"] = _num
_env.filters["tag"] = _tag


def render_summary(command: str, doc: Dict[str, Any]) -> str:
    context = {
        "curvature": None,
        "planar": None,
        "lemma1_residual": None,
        "certificate": None,
        "verify": None,
    }
    context.update(doc)
    return _env.get_template(command).render(**context)
