"""File-backed problem instances.

A problem file is one JSON document:

    {"n": 3, "m": 1, "f": "x1", "g": ["x1^2 + x2^2 + x3^2 - 1"],
     "x_star": [-1, 0, 0], "options": {...}}

`name` and `description` are optional labels. Shipped instances live in
data/problems/ and can be referred to by file stem.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from curvopt import config
from curvopt.errors import ProblemValidationError
from curvopt.problem import ProblemDefinition

DEFAULT_PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "data" / "problems"

REQUIRED_KEYS = ("n", "m", "f", "g", "x_star")
OPTIONAL_KEYS = ("options", "name", "description")


@dataclass(frozen=True)
class ProblemFile:
    problem: ProblemDefinition
    x_star: np.ndarray
    options: Dict[str, Any] = field(default_factory=dict)
    name: str = ""
    description: str = ""
    path: Optional[Path] = None

    def to_dict(self) -> Dict[str, Any]:
        out = self.problem.to_dict()
        out["x_star"] = self.x_star.tolist()
        out["options"] = self.options
        if self.name:
            out["name"] = self.name
        return out


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def parse_problem(data: Any, source: str = "<memory>") -> ProblemFile:
    """Validate a decoded problem document."""

    if not isinstance(data, dict):
        raise ProblemValidationError(f"Problem file {source} must hold a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise ProblemValidationError(f"Problem file {source} is missing {', '.join(missing)}")
    unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ProblemValidationError(f"Unknown keys in {source}: {', '.join(unknown)}")

    n, m = data["n"], data["m"]
    if not _is_int(n) or n < 1:
        raise ProblemValidationError(f"n must be a positive integer, got {n!r}")
    if not _is_int(m) or m < 1:
        raise ProblemValidationError(f"m must be a positive integer, got {m!r}")
    if m > n:
        raise ProblemValidationError(f"m = {m} exceeds n = {n}; need 1 <= m <= n")
    if not isinstance(data["f"], str):
        raise ProblemValidationError("f must be an expression string")
    g = data["g"]
    if not isinstance(g, list) or not all(isinstance(s, str) for s in g):
        raise ProblemValidationError("g must be a list of expression strings")
    if len(g) != m:
        raise ProblemValidationError(f"g has {len(g)} entries but m = {m}")

    x_star = data["x_star"]
    if (
        not isinstance(x_star, list)
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x_star)
    ):
        raise ProblemValidationError("x_star must be a list of numbers")
    if len(x_star) != n:
        raise ProblemValidationError(f"x_star has {len(x_star)} entries but n = {n}")
    if not all(math.isfinite(v) for v in x_star):
        raise ProblemValidationError("x_star entries must be finite")

    options = data.get("options") or {}
    config.resolve_options(options)

    return ProblemFile(
        problem=ProblemDefinition.from_sources(n, data["f"], g),
        x_star=np.array(x_star, dtype=float),
        options=options,
        name=str(data.get("name", "")),
        description=str(data.get("description", "")),
    )


def load_problem(path: Path) -> ProblemFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ProblemValidationError(f"Cannot read problem file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemValidationError(
            f"Problem file {path} is not valid JSON (line {exc.lineno}, column {exc.colno})"
        ) from None
    pf = parse_problem(data, str(path))
    return ProblemFile(
        problem=pf.problem,
        x_star=pf.x_star,
        options=pf.options,
        name=pf.name or path.stem,
        description=pf.description,
        path=path,
    )


def list_problems(directory: Path = DEFAULT_PROBLEMS_DIR) -> Dict[str, Path]:
    if not directory.exists():
        return {}
    return {p.stem: p for p in sorted(directory.glob("*.json"))}


def resolve_problem(ref: Union[str, Path], directory: Path = DEFAULT_PROBLEMS_DIR) -> Path:
    """A path on disk, or the stem of a shipped instance."""

    path = Path(ref)
    if path.exists():
        return path
    shipped = list_problems(directory)
    if str(ref) in shipped:
        return shipped[str(ref)]
    raise ProblemValidationError(
        f"No problem file {ref!r} (and no shipped instance by that name)"
    )


def save_problem(data: Dict[str, Any], path: Path) -> None:
    parse_problem(data, str(path))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
