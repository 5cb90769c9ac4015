"""JSON report assembly.

Reports are plain dicts dumped with sorted keys so two runs on the same
input are byte-identical. numpy values become Python numbers; non-finite
floats become null and leave a diagnostic naming the field.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from curvopt import config


def _sanitize(obj: Any, path: str, diagnostics: List[str]) -> Any:
    if isinstance(obj, dict):
        return {str(k): _sanitize(v, f"{path}.{k}" if path else str(k), diagnostics) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v, f"{path}[{i}]", diagnostics) for i, v in enumerate(obj)]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist(), path, diagnostics)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            diagnostics.append(f"{path} is {value} and is reported as null")
            return None
        return value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def build_report(
    command: str,
    problem: Dict[str, Any],
    sections: Dict[str, Any],
    diagnostics: Optional[List[str]] = None,
) -> Dict[str, Any]:
    """Report document with schema version, problem echo and sections."""

    notes = list(diagnostics or [])
    body = _sanitize(sections, "", notes)
    doc = {
        "schema": config.SCHEMA_VERSION,
        "command": command,
        "problem": _sanitize(problem, "problem", notes),
    }
    doc.update(body)
    doc["diagnostics"] = notes
    return doc


def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)


def write_report(doc: Dict[str, Any], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc) + "\n")


def error_line(exc) -> str:
    """Single-line machine-readable error for stderr."""
    payload = exc.to_dict() if hasattr(exc, "to_dict") else {"kind": type(exc).__name__, "message": str(exc)}
    return json.dumps({"error": _sanitize(payload, "error", [])}, sort_keys=True)
