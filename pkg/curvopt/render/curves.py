"""CSV export of traced curves (columns t, x1..xn)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import pandas as pd

from curvopt.compute.implicit import TracedCurve


def curve_frame(c: TracedCurve) -> pd.DataFrame:
    n = c.points.shape[1]
    df = pd.DataFrame(c.points, columns=[f"x{i}" for i in range(1, n + 1)])
    df.insert(0, "t", c.ts)
    return df.sort_values("t", kind="stable").reset_index(drop=True)


def write_curve_csv(c: TracedCurve, path: Optional[Path] = None) -> str:
    """CSV text of the curve; also written to `path` when given."""
    text = curve_frame(c).to_csv(index=False, lineterminator="\n")
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def read_curve_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)
