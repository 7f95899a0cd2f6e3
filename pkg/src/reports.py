"""
Text, JSON and CSV rendering of results.

JSON is written with sorted keys; rationals become integers when integral and
"p/q" strings otherwise, so identical inputs always give identical bytes.
"""

import json
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.decomposition import ExactnessReport
from src.flow import CutReport
from src.graph_core import Unbounded, format_capacity


def format_rational(value) -> str:
    if isinstance(value, Unbounded):
        return format_capacity(value)
    value = Fraction(value)
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def jsonable(obj: Any) -> Any:
    """Convert results into JSON-ready values."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else format_rational(obj)
    if isinstance(obj, int):
        return obj
    if isinstance(obj, Unbounded):
        return format_capacity(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round(float(obj), 6)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(key): jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(item) for item in items]
    if isinstance(obj, pd.DataFrame):
        return [jsonable(row) for row in obj.to_dict(orient="records")]
    return str(obj)


def to_json(record: Any) -> str:
    return json.dumps(jsonable(record), sort_keys=True, indent=2) + "\n"


def frame_for_output(frame: pd.DataFrame) -> pd.DataFrame:
    """Copy with rationals rendered as strings and floats rounded."""
    out = frame.copy()
    for column in out.columns:
        out[column] = [
            format_rational(v) if isinstance(v, (Fraction, Unbounded))
            else round(v, 6) if isinstance(v, float)
            else v
            for v in out[column]
        ]
    return out


def render_frame(frame: pd.DataFrame, fmt: str) -> str:
    if fmt == "json":
        return to_json(frame)
    printable = frame_for_output(frame)
    if fmt == "csv":
        return printable.to_csv(index=False, lineterminator="\n")
    if printable.empty:
        return "(no rows)\n"
    return printable.to_string(index=False) + "\n"


def _bounds_line(report: CutReport) -> str:
    if report.exact:
        return f"min-cut: {format_rational(report.upper)} (exact)"
    return (
        f"min-cut bounds: lower={format_rational(report.lower)} "
        f"upper={format_rational(report.upper)} (not exact)"
    )


def render_cut_report(report: CutReport, fmt: str = "text", with_paths: bool = True) -> str:
    """Render a CutReport; a single value is shown only when the bounds are exact."""
    if fmt == "json":
        return to_json(report.to_dict(with_paths))
    if fmt == "csv":
        row = {
            "source": report.source,
            "sink": report.sink,
            "lower": report.lower,
            "upper": report.upper,
            "exact": report.exact,
            "n_s": " ".join(f"{s}={n}" for s, n in report.n_s.items()),
            "paths": ";".join(f"{p.to_text()}={format_rational(p.flow)}" for p in report.paths),
        }
        return render_frame(pd.DataFrame([row]), "csv")

    lines = [
        f"policy: {report.policy}",
        f"{report.source} -> {report.sink}",
        _bounds_line(report),
        "n_s: " + " ".join(f"{s}={n}" for s, n in report.n_s.items()),
    ]
    if with_paths:
        lines.append(f"paths ({len(report.paths)}):")
        for path in report.paths:
            lines.append(f"  {format_rational(path.flow):>6}  {path.to_text()}")
    return "\n".join(lines) + "\n"


def render_exactness(report: ExactnessReport, fmt: str = "text") -> str:
    if fmt == "json":
        return to_json(report.to_dict())
    rows = []
    for symbol, d in report.decompositions.items():
        rows.append({
            "symbol": symbol,
            "n_s": d.n_s,
            "minimal": d.minimality.value,
            "blocks": " + ".join(b.to_text() for b in d.blocks) or "-",
        })
    frame = pd.DataFrame(rows, columns=["symbol", "n_s", "minimal", "blocks"])
    if fmt == "csv":
        return render_frame(frame, "csv")
    verdict = "exact" if report.exact else "bounds only"
    return f"policy: {report.policy}\n" + render_frame(frame, "text") + f"verdict: {verdict}\n"


def render_summary(summary: Dict[str, Any], fmt: str = "text", title: Optional[str] = None) -> str:
    if fmt == "json":
        return to_json(summary)
    lines: List[str] = [title] if title else []
    for key, value in summary.items():
        if isinstance(value, float):
            value = f"{value:.3f}"
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"
