"""Output files: trace CSVs, key=value reports and analysis tables.

Every file starts with its provenance (seed, beta and where beta came from)
so a trace can be traced back to the run that produced it. CSVs use '.'
as decimal separator and LF line endings; floats are written with the
shortest representation that round-trips.
"""

from __future__ import annotations

import csv
import io
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .engine.solver import RunTrace
from .eso import CurvePoint, StepsizeInfo

PathLike = Union[str, Path]

TRACE_COLUMNS = ("iter", "loss", "gap", "msgs_sent", "elapsed_s")
CURVE_COLUMNS = ("c", "tau", "s", "sigma", "beta1", "scaled_beta1", "scaled_safe_beta")


def format_value(value: Any) -> str:
    """Text form of a report value; None becomes the empty string."""
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def _comment_lines(comments: Optional[Mapping[str, Any]]) -> str:
    if not comments:
        return ""
    return "".join(f"# {k}={format_value(v)}\n" for k, v in comments.items())


def _write(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _table(columns: Sequence[str], rows: Iterable[Sequence[Any]], comments=None) -> str:
    buf = io.StringIO()
    buf.write(_comment_lines(comments))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


# -------------------- TRACE --------------------

def trace_provenance(trace: RunTrace, extra: Optional[Mapping[str, Any]] = None) -> dict:
    out = {
        "seed": trace.seed,
        "beta": trace.beta,
        "beta_source": trace.beta_source,
        "protocol": trace.protocol,
    }
    if trace.L_star is not None:
        out["L_star"] = trace.L_star
    if extra:
        out.update(extra)
    return out


def format_trace_csv(
    trace: RunTrace,
    timing: bool = False,
    extra: Optional[Mapping[str, Any]] = None,
) -> str:
    """Trace as CSV text. ``elapsed_s`` stays empty unless ``timing`` is set."""
    rows = (
        (r.iteration, r.loss, r.gap, r.messages, r.elapsed if timing else None)
        for r in trace.records
    )
    return _table(TRACE_COLUMNS, rows, trace_provenance(trace, extra))


def write_trace_csv(
    path: PathLike,
    trace: RunTrace,
    timing: bool = False,
    extra: Optional[Mapping[str, Any]] = None,
) -> Path:
    return _write(path, format_trace_csv(trace, timing, extra))


def header_only_trace_csv(provenance: Mapping[str, Any]) -> str:
    return _table(TRACE_COLUMNS, (), provenance)


# -------------------- KEY=VALUE --------------------

def format_key_value(values: Mapping[str, Any]) -> str:
    return "".join(f"{k}={format_value(v)}\n" for k, v in values.items())


def write_key_value(path: PathLike, values: Mapping[str, Any]) -> Path:
    return _write(path, format_key_value(values))


def stepsize_report(info: StepsizeInfo, extra: Optional[Mapping[str, Any]] = None) -> dict:
    out = dict(extra or {})
    out.update(info.as_dict())
    return out


# -------------------- TABLES --------------------

def write_stepsize_csv(
    path: PathLike, info: StepsizeInfo, comments: Optional[Mapping[str, Any]] = None
) -> Path:
    values = info.as_dict()
    return _write(path, _table(tuple(values), [tuple(values.values())], comments))


def write_curve_csv(
    path: PathLike, points: Iterable[CurvePoint], comments: Optional[Mapping[str, Any]] = None
) -> Path:
    rows = (tuple(getattr(p, col) for col in CURVE_COLUMNS) for p in points)
    return _write(path, _table(CURVE_COLUMNS, rows, comments))
