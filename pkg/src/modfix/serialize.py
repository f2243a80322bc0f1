"""JSON documents and CSV traces with byte-stable output.

Floats are written with ``repr`` (shortest round-tripping form) and JSON
keys are sorted, so identical inputs give identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields, is_dataclass
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .modular import ModularFunctional
from .problems import problem_from_dict


def to_jsonable(obj):
    """Recursively convert results, certificates and arrays to plain JSON values."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, np.bool_):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in fields(obj)}
    return repr(obj)


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    """Parse a JSON file; unreadable or malformed files raise :class:`PreconditionError`."""
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise PreconditionError(f"cannot read {path}: {exc}") from exc


def result_to_dict(result):
    """Document for a :class:`FixedPointResult`; traces are written separately."""
    trace = result.trace
    info = {k: v for k, v in result.info.items() if not hasattr(v, "rows") and k != "points"}
    return {
        "point": result.point,
        "residual": result.residual,
        "residual_scale": result.residual_scale,
        "iterations": result.iterations,
        "converged": result.converged,
        "scheme": result.scheme,
        "mode": result.mode,
        "certificate": result.certificate,
        "notes": list(result.notes),
        "info": info,
        "trace_rows": len(trace) if trace is not None else 0,
        "trace_violations": trace.violations().tolist() if trace is not None else [],
    }


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trace_to_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(trace.columns))
    for row in trace.rows():
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_trace(path, trace):
    """Write any trace exposing ``columns`` and ``rows()`` as CSV."""
    Path(path).write_text(trace_to_csv(trace))


def read_trace(path):
    """Read a CSV trace into ``{column: ndarray}``; needs ``residual`` and ``bound``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise PreconditionError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or "residual" not in rows[0] or "bound" not in rows[0]:
        raise PreconditionError(f"{path}: trace header must contain residual and bound")
    header = rows[0]
    body = rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise PreconditionError(f"{path}: malformed trace row ({exc})") from exc
    return {name: data[:, i] for i, name in enumerate(header)}


def load_modular(src):
    """Modular from a dict or a JSON file path."""
    d = read_json(src) if isinstance(src, (str, Path)) else src
    try:
        return ModularFunctional.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise PreconditionError(f"malformed modular spec: {exc}") from exc


def load_problem(src):
    """Mapping from a dict or a JSON file path (see :func:`problem_from_dict`)."""
    d = read_json(src) if isinstance(src, (str, Path)) else src
    try:
        return problem_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise PreconditionError(f"malformed problem spec: {exc}") from exc
