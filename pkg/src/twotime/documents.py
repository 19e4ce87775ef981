"""Scenario JSON documents and deterministic text output.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists of pairs::

    {
      "dim": 3, "epsilon": 1.0, "t_i": 0.0, "t_f": 3.14159...,
      "pre":  [[0.577, 0], [0, 0.577], [0.577, 0]],
      "post": [...],
      "segments": [{"t_start": 0.0, "t_end": 3.14159..., "H": [[[0, 0], [1, 0], [0, 0]], ...]}],
      "events":   [{"time": 0.785..., "U": [...], "label": "solenoid"}],
      "schedule": {"t1": 0.0, "t2": 0.785..., "t3": 1.570...}
    }

Floats are written with 17 significant digits so every value round-trips
exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .errors import ParseError, ValidationError
from .qcore import HERMITIAN_TOL, HermitianOperator, validate
from .scenario import HamiltonianSegment, Scenario, UnitaryEvent

RENORMALIZE_TOL = 1e-6


def _number(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(path, f"expected a number, got {type(x).__name__}")
    if not math.isfinite(x):
        raise ParseError(path, "non-finite number")
    return float(x)


def _field(doc, key, path):
    if not isinstance(doc, dict):
        raise ParseError(path or "$", "expected an object")
    if key not in doc:
        raise ParseError(f"{path}.{key}" if path else key, "missing field")
    return doc[key]


def _complex(x, path):
    if not isinstance(x, list) or len(x) != 2:
        raise ParseError(path, "expected a [re, im] pair")
    return complex(_number(x[0], f"{path}[0]"), _number(x[1], f"{path}[1]"))


def _vector(x, dim, path):
    if not isinstance(x, list):
        raise ParseError(path, "expected a list of [re, im] pairs")
    if len(x) != dim:
        raise ParseError(path, f"expected {dim} entries, got {len(x)}")
    return np.array([_complex(v, f"{path}[{k}]") for k, v in enumerate(x)])


def _matrix(x, dim, path):
    if not isinstance(x, list) or len(x) != dim:
        raise ParseError(path, f"expected {dim} rows")
    return np.array([_vector(row, dim, f"{path}[{k}]") for k, row in enumerate(x)])


def _normalized(v, path):
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > RENORMALIZE_TOL:
        raise ValidationError(f"{path} has norm {n!r}; expected 1 within {RENORMALIZE_TOL}")
    return v / n


def parse_scenario(doc):
    """Build a :class:`Scenario` from a decoded JSON document (or its text)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    dim = _field(doc, "dim", "")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 2:
        raise ParseError("dim", "expected an integer >= 2")
    epsilon = _number(doc.get("epsilon", 1.0), "epsilon")
    t_i = _number(_field(doc, "t_i", ""), "t_i")
    t_f = _number(_field(doc, "t_f", ""), "t_f")
    pre = _normalized(_vector(_field(doc, "pre", ""), dim, "pre"), "pre")
    post = _normalized(_vector(_field(doc, "post", ""), dim, "post"), "post")

    raw_segments = _field(doc, "segments", "")
    if not isinstance(raw_segments, list):
        raise ParseError("segments", "expected a list")
    segments = []
    for k, seg in enumerate(raw_segments):
        path = f"segments[{k}]"
        h = _matrix(_field(seg, "H", path), dim, f"{path}.H")
        if not validate(h, "hermitian", HERMITIAN_TOL):
            raise ValidationError(f"{path}.H is not Hermitian")
        try:
            segments.append(
                HamiltonianSegment(
                    _number(_field(seg, "t_start", path), f"{path}.t_start"),
                    _number(_field(seg, "t_end", path), f"{path}.t_end"),
                    HermitianOperator(h, "H"),
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None

    raw_events = doc.get("events", [])
    if not isinstance(raw_events, list):
        raise ParseError("events", "expected a list")
    events = []
    for k, ev in enumerate(raw_events):
        path = f"events[{k}]"
        u = _matrix(_field(ev, "U", path), dim, f"{path}.U")
        label = ev.get("label", "")
        if not isinstance(label, str):
            raise ParseError(f"{path}.label", "expected a string")
        try:
            events.append(UnitaryEvent(_number(_field(ev, "time", path), f"{path}.time"), u, label))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None

    schedule = doc.get("schedule", {})
    if not isinstance(schedule, dict):
        raise ParseError("schedule", "expected an object")
    schedule = {str(k): _number(v, f"schedule.{k}") for k, v in schedule.items()}
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ParseError("name", "expected a string")
    return Scenario(
        dim=dim,
        epsilon=epsilon,
        t_i=t_i,
        t_f=t_f,
        segments=segments,
        events=events,
        pre=pre,
        post=post,
        schedule=schedule,
        name=name,
    )


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def serialize_scenario(s):
    """Plain-data document for ``s``; inverse of :func:`parse_scenario`."""
    return {
        "name": s.name,
        "dim": s.dim,
        "epsilon": s.epsilon,
        "t_i": s.t_i,
        "t_f": s.t_f,
        "pre": [_pair(z) for z in s.pre],
        "post": [_pair(z) for z in s.post],
        "segments": [
            {
                "t_start": seg.t_start,
                "t_end": seg.t_end,
                "H": [[_pair(z) for z in row] for row in seg.H.matrix],
            }
            for seg in s.segments
        ],
        "events": [
            {"time": ev.time, "U": [[_pair(z) for z in row] for row in ev.U], "label": ev.label}
            for ev in s.events
        ],
        "schedule": dict(s.schedule),
    }


def fmt(x):
    """17-significant-digit rendering used for every float we emit."""
    return f"{float(x):.17g}"


def dumps(obj, indent=2, _level=0):
    """JSON text with floats at 17 significant digits and stable key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return "null"
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
