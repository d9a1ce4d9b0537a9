"""Deterministic JSON encoding for matrices, reports and model specs.

Complex numbers are written as ``[re, im]`` pairs, matrices row-major, floats
with 17 significant digits, object keys in insertion order.  Identical inputs
therefore give byte-identical output.
"""

from __future__ import annotations

import enum
import json
import math
import re

import numpy as np

SCHEMA = "germkit/1"


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if s == "-0":
        s = "0"
    return s


def _complex(z: complex) -> str:
    return f"[{_float(z.real)}, {_float(z.imag)}]"


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if obj is None:
        return "null"
    if isinstance(obj, enum.Enum):
        obj = obj.value
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return _complex(complex(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if obj.ndim == 0:
                return _complex(complex(obj))
            return _encode(list(obj), indent, level)
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [_encode(v, indent, level + 1) for v in obj]
        if all("\n" not in p for p in parts) and sum(len(p) for p in parts) < 100:
            return "[" + ", ".join(parts) + "]"
        return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text for reports containing numpy arrays and complex numbers."""
    return _encode(obj, indent, 0) + "\n"


def complex_matrix(data, path: str = "matrix") -> np.ndarray:
    """Decode a matrix whose entries are numbers or ``[re, im]`` pairs."""
    from .errors import ModelSpecError

    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ModelSpecError("expected a non-empty list of rows", path)
    ncol = len(data[0])
    out = np.zeros((len(data), ncol), dtype=complex)
    for i, row in enumerate(data):
        if len(row) != ncol:
            raise ModelSpecError(f"row has {len(row)} entries, expected {ncol}", f"{path}[{i}]")
        for j, x in enumerate(row):
            out[i, j] = complex_scalar(x, f"{path}[{i}][{j}]")
    return out


def complex_scalar(x, path: str) -> complex:
    from .errors import ModelSpecError

    if isinstance(x, bool):
        raise ModelSpecError("expected a number", path)
    if isinstance(x, (int, float)):
        z = complex(x)
    elif isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        z = complex(x[0], x[1])
    else:
        raise ModelSpecError("expected a number or an [re, im] pair", path)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ModelSpecError("non-finite entry", path)
    return z


def decode_complex_array(data):
    """Inverse of the encoder for nested lists whose leaves are ``[re, im]`` pairs."""
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("expected [re, im] pairs at the innermost level")
    return arr[..., 0] + 1j * arr[..., 1]


_TOKEN = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)|\[(\d+)\]")


def locate(text: str | None, path: str) -> int | None:
    """Best-effort 1-based line of the JSON value at ``path`` (``a.b[2].c``)."""
    if not text or not path:
        return None
    pos = 0
    found = None
    for key, index in _TOKEN.findall(path):
        if key:
            m = re.compile(r'"' + re.escape(key) + r'"\s*:').search(text, pos)
            if m is None:
                return found
            pos = m.end()
            found = text.count("\n", 0, m.start()) + 1
        else:
            # skip to the index-th element of the array opened after pos
            depth, count, i = 0, 0, pos
            while i < len(text):
                c = text[i]
                if c in "[{":
                    depth += 1
                    if depth == 2 and count == int(index) and c in "[{":
                        break
                elif c in "]}":
                    depth -= 1
                    if depth == 0:
                        return found
                elif c == "," and depth == 1:
                    count += 1
                elif depth == 1 and count == int(index) and not c.isspace():
                    break
                i += 1
            pos = i
            found = text.count("\n", 0, i) + 1
    return found


def load_json(text: str):
    """Parse JSON, turning syntax errors into located spec errors."""
    from .errors import ModelSpecError

    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSpecError(f"invalid JSON: {exc.msg}", "", exc.lineno) from exc
