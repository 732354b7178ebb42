"""CSV / JSON emission."""
from __future__ import annotations

import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

SCHEMA_VERSION = 1


class NonFiniteError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool,)):
        return str(int(v))
    if isinstance(v, int) or (hasattr(v, "dtype") and getattr(v.dtype, "kind", "") in "iu"):
        return str(int(v))
    x = float(v)
    if not math.isfinite(x):
        raise NonFiniteError(f"refusing to write non-finite value {x!r}")
    return f"{x:.12g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence], comment: dict | None = None) -> str:
    buf = io.StringIO()
    if comment is not None:
        buf.write("# " + json_text(comment, indent=None) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        raise NonFiniteError(f"refusing to write non-finite value {obj!r}")
    return obj


def json_text(doc: dict, indent: int | None = 2) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **_plain(doc)}
    return json.dumps(doc, indent=indent, allow_nan=False)


def write_text(text: str, path: str | Path | None) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text)


def emit(results, fmt: str, path=None, header: Sequence[str] | None = None,
         comment: dict | None = None) -> None:
    """Write ``results`` as CSV (rows, with ``header``) or JSON (a dict)."""
    if fmt == "csv":
        if header is None:
            raise ValueError("CSV output needs a header")
        text = csv_text(header, results, comment)
    elif fmt == "json":
        text = json_text(results) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    write_text(text, path)
