"""Text serialization helpers.

All persisted artifacts are versioned JSON documents. Floats are written
as 17-significant-digit strings so that load(save(x)) is bit-exact for
IEEE doubles regardless of the JSON writer's float formatting.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DataError


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def fmt_vector(v) -> str:
    """Space-separated row-major rendering of an array."""
    return " ".join(fmt_float(x) for x in np.asarray(v, dtype=float).ravel())


def parse_vector(s: str, expected: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(t) for t in s.split()], dtype=float)
    except ValueError as exc:
        raise DataError(f"bad numeric field: {exc}") from exc
    if expected is not None and v.size != expected:
        raise DataError(f"expected {expected} values, found {v.size}")
    return v


def dump_document(obj: dict, path: str, kind: str, version: int) -> None:
    doc = {"format": kind, "version": version}
    doc.update(obj)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_document(path: str, kind: str, version: int) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != kind:
        raise DataError(f"{path}: expected a '{kind}' document")
    if doc.get("version") != version:
        raise DataError(
            f"{path}: unsupported {kind} version {doc.get('version')!r}, "
            f"this build reads version {version}"
        )
    return doc
