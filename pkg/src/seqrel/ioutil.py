"""Canonical, atomic artifact IO.

Every JSON artifact in this package goes through canonical_json so that
identical in-memory objects always serialize to identical bytes. Floats
rely on repr round-tripping, which json preserves.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .exceptions import ArtifactError, ParseError


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_json_atomic(path: str | Path, obj) -> None:
    write_text_atomic(path, canonical_json(obj))


def write_text_atomic(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"no such artifact: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
