"""Canonical JSON: one serializer for every artifact written to disk.

Stable key order and fixed formatting give byte-identical files for
identical inputs, which golden tests and manifest hashing rely on.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any


def canonical_dumps(obj: Any) -> str:
    """Serialize to the canonical on-disk form (sorted keys, 2-space indent)."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def canonical_compact(obj: Any) -> str:
    """Compact canonical form used for hashing, not for files."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def content_hash(obj: Any) -> str:
    """sha256 hex digest of the compact canonical form."""
    return hashlib.sha256(canonical_compact(obj).encode("utf-8")).hexdigest()


def write_canonical(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_dumps(obj), encoding="utf-8")


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))
