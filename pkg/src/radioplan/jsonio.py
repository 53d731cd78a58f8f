"""Canonical JSON serialization and atomic file writes.

Artifacts must be byte-stable across runs, so every JSON file goes
through the same dump settings, and every write lands via
write-temp-then-rename.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


def dumps_canonical(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def write_bytes_atomic(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp.{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_json_atomic(path: str | Path, obj) -> None:
    write_bytes_atomic(path, dumps_canonical(obj).encode("utf-8"))


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())
