"""Small file helpers: atomic writes and content digests."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

from .errors import IoError


def write_text_atomic(path: str | Path, text: str) -> Path:
    """Write via a sibling temp file and rename, so failures leave no partial file."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    except OSError as exc:
        raise IoError(f"cannot digest {path}: {exc}") from exc
    return digest.hexdigest()
