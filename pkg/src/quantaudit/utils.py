"""Shared helpers: deterministic seed derivation, stable digests, guarded writes."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .exceptions import ArtifactError

MASK64 = (1 << 64) - 1


def derive_seed(*parts: object) -> int:
    """Derive a 64-bit seed from an arbitrary tuple of labels.

    The derivation hashes the string rendering of every part, so
    ``derive_seed(master, digest, "mix0", 17)`` is stable across processes
    and platforms.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") & MASK64


def vector_digest(values: np.ndarray) -> int:
    """64-bit content digest of a float vector (exact bit pattern)."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    h = hashlib.blake2b(arr.tobytes(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def json_digest(obj: object) -> str:
    """Hex digest of an object's canonical JSON rendering."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def guarded_write_text(path: Path, content: str, allow_overwrite: bool = False) -> None:
    """Write ``content`` to ``path`` without silently clobbering other data.

    An existing identical file is left untouched; an existing different file
    raises unless overwriting was requested explicitly.  Writes go through a
    temp file + rename so readers never observe partial content.
    """
    path = Path(path)
    if path.exists():
        old = path.read_text()
        if old == content:
            return
        if not allow_overwrite:
            raise ArtifactError(
                f"refusing to overwrite {path} with different content; "
                "pass --no-resume (or allow_overwrite=True) to recompute"
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(content)
    tmp.replace(path)
