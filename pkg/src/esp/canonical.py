"""Canonical JSON form and content hashing.

Every artifact the engine writes uses one canonical form: keys sorted
lexicographically, 2-space indent, LF line endings, trailing newline.
Hashes are SHA-256 over those exact bytes, so identical inputs always
produce identical files and identical hashes.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def canonical_bytes(obj: Any) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def content_hash(obj: Any) -> str:
    return sha256_hex(canonical_bytes(obj))


def session_hash(kb_doc: Any, app_doc: Any) -> str:
    """Hash of the canonical concatenation ``kb || 0x00 || app``."""
    return sha256_hex(canonical_bytes(kb_doc) + b"\x00" + canonical_bytes(app_doc))


def write_canonical(path, obj: Any) -> bytes:
    data = canonical_bytes(obj)
    with open(path, "wb") as fh:
        fh.write(data)
    return data
