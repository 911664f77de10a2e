"""Canonical JSON encoding shared by every on-disk format.

All wire formats (scene-json, plan-json, cassettes, reports) are dumped
through ``canonical_dumps`` so that equal values always produce identical
bytes: sorted keys, fixed separators, UTF-8, trailing newline.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def canonical_bytes(obj: Any) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def compact_dumps(obj: Any) -> str:
    """Single-line canonical form, used for request hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
