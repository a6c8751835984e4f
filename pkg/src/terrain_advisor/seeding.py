"""Stable per-component seeds derived from one global seed."""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *components) -> int:
    """64-bit seed from ``seed`` and component names; stable across processes and platforms."""
    text = ":".join([str(int(seed)), *map(str, components)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")
