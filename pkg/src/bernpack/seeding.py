"""Stable seed derivation for reproducible experiments.

Python's builtin hash is salted per process, so per-cell seeds are derived
from sha256 of a canonical rendering instead.  Adding algorithms or cells
never reshuffles the seeds of existing ones.
"""

from __future__ import annotations

import hashlib

__all__ = ["derived_seed"]


def _canon(part) -> str:
    if isinstance(part, float):
        return repr(part)
    if isinstance(part, (int, str)):
        return str(part)
    raise TypeError(f"seed parts must be int, float or str, got {type(part).__name__}")


def derived_seed(*parts) -> int:
    """Deterministic 63-bit seed from an ordered tuple of primitives."""
    text = "\x1f".join(_canon(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)
