"""Shared helpers: content hashing, seed derivation, float formatting."""

from __future__ import annotations

import hashlib

import numpy as np


def format_float(v: float) -> str:
    """Render a float with 17 significant digits so parsing it back is lossless."""
    return format(float(v), ".17g")


def row_digests(X, y=None, w=None) -> np.ndarray:
    """Per-row content digest, used to order training rows canonically.

    Sorting by digest makes every downstream seeded draw independent of the
    order rows arrived in.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    yarr = None if y is None else np.ascontiguousarray(y, dtype=np.int64)
    warr = None if w is None else np.ascontiguousarray(w, dtype=np.float64)
    out = np.empty(X.shape[0], dtype="S16")
    for i in range(X.shape[0]):
        h = hashlib.blake2b(digest_size=16)
        h.update(X[i].tobytes())
        if yarr is not None:
            h.update(yarr[i].tobytes())
        if warr is not None:
            h.update(warr[i].tobytes())
        out[i] = h.digest()
    return out


def canonical_order(X, y=None, w=None) -> np.ndarray:
    """Indices that sort rows by content digest; stable for duplicate rows."""
    return np.argsort(row_digests(X, y, w), kind="stable")


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    digest = hashlib.blake2b(str(tag).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def derive_seed(*parts) -> int:
    """Collapse a path of ints/strings into one stable 32-bit seed.

    Used wherever a parent seed fans out into independent child streams
    (per tree, per binary problem, per fold) so that adding or reordering
    unrelated work never perturbs an existing stream.
    """
    entropy = [_tag_to_int(p) for p in parts]
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, dtype=np.uint32)[0])
