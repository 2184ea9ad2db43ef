"""Counter-based random streams keyed by (seed, replication, user, step, purpose).

Every random draw in the package comes from a generator built here. A stream is
identified by a path of integers and short string tags; distinct paths give
statistically independent streams, and the draw for a given path never depends
on execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _feed(h, part: int | str) -> None:
    # type byte + length + payload: framing is injective, so no two distinct
    # paths serialize alike (in particular a path never collides with an
    # extension of itself, and ("a",) != (97,))
    if isinstance(part, bool):
        raise TypeError("bool is not a valid stream path part")
    if isinstance(part, (int, np.integer)):
        v = int(part)
        payload = v.to_bytes((v.bit_length() + 8) // 8, "little", signed=True)
        h.update(b"i")
    elif isinstance(part, str):
        payload = part.encode("utf-8")
        h.update(b"s")
    else:
        raise TypeError(f"stream path parts must be int or str, got {type(part).__name__}")
    h.update(len(payload).to_bytes(4, "little"))
    h.update(payload)


def stream(*path: int | str) -> np.random.Generator:
    """Return the generator for a stream path, e.g. stream(seed, rep, "train")."""
    if not path:
        raise ValueError("stream path must not be empty")
    h = hashlib.blake2b(digest_size=16)
    for part in path:
        _feed(h, part)
    entropy = int.from_bytes(h.digest(), "little")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def as_path(seed: int | tuple) -> tuple:
    """Normalize a user-facing seed (int or already-derived path) to a path tuple."""
    if isinstance(seed, tuple):
        return seed
    return (seed,)
