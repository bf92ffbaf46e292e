"""Deterministic random-number plumbing.

All randomness in the package flows from one master seed through named
sub-streams, so each pipeline stage (corpus, ae, gan, synth, exec) can be
rerun in isolation and still reproduce the exact same draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _stream_key(name: str) -> int:
    """Stable 64-bit key for a stream name (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, *names: str | int) -> np.random.Generator:
    """Generator for the sub-stream identified by (seed, *names).

    Names may be strings (hashed stably) or plain integers (e.g. a profile
    index), so per-item streams are schedule-independent.
    """
    if int(seed) < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    keys = [_stream_key(n) if isinstance(n, str) else int(n) for n in names]
    return np.random.default_rng(np.random.SeedSequence([int(seed), *keys]))


def as_generator(seed: int | np.random.Generator) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_for(int(seed))
