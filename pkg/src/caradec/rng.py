"""Deterministic, cross-platform random streams.

Every consumer derives its generator from ``stream(seed, *tags)``: a
Philox4x64 counter-based generator keyed by the BLAKE2b-128 digest of the
(seed, tags...) tuple.  Identical (seed, tags) give identical streams on
any platform; distinct purposes never share a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *tags) -> int:
    payload = repr((int(seed),) + tuple(tags)).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "big")


def stream(seed: int, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *tags)))
