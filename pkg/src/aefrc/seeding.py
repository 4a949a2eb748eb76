"""Deterministic seed fan-out.

A single root seed drives every stochastic stage (weight init, noise
draws, fold shuffles, CMA-ES sampling). Stages derive child seeds from
the root plus a structural key so that no two stages share a stream and
reruns are bit-identical on one platform.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_ints(key) -> tuple[int, ...]:
    out = []
    for part in key:
        if isinstance(part, str):
            out.append(zlib.crc32(part.encode("utf-8")))
        else:
            out.append(int(part) & 0xFFFFFFFF)
    return tuple(out)


def spawn_seed(root: int, *key) -> int:
    """Derive a child seed from ``root`` and a structural key path."""
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=_key_to_ints(key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def rng_for(root: int, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(root), spawn_key=_key_to_ints(key))
    return np.random.default_rng(ss)
