"""Hierarchical seed streams: master -> experiment -> robot -> trial -> purpose.

Every stream is a ``SeedSequence`` addressed by a spawn-key path, so adding
robots or trials never perturbs the draws of existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream indices must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode())


def stream(master_seed: int, *path) -> np.random.Generator:
    """Independent generator for ``path`` below ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(master_seed: int, *path) -> int:
    return int(np.random.SeedSequence(int(master_seed), spawn_key=tuple(_key(p) for p in path))
               .generate_state(1, np.uint32)[0])
