"""Counter-style seeding: every independent unit of work gets its own stream.

A stream is addressed by ``(seed, *keys)``. Streams depend only on their
address, never on the order in which they are requested, so ensembles and
trial batches are reproducible under any parallel schedule.
"""
from __future__ import annotations

import numpy as np

BATCH = 1 << 16


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1),
                                spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def member_uniforms(seed: int, n: int, *keys: int) -> np.ndarray:
    """One uniform per ensemble member ``i``, drawn from stream ``(seed, *keys, i)``."""
    out = np.empty(n)
    for i in range(n):
        out[i] = stream(seed, *keys, i).random()
    return out


def batched(seed: int, n: int, draw, *keys: int, batch: int = BATCH) -> np.ndarray:
    """Concatenate ``draw(gen, size)`` over fixed-size batches.

    Batch ``b`` always uses stream ``(seed, *keys, b)``, so results for the
    first ``m`` items do not depend on ``n``.
    """
    parts = []
    for b, start in enumerate(range(0, n, batch)):
        size = min(batch, n - start)
        parts.append(draw(stream(seed, *keys, b), size))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)
