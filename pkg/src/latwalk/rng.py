"""Reproducible random streams.

Every stochastic driver owns a stream keyed by (seed, replica_id), backed by
the counter-based Philox generator.  The reproducibility contract is: same
(seed, replica_id) and the same draw sequence give the same numbers,
independent of how many other replicas run or in what order.  Sub-tasks get
derived streams via :meth:`Stream.spawn`, which extends the spawn key, so
nested spawns never collide.
"""

from __future__ import annotations

import numpy as np


class Stream:
    """A tagged random generator for one replica (or one of its sub-tasks)."""

    def __init__(self, seed: int, replica_id: int = 0, _key: tuple = ()):
        self.seed = int(seed)
        self.replica_id = int(replica_id)
        self._key = (self.replica_id,) + tuple(int(t) for t in _key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self._key)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def uniforms(self, n: int) -> np.ndarray:
        return self.gen.random(n)

    def choice_index(self, cdf: np.ndarray) -> int:
        return int(np.searchsorted(cdf, self.gen.random(), side="right"))

    def normals(self, shape) -> np.ndarray:
        return self.gen.standard_normal(shape)

    def spawn(self, tag: int) -> "Stream":
        """Derived stream; the tag is appended to this stream's spawn key."""
        return Stream(self.seed, self.replica_id, self._key[1:] + (int(tag),))


def stream(seed: int, replica_id: int = 0) -> Stream:
    return Stream(seed, replica_id)
