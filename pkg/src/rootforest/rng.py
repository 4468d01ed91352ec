"""Reproducible random streams keyed by (seed, stream_id)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible randomness source.

    Identical (seed, stream_id) pairs reproduce bit-identical draws; distinct
    stream ids give independent-quality streams (PCG64 seeded through a
    SeedSequence over both words).  A single stream must not be shared across
    concurrent samplers; spawn children instead.
    """

    seed: int
    stream_id: int = 0

    def generator(self):
        return np.random.default_rng(np.random.SeedSequence((self.seed, self.stream_id)))

    def child(self, offset):
        """Stream with the same seed and a shifted id, for batch fan-out."""
        return RngStream(self.seed, self.stream_id + 1 + offset)
