"""Deterministic random-stream addressing.

Every stochastic component draws from a stream keyed by
``(master_seed, replication, task, purpose)``.  Equal keys replay the same
draw sequence; keys differing in any coordinate give statistically
independent streams (numpy ``SeedSequence`` spawn keys).  This is what makes
whole experiments byte-reproducible from a single master seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Purpose slots for the (replication, task, purpose) stream id.
TASKGEN = 0      # drawing theta / optimal-arm chains
REWARD = 1       # reward noise
SELECT = 2       # algorithm-internal draws (posterior samples, coin flips)
STOP = 3         # Monte Carlo draws inside stopping rules
CALIBRATION = 4  # calibration data and classifier training


@dataclass(frozen=True)
class RngStream:
    """A reproducible, addressable random stream.

    ``generator()`` returns a fresh generator positioned at the start of the
    stream, so two calls with the same key replay identical sequences.
    """

    seed: int
    stream_id: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self) -> None:
        sid = tuple(int(x) for x in self.stream_id)
        if len(sid) != 3:
            raise ValueError("stream_id must be (replication, task, purpose)")
        if any(x < 0 for x in sid):
            raise ValueError("stream_id coordinates must be nonnegative")
        object.__setattr__(self, "stream_id", sid)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, replication: int | None = None, task: int | None = None,
              purpose: int | None = None) -> "RngStream":
        """Copy of this stream with some coordinates replaced."""
        rep, tsk, pur = self.stream_id
        return RngStream(self.seed, (
            rep if replication is None else replication,
            tsk if task is None else task,
            pur if purpose is None else purpose,
        ))


def as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    """Accept either a stream key or a live generator.

    Passing an ``RngStream`` starts from the beginning of that stream; pass a
    ``Generator`` when consecutive calls must advance shared state.
    """
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")
