"""Counter-based random number streams.

All randomness in the package flows through `stream`, which derives an
independent Philox stream from a master seed and an integer path such as
(trial,) or (cell, trial).  Streams are fully determined by the
(seed, path) pair, so parallel trials reproduce bit-for-bit regardless
of scheduling or worker count.
"""

import numpy as np

__all__ = ["stream"]


def stream(master_seed, *path):
    """Return a Generator for the sub-stream identified by `path`.

    master_seed : int, the run-level seed.
    path : ints naming the consumer, e.g. stream(seed, cell, trial).
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
