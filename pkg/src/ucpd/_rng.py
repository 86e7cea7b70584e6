"""Seeded random streams.

Every stream is a :class:`numpy.random.Philox` counter-based generator keyed
through :class:`numpy.random.SeedSequence`.  Philox output for a given key is
fixed by NumPy's bit-generator compatibility policy (NumPy >= 1.17), so a
(seed, keys) pair names the same stream on every machine.
"""

import numpy as np


def stream(seed, *keys):
    """Return an independent generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *keys):
    """Derive a child integer seed, e.g. for replication ``r`` of a study."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
