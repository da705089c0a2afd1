"""Counter-based random streams.

Every trial draws from its own Philox stream keyed by ``(seed, stream)``, so
results do not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for trial ``index`` under master ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be non-negative")
    key = np.array([seed & _MASK, index & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
