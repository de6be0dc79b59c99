"""Per-task random streams derived from a root seed.

Every Monte Carlo task gets its own generator keyed by ``(root_seed, *keys)``
so results do not depend on the order or degree of parallel execution.
"""
from __future__ import annotations

import numpy as np


def task_rng(root_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), *map(int, keys)]))
