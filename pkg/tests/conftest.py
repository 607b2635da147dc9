import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

HALF_SPINS = [1, 2, 3, 4]  # twice_s for s = 1/2, 1, 3/2, 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_direction(rng):
    from seqspin.spinmath import Direction

    z = rng.uniform(-1, 1)
    return Direction(math.acos(z), rng.uniform(0, 2 * math.pi))
