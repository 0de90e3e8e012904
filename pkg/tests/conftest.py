import math

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False, allow_infinity=False)
couplings = st.floats(min_value=1e-3, max_value=math.pi / 2)
paths = st.sampled_from("ABCD")


def random_ket(rng, wires):
    v = rng.normal(size=1 << wires) + 1j * rng.normal(size=1 << wires)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
