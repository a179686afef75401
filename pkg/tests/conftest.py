import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "cardylab",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("cardylab")

# thread count is part of the reproducibility contract; pin it unless a test overrides it
os.environ.setdefault("CARDYLAB_THREADS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
