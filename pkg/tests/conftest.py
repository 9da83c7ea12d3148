import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Reference cache shared by the whole run; STIFFSTEP_TEST_CACHE reuses one across runs."""
    env = os.environ.get("STIFFSTEP_TEST_CACHE")
    if env:
        os.makedirs(env, exist_ok=True)
        return env
    return str(tmp_path_factory.mktemp("refcache"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
