import os

import dotenv
import numpy as np
import pytest
from hypothesis import HealthCheck
from hypothesis import settings as hypothesis_settings

from daecanon import CanonSession, CanonSettings

p = os.path.join(os.path.dirname(__file__), '../')
dotenv.load_dotenv(p)

# Set RUN_SLOW_TESTS=true to run the property suites with more examples
RUN_SLOW_TESTS = os.environ.get("RUN_SLOW_TESTS", "").lower() == "true"

hypothesis_settings.register_profile(
    "fast",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
hypothesis_settings.register_profile("slow", hypothesis_settings.get_profile("fast"), max_examples=200)
hypothesis_settings.load_profile("slow" if RUN_SLOW_TESTS else "fast")


@pytest.fixture
def settings():
    """Settings independent of any DAE_CANON_* variables in the environment."""
    return CanonSettings(seed=0, n_verify=9, n_check=9, n_zero=9)


@pytest.fixture
def session(settings):
    with CanonSession(settings) as session:
        yield session


@pytest.fixture
def ts():
    return list(np.linspace(0.05, 0.95, 7))
