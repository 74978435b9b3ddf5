import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_widened_ci():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*confidence interval widened")
        yield
