import pytest
from hypothesis import HealthCheck, settings

from tdubench.config import default_config

settings.register_profile(
    "toolkit",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("toolkit")


@pytest.fixture
def cfg():
    return default_config()
